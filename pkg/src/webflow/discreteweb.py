"""Discrete coalescing-walk webs on the two-sublattice grid.

Forward walkers live on even sites (x + t even) of an integer space-time
window and follow one i.i.d. +/-1 arrow per site, so any two forward walks
coalesce the first time they meet.  The backward (dual) web lives on the odd
sublattice; the dual arrow at an odd site (x, t) is forced to be the opposite
of the forward arrow at the even site (x, t-1) directly below, which is the
unique choice that never crosses the forward web.  Parity separation then
gives, deterministically:

* forward paths never cross forward paths (they coalesce),
* dual paths never cross dual paths,
* no forward path ever touches, let alone crosses, a dual path.

Arrow bits are a pure function of (seed, x, t) (see ``rng.coin_bits``), so
fields of any size have O(1) random access and replicas are just distinct
seeds.  Paths that hit the left/right window edge are truncated and flagged;
statistics drop flagged paths rather than wrap or reflect.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .pathspace import BackwardSemipath, ForwardSemipath

__all__ = [
    "LatticeWindow",
    "ArrowField",
    "DualArrows",
    "LatticePath",
    "DoubleWebSample",
    "sample_arrow_field",
    "forward_path",
    "dual_arrows",
    "backward_path",
    "reflected_backward_walk",
    "backward_path_from_envelope",
    "rescale_path",
    "coalesce_time",
    "sample_double_web",
    "evolve_forward",
    "pair_gap_samples",
    "density_count_samples",
]

_RULES = ("iid", "all_plus", "all_minus", "funnel")


@dataclass(frozen=True)
class LatticeWindow:
    """Inclusive integer box x_lo..x_hi, t_lo..t_hi."""

    x_lo: int
    x_hi: int
    t_lo: int
    t_hi: int

    def __post_init__(self):
        if self.x_lo > self.x_hi or self.t_lo > self.t_hi:
            raise ValueError("empty lattice window")

    @property
    def width(self) -> int:
        return self.x_hi - self.x_lo + 1

    @property
    def height(self) -> int:
        return self.t_hi - self.t_lo + 1

    def contains(self, x: int, t: int) -> bool:
        return self.x_lo <= x <= self.x_hi and self.t_lo <= t <= self.t_hi

    def even_xs(self, t: int) -> np.ndarray:
        """All x in the window with (x + t) even, ascending."""
        first = self.x_lo + ((self.x_lo + t) & 1)
        return np.arange(first, self.x_hi + 1, 2)

    def odd_xs(self, t: int) -> np.ndarray:
        first = self.x_lo + 1 - ((self.x_lo + t) & 1)
        return np.arange(first, self.x_hi + 1, 2)


@dataclass(frozen=True)
class ArrowField:
    """One +/-1 arrow per even site, reproducible from (seed, rule).

    ``rule`` selects the arrow law: "iid" fair coins (the model of interest)
    or one of the deterministic fields used as hand-checkable oracles
    ("all_plus", "all_minus", "funnel": +1 left of the origin, -1 otherwise).
    """

    window: LatticeWindow
    seed: int
    rule: str = "iid"

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ValueError(f"unknown arrow rule {self.rule!r}")

    def arrow(self, x, t):
        """Vectorized arrow lookup; sites must be even and inside the window."""
        x = np.asarray(x)
        t = np.asarray(t)
        if np.any((x + t) & 1):
            raise ValueError("arrows live on even sites (x + t even)")
        if self.rule == "iid":
            return arrow_steps(self.seed, x, t)
        if self.rule == "all_plus":
            return np.ones_like(x, dtype=np.int8)
        if self.rule == "all_minus":
            return -np.ones_like(x, dtype=np.int8)
        return np.where(x < 0, 1, -1).astype(np.int8)


def arrow_steps(seed, x, t) -> np.ndarray:
    """+/-1 steps from the counter-based bit stream; broadcasts all arguments."""
    return (2 * rng.coin_bits(seed, x, t) - 1).astype(np.int8)


def sample_arrow_field(window: LatticeWindow, seed: int, rule: str = "iid") -> ArrowField:
    """An i.i.d. fair arrow field on ``window``, deterministic in ``seed``."""
    return ArrowField(window=window, seed=seed, rule=rule)


@dataclass(frozen=True)
class DualArrows:
    """The deterministic backward-arrow assignment induced by a forward field.

    At an odd site (x, t) the dual step is the opposite of the forward arrow
    at (x, t-1): the only backward step across the slab [t-1, t] that does
    not cross the forward segment leaving (x, t-1).
    """

    field: ArrowField

    def arrow(self, x, t):
        x = np.asarray(x)
        t = np.asarray(t)
        if np.any(((x + t) & 1) == 0):
            raise ValueError("dual arrows live on odd sites (x + t odd)")
        if np.any(t - 1 < self.field.window.t_lo):
            raise ValueError("no forward history below the window bottom")
        return (-self.field.arrow(x, t - 1)).astype(np.int8)


def dual_arrows(field: ArrowField) -> DualArrows:
    return DualArrows(field)


@dataclass(frozen=True, eq=False)
class LatticePath:
    """A nearest-neighbour walk on one sublattice.

    Forward paths visit even sites with time increasing; backward paths visit
    odd sites with time decreasing.  ``steps[k]`` is the displacement taken at
    the k-th move, so positions are x0, x0+s1, x0+s1+s2, ...  ``truncated``
    flags a walk stopped early by the window's side edges.
    """

    x0: int
    t0: int
    steps: tuple
    direction: str
    truncated: bool = False
    _positions: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")
        steps = np.asarray(self.steps, dtype=np.int64)
        if steps.size and not np.all(np.abs(steps) == 1):
            raise ValueError("steps must be +/-1")
        pos = np.concatenate([[self.x0], self.x0 + np.cumsum(steps)])
        pos.setflags(write=False)
        object.__setattr__(self, "steps", tuple(int(s) for s in steps))
        object.__setattr__(self, "_positions", pos)

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    @property
    def times(self) -> np.ndarray:
        n = len(self._positions)
        if self.direction == "forward":
            return self.t0 + np.arange(n)
        return self.t0 - np.arange(n)

    @property
    def t_end(self) -> int:
        n = len(self.steps)
        return self.t0 + n if self.direction == "forward" else self.t0 - n

    def position_at(self, t: int) -> int:
        k = t - self.t0 if self.direction == "forward" else self.t0 - t
        if k < 0 or k >= len(self._positions):
            raise ValueError(f"time {t} outside path range")
        return int(self._positions[k])

    def covers(self, t: int) -> bool:
        k = t - self.t0 if self.direction == "forward" else self.t0 - t
        return 0 <= k < len(self._positions)


def _require_parity(window: LatticeWindow, x: int, t: int, want_odd: bool) -> None:
    if not window.contains(x, t):
        raise ValueError(f"site ({x}, {t}) outside window")
    if ((x + t) & 1) != int(want_odd):
        kind = "odd" if want_odd else "even"
        raise ValueError(f"site ({x}, {t}) has wrong parity (need {kind})")


def forward_path(field: ArrowField, start: tuple[int, int]) -> LatticePath:
    """Follow forward arrows from an even site up to the window top.

    Two forward paths agree from their first meeting onward because they read
    the same arrows.
    """
    x, t = int(start[0]), int(start[1])
    w = field.window
    _require_parity(w, x, t, want_odd=False)
    steps = []
    truncated = False
    while t < w.t_hi:
        s = int(field.arrow(x, t))
        if not (w.x_lo <= x + s <= w.x_hi):
            truncated = True
            break
        steps.append(s)
        x += s
        t += 1
    return LatticePath(int(start[0]), int(start[1]), tuple(steps), "forward", truncated)


def backward_path(field: ArrowField, start: tuple[int, int]) -> LatticePath:
    """Follow dual arrows from an odd site down to the window bottom."""
    x, t = int(start[0]), int(start[1])
    w = field.window
    _require_parity(w, x, t, want_odd=True)
    dual = DualArrows(field)
    steps = []
    truncated = False
    while t > w.t_lo:
        s = int(dual.arrow(x, t))
        if not (w.x_lo <= x + s <= w.x_hi):
            truncated = True
            break
        steps.append(s)
        x += s
        t -= 1
    return LatticePath(int(start[0]), int(start[1]), tuple(steps), "backward", truncated)


def _occupancy(paths, direction: str) -> dict:
    """Map (x, t) -> outgoing step for every site where a path moves on."""
    occ: dict = {}
    for p in paths:
        if p.direction != direction:
            raise ValueError(f"expected {direction} paths")
        pos = p.positions
        tim = p.times
        for k in range(len(p.steps)):
            key = (int(pos[k]), int(tim[k]))
            step = p.steps[k]
            if key in occ and occ[key] != step:
                raise AssertionError(
                    f"inconsistent obstacle set: two steps leave site {key}"
                )
            occ[key] = step
    return occ


def reflected_backward_walk(
    noise: LatticePath,
    obstacles,
    priors=(),
    window: LatticeWindow | None = None,
) -> LatticePath:
    """Run a backward walk off independent noise, reflected by forward paths.

    The walk takes its own +/-1 noise increments except that any step that
    would cross a forward obstacle is replaced by the opposite step, and the
    walk follows the first prior backward path it meets forever.  A reflected
    step can never cross a second obstacle on this lattice (all obstacle
    paths through the blocking site share one arrow); that branch raises
    rather than guessing.
    """
    if noise.direction != "backward":
        raise ValueError("noise walk must be backward")
    if (noise.x0 + noise.t0) % 2 == 0:
        raise ValueError("noise walk must start on an odd site")
    obstacle_step = _occupancy(obstacles, "forward")
    prior_at: dict = {}
    for idx, p in enumerate(priors):
        if p.direction != "backward":
            raise ValueError("priors must be backward paths")
        for k, (x, t) in enumerate(zip(p.positions, p.times)):
            prior_at.setdefault((int(x), int(t)), (idx, k))

    x, t = noise.x0, noise.t0
    x_lo = window.x_lo if window is not None else None
    x_hi = window.x_hi if window is not None else None
    priors = list(priors)
    out_steps: list[int] = []
    truncated = False
    for k in range(len(noise.steps)):
        hit = prior_at.get((x, t))
        if hit is not None:
            idx, k0 = hit
            out_steps.extend(priors[idx].steps[k0:])
            return LatticePath(
                noise.x0, noise.t0, tuple(out_steps), "backward", priors[idx].truncated
            )
        s = noise.steps[k]
        blocked = obstacle_step.get((x, t - 1))
        if blocked is not None and blocked == s:
            s = -s
            if obstacle_step.get((x, t - 1)) == s:  # unreachable by parity
                raise AssertionError("both backward steps blocked at one site")
        if x_lo is not None and not (x_lo <= x + s <= x_hi):
            truncated = True
            break
        out_steps.append(s)
        x += s
        t -= 1
    return LatticePath(noise.x0, noise.t0, tuple(out_steps), "backward", truncated)


def backward_path_from_envelope(field: ArrowField, target: tuple[int, int]) -> LatticePath:
    """Recover the dual path from the forward web alone.

    At every level below the target, even sites split into those whose
    forward path lands left of the target position at the target time and
    those landing right (parity rules out ties).  Noncrossing makes the split
    an interface; the odd site sitting on the interface at each level is
    exactly where the dual path from the target passes.  Computed with a
    single downward landing-map sweep, O(width x height).
    """
    x0, t0 = int(target[0]), int(target[1])
    w = field.window
    _require_parity(w, x0, t0, want_odd=True)
    if t0 == w.t_lo:
        raise ValueError("target on the window bottom has no history")

    big = np.int64(1) << 40
    xs = w.even_xs(t0)
    landing = xs.astype(np.int64)  # forward landing at time t0, by start site
    positions = [x0]
    x_cur = x0
    truncated = False
    for t in range(t0 - 1, w.t_lo - 1, -1):
        xs = w.even_xs(t)
        arrows = field.arrow(xs, t).astype(np.int64)
        dest = xs + arrows
        idx = (dest - w.even_xs(t + 1)[0]) // 2
        prev = landing
        landing = np.empty(len(xs), dtype=np.int64)
        inside = (dest >= w.x_lo) & (dest <= w.x_hi)
        landing[~inside & (arrows < 0)] = -big
        landing[~inside & (arrows > 0)] = big
        landing[inside] = prev[idx[inside]]
        if np.any(np.diff(landing) < 0):
            raise AssertionError("forward landings lost monotonicity")
        # rightmost even start landing left of the target
        k = int(np.searchsorted(landing, x0))
        if k == 0 or k == len(xs):
            truncated = True
            break
        left, right = xs[k - 1], xs[k]
        if right - left != 2:
            raise AssertionError("interface not bracketed by adjacent sites")
        x_new = int(left + 1)
        if abs(x_new - x_cur) != 1:
            raise AssertionError("envelope interface moved by more than one step")
        positions.append(x_new)
        x_cur = x_new
    steps = tuple(int(b - a) for a, b in zip(positions[:-1], positions[1:]))
    return LatticePath(x0, t0, steps, "backward", truncated)


def rescale_path(path: LatticePath, delta: float):
    """Diffusive rescaling: space x delta, time x delta^2, into a semipath."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    d2 = delta * delta
    pos = path.positions * float(delta)
    if path.direction == "forward":
        times = (path.t0 + np.arange(len(pos))) * d2
        return ForwardSemipath(path.t0 * d2, times, pos)
    times = (path.t0 - np.arange(len(pos))) * d2
    return BackwardSemipath(path.t0 * d2, times[::-1].copy(), pos[::-1].copy())


def coalesce_time(field: ArrowField, x1: int, x2: int, t0: int):
    """First time two forward walks share a site, or None inside the window."""
    w = field.window
    _require_parity(w, x1, t0, want_odd=False)
    _require_parity(w, x2, t0, want_odd=False)
    if x1 == x2:
        return t0
    t = t0
    a, b = int(x1), int(x2)
    while t < w.t_hi:
        a += int(field.arrow(a, t))
        b += int(field.arrow(b, t))
        t += 1
        if not (w.x_lo <= a <= w.x_hi and w.x_lo <= b <= w.x_hi):
            return None
        if a == b:
            return t
    return None


@dataclass(frozen=True, eq=False)
class DoubleWebSample:
    """A forward web and its deterministic dual, traced from sampled starts."""

    field: ArrowField
    forward_paths: tuple
    dual_paths: tuple


def sample_double_web(
    window: LatticeWindow, seed: int, n_paths: int = 8, rule: str = "iid"
) -> DoubleWebSample:
    """Trace ``n_paths`` forward walks from the bottom half and as many dual
    walks from the top half, at seeded random sites."""
    if n_paths <= 0:
        raise ValueError("need at least one path")
    fld = sample_arrow_field(window, seed, rule)
    g = rng.generator(seed, 0xD0)
    fwd = []
    for _ in range(n_paths):
        t = int(g.integers(window.t_lo, window.t_lo + max(1, window.height // 3)))
        xs = window.even_xs(t)
        fwd.append(forward_path(fld, (int(g.choice(xs)), t)))
    dual = []
    for _ in range(n_paths):
        t = int(g.integers(window.t_hi - max(1, window.height // 3), window.t_hi))
        if t == window.t_lo:
            t += 1
        xs = window.odd_xs(t)
        dual.append(backward_path(fld, (int(g.choice(xs)), t)))
    return DoubleWebSample(fld, tuple(fwd), tuple(dual))


# ---------------------------------------------------------------------------
# batched tracing for Monte Carlo experiments
# ---------------------------------------------------------------------------


def evolve_forward(seeds, xs, t0: int, n_steps: int, keep=None):
    """Evolve forward walkers in lockstep under per-walker seeds.

    ``seeds`` and ``xs`` broadcast; walkers sharing a seed share a field and
    therefore coalesce on meeting.  Returns the positions after each of the
    requested checkpoint steps (``keep``, default: final positions only).
    No window truncation is applied; callers size their windows so walks
    cannot reach the edges.
    """
    xs = np.array(np.broadcast_arrays(np.asarray(seeds), np.asarray(xs))[1], dtype=np.int64)
    seeds = np.broadcast_to(np.asarray(seeds), xs.shape)
    keep = {n_steps} if keep is None else set(keep)
    out = {}
    if 0 in keep:
        out[0] = xs.copy()
    for k in range(1, n_steps + 1):
        xs = xs + arrow_steps(seeds, xs, t0 + k - 1)
        if k in keep:
            out[k] = xs.copy()
    return out


def pair_gap_samples(
    delta: float, d: float, t: float, replicas: int, seed: int, rule: str = "iid"
) -> np.ndarray:
    """Rescaled gaps |X2 - X1| at time ``t`` of coalescing walk pairs started
    ``d`` apart, one independent field per replica.

    The lattice gap is d/delta rounded to the nearest even integer and the
    horizon is t/delta^2 steps, so the rescaled pair targets unit-diffusion
    coalescing motions started at distance d.  A zero gap is exact lattice
    coalescence.
    """
    if replicas <= 0:
        raise ValueError("replicas must be positive")
    g0 = 2 * max(1, round(d / delta / 2.0))
    n_steps = max(1, round(t / (delta * delta)))
    seeds = np.array([rng.derive(seed, r) for r in range(replicas)], dtype=np.int64)
    x1 = np.zeros(replicas, dtype=np.int64)
    x2 = np.full(replicas, g0, dtype=np.int64)
    for k in range(n_steps):
        x1 = x1 + arrow_steps(seeds, x1, k)
        x2 = x2 + arrow_steps(seeds, x2, k)
    return np.abs(x2 - x1) * float(delta)


def density_count_samples(
    delta: float,
    t: float,
    replicas: int,
    seed: int,
    count_half_width: int = 400,
) -> tuple[np.ndarray, float]:
    """Distinct-survivor counts for the everywhere-started web.

    Walkers start from every even site of a padded interval; after t/delta^2
    steps the distinct positions inside the central window are counted.  The
    padding equals the horizon, so edge starts cannot influence the count and
    the windowed point process matches the infinite-lattice web exactly.
    Returns (counts per replica, rescaled window length).
    """
    n_steps = max(1, round(t / (delta * delta)))
    pad = n_steps + 2
    lo, hi = -count_half_width - pad, count_half_width + pad
    counts = np.empty(replicas, dtype=np.int64)
    for r in range(replicas):
        s = rng.derive(seed, r)
        xs = np.arange(lo + (lo & 1), hi + 1, 2, dtype=np.int64)
        xs = evolve_forward(s, xs, 0, n_steps)[n_steps]
        inside = xs[(xs >= -count_half_width) & (xs < count_half_width)]
        counts[r] = len(np.unique(inside))
    return counts, 2.0 * count_half_width * float(delta)
