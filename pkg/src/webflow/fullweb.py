"""Bi-infinite web constructions over a discrete double web.

Two routes produce the same finite approximation of the full (bi-infinite)
web and are checked against each other:

* ``build_skeleton``      -- for each seed point, splice the backward walk
                             from just below the snapped site onto the
                             forward walk from the site (first construction);
* ``splice_construction`` -- read a per-site splice configuration off the
                             double web and enumerate the admissible
                             splicings there (second construction).

On the parity-split lattice every even site emits exactly one forward walk,
so a seed point contributes a single spliced path and richer point types
(bifurcations, multi-strand merges) only emerge under diffusive rescaling.
``splice_count`` / ``enumerate_splices`` implement the general census for a
classified point type, including the one exclusion at (1, 2) points: the
unique splicing that would cross the forward path passing through the point
is dropped.  ``classify_point`` estimates a type for a concrete space-time
point from walk censuses around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discreteweb import (
    ArrowField,
    DoubleWebSample,
    LatticeWindow,
    backward_path,
    forward_path,
    rescale_path,
)
from .pathspace import (
    BackwardSemipath,
    ForwardSemipath,
    FullPath,
    PathSet,
    SpaceTimePoint,
    hausdorff_distance,
    paths_cross,
    splice,
)

__all__ = [
    "PointType",
    "SpliceConfig",
    "FullWebSample",
    "ALLOWED_POINT_TYPES",
    "splice_count",
    "continuation_count",
    "enumerate_splices",
    "snap_to_lattice",
    "build_skeleton",
    "splice_construction",
    "construction_distance",
    "estimate_point_counts",
    "classify_point",
    "forward_full",
    "find_expansion_wedge",
]

# the six admissible (incoming, outgoing) strand counts at a double-web point
ALLOWED_POINT_TYPES = frozenset({(0, 1), (1, 1), (0, 2), (1, 2), (2, 1), (0, 3)})


@dataclass(frozen=True)
class PointType:
    """Strand counts (m_in, m_out) at a space-time point of the double web."""

    m_in: int
    m_out: int

    def __post_init__(self):
        if (self.m_in, self.m_out) not in ALLOWED_POINT_TYPES:
            raise ValueError(
                f"({self.m_in}, {self.m_out}) is not an admissible point type"
            )

    @property
    def pair(self) -> tuple[int, int]:
        return (self.m_in, self.m_out)


def splice_count(ptype: PointType) -> int:
    """Number of full paths spliced at a point of the given type.

    (m_in + 1) * m_out pairings, except that a (1, 2) point loses the single
    pairing that would cross the through path, leaving 3.
    """
    if ptype.pair == (1, 2):
        return 3
    return (ptype.m_in + 1) * ptype.m_out


def continuation_count(ptype: PointType, passing_through: bool) -> int:
    """Local continuation census for a backward strand arriving at a point.

    A strand that is *not* part of a backward path passing through the point
    must splice into the unique admissible forward path (1 choice); that
    situation only arises when m_out = 1 or at a (1, 2) point.  A strand that
    is part of a passing backward path may splice into any of the m_out
    forward paths or continue backward along any of the other m_out - 1
    backward branches: 2 * m_out - 1 choices.
    """
    if not passing_through:
        if ptype.m_out != 1 and ptype.pair != (1, 2):
            raise ValueError(
                "a non-passing arrival requires m_out = 1 or type (1, 2)"
            )
        return 1
    return 2 * ptype.m_out - 1


@dataclass(frozen=True, eq=False)
class SpliceConfig:
    """Candidate strands at one splice point.

    ``forward_candidates`` start at the point (m_out of them) and
    ``backward_candidates`` end there (m_in + 1 of them).  For a (1, 2)
    point the exclusion rule needs the forward path passing *through* the
    point, which is not recoverable from the candidates alone (the side on
    which the incoming strand continues is extra web data), so ``incoming``
    must then be supplied: a forward semipath starting strictly below the
    point, passing through it, and following one of the forward candidates
    above it.
    """

    point: SpaceTimePoint
    ptype: PointType
    forward_candidates: tuple
    backward_candidates: tuple
    incoming: ForwardSemipath | None = None

    def __post_init__(self):
        object.__setattr__(self, "forward_candidates", tuple(self.forward_candidates))
        object.__setattr__(self, "backward_candidates", tuple(self.backward_candidates))
        fc, bc = self.forward_candidates, self.backward_candidates
        if len(fc) != self.ptype.m_out:
            raise ValueError("forward candidate count must equal m_out")
        if len(bc) != self.ptype.m_in + 1:
            raise ValueError("backward candidate count must equal m_in + 1")
        for f in fc:
            if not isinstance(f, ForwardSemipath) or f.t0 != self.point.t:
                raise ValueError("forward candidates must start at the point")
            if f.values[0] != self.point.x:
                raise ValueError("forward candidates must start at the point")
        for g in bc:
            if not isinstance(g, BackwardSemipath) or g.t0 != self.point.t:
                raise ValueError("backward candidates must end at the point")
            if g.values[-1] != self.point.x:
                raise ValueError("backward candidates must end at the point")
        for group in (fc, bc):
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    if paths_cross(group[i], group[j]):
                        raise ValueError("candidates must be pairwise noncrossing")
        if self.ptype.pair == (1, 2):
            if self.incoming is None:
                raise ValueError("a (1, 2) configuration needs the incoming strand")
            inc = self.incoming
            if inc.t0 >= self.point.t:
                raise ValueError("incoming strand must start below the point")
            if float(inc.value_at(self.point.t)) != self.point.x:
                raise ValueError("incoming strand must pass through the point")
            if not any(
                np.array_equal(inc.value_at(f.times), f.values) for f in fc
            ):
                raise ValueError(
                    "incoming strand must continue along a forward candidate"
                )


def enumerate_splices(cfg: SpliceConfig) -> list[FullPath]:
    """All admissible splicings at a configured point.

    Every (forward, backward) candidate pair is spliced; at a (1, 2) point
    the unique pair whose spliced path crosses the passing forward strand is
    excluded.  The result length always equals ``splice_count(cfg.ptype)``.
    """
    t_star = cfg.point.t
    out = []
    excluded = 0
    for f in cfg.forward_candidates:
        for g in cfg.backward_candidates:
            full = splice(f, g, t_star)
            if cfg.ptype.pair == (1, 2) and paths_cross(full, cfg.incoming):
                excluded += 1
                continue
            out.append(full)
    if cfg.ptype.pair == (1, 2) and excluded != 1:
        raise ValueError(
            f"(1, 2) exclusion matched {excluded} pairs, expected exactly 1; "
            "candidates are inconsistent with the declared type"
        )
    if len(out) != splice_count(cfg.ptype):
        raise ValueError("splice enumeration disagrees with the counting rule")
    return out


# ---------------------------------------------------------------------------
# snapping and the two constructions
# ---------------------------------------------------------------------------


def _half_down(v: float) -> int:
    # nearest integer, ties toward -infinity
    return int(math.ceil(v - 0.5))


def snap_to_lattice(p: SpaceTimePoint, delta: float) -> tuple[int, int]:
    """Nearest even lattice site to a desk-scale point; ties break toward -inf."""
    t_lat = _half_down(p.t / (delta * delta))
    v = p.x / delta
    base = _half_down(v)
    if (base + t_lat) % 2 == 0:
        return base, t_lat
    lo, hi = base - 1, base + 1
    if abs(v - lo) <= abs(v - hi):
        return lo, t_lat
    return hi, t_lat


def _bridged_backward(field: ArrowField, x_e: int, t_lat: int, delta: float) -> BackwardSemipath:
    """Backward semipath anchored at (x_e, t_lat): the dual walk from the odd
    site one level below, plus a constant half-cell bridge up to the anchor."""
    d2 = delta * delta
    w = field.window
    if t_lat - 1 < w.t_lo:
        return BackwardSemipath(t_lat * d2, [t_lat * d2], [x_e * delta])
    walk = backward_path(field, (x_e, t_lat - 1))
    if walk.truncated:
        raise ValueError("backward walk left the window; enlarge the margins")
    base = rescale_path(walk, delta)
    times = np.concatenate([base.times, [t_lat * d2]])
    values = np.concatenate([base.values, [x_e * delta]])
    return BackwardSemipath(t_lat * d2, times, values)


def _site_full_path(field: ArrowField, x_e: int, t_lat: int, delta: float) -> FullPath:
    fwd_walk = forward_path(field, (x_e, t_lat))
    if fwd_walk.truncated:
        raise ValueError("forward walk left the window; enlarge the margins")
    fwd = rescale_path(fwd_walk, delta)
    bwd = _bridged_backward(field, x_e, t_lat, delta)
    return splice(fwd, bwd, t_lat * (delta * delta))


def _desk_window(w: LatticeWindow, delta: float) -> tuple:
    d2 = delta * delta
    return (w.t_lo * d2, w.t_hi * d2, w.x_lo * delta, w.x_hi * delta)


def _site_incoming_count(field: ArrowField, x_e: int, t_lat: int) -> int:
    """Arrows pointing into an even site from the level below (0, 1 or 2)."""
    w = field.window
    if t_lat - 1 < w.t_lo:
        return 0
    count = 0
    for s in (1, -1):
        src = x_e - s
        if w.contains(src, t_lat - 1) and int(field.arrow(src, t_lat - 1)) == s:
            count += 1
    return count


@dataclass(frozen=True, eq=False)
class FullWebSample:
    """A finite full-web approximation plus its provenance.

    ``splice_sites`` records (x, t, m_in, m_out) per retained seed site,
    where m_in is the literal incoming-arrow count of the site and m_out is
    1, the lattice's one-arrow-per-site attribute.
    """

    paths: PathSet
    construction: str
    source: DoubleWebSample
    d_points: tuple
    delta: float
    splice_sites: tuple

    def __post_init__(self):
        if self.construction not in ("skeleton", "splice_enum"):
            raise ValueError("construction must be 'skeleton' or 'splice_enum'")


def _snap_points(field: ArrowField, points, delta: float):
    sites = []
    seen = set()
    for p in points:
        if not isinstance(p, SpaceTimePoint):
            p = SpaceTimePoint(float(p[0]), float(p[1]))
        site = snap_to_lattice(p, delta)
        if not field.window.contains(*site):
            raise ValueError(f"seed point {p} snaps outside the window")
        if site not in seen:
            seen.add(site)
            sites.append(site)
    return sites


def build_skeleton(dw: DoubleWebSample, d_points, delta: float) -> FullWebSample:
    """First construction: one spliced path per snapped seed point.

    Seed points snap to the nearest even site; duplicates collapse.  The
    backward component starts one level below the site and is joined by a
    constant half-cell bridge, which keeps the splice exact on the
    parity-split lattice at the cost of one lattice cell of distortion.
    """
    sites = _snap_points(dw.field, d_points, delta)
    if not sites:
        raise ValueError("no seed points supplied")
    members, meta = [], []
    for x_e, t_lat in sites:
        members.append(_site_full_path(dw.field, x_e, t_lat, delta))
        meta.append((x_e, t_lat, _site_incoming_count(dw.field, x_e, t_lat), 1))
    return FullWebSample(
        paths=PathSet(tuple(members), _desk_window(dw.field.window, delta)),
        construction="skeleton",
        source=dw,
        d_points=tuple(sites),
        delta=delta,
        splice_sites=tuple(meta),
    )


def splice_construction(dw: DoubleWebSample, mesh_points, delta: float) -> FullWebSample:
    """Second construction: enumerate splicings site by site.

    Snapped mesh sites are generic under rescaling, so each is read as a
    (0, 1) configuration: the site's forward walk against the bridged dual
    walk from below, enumerated through the general splice machinery.
    """
    sites = _snap_points(dw.field, mesh_points, delta)
    if not sites:
        raise ValueError("no mesh points supplied")
    d2 = delta * delta
    members, meta = [], []
    for x_e, t_lat in sites:
        fwd_walk = forward_path(dw.field, (x_e, t_lat))
        if fwd_walk.truncated:
            raise ValueError("forward walk left the window; enlarge the margins")
        cfg = SpliceConfig(
            point=SpaceTimePoint(x_e * delta, t_lat * d2),
            ptype=PointType(0, 1),
            forward_candidates=(rescale_path(fwd_walk, delta),),
            backward_candidates=(_bridged_backward(dw.field, x_e, t_lat, delta),),
        )
        members.extend(enumerate_splices(cfg))
        meta.append((x_e, t_lat, _site_incoming_count(dw.field, x_e, t_lat), 1))
    return FullWebSample(
        paths=PathSet(tuple(members), _desk_window(dw.field.window, delta)),
        construction="splice_enum",
        source=dw,
        d_points=tuple(sites),
        delta=delta,
        splice_sites=tuple(meta),
    )


def construction_distance(dw: DoubleWebSample, d_points, mesh_points, delta: float) -> float:
    """Hausdorff distance between the skeleton-built and splice-enumerated
    webs over the same double web; small when both point sets are fine."""
    skel = build_skeleton(dw, d_points, delta)
    enum = splice_construction(dw, mesh_points, delta)
    return hausdorff_distance(skel.paths, enum.paths)


# ---------------------------------------------------------------------------
# point-type estimation
# ---------------------------------------------------------------------------


def _cluster_count(positions: np.ndarray, gap: float = 2.0) -> int:
    """Strand positions separated by more than ``gap`` count as distinct."""
    if len(positions) == 0:
        return 0
    u = np.unique(positions)
    return int(1 + np.sum(np.diff(u) > gap))


def estimate_point_counts(
    dw: DoubleWebSample, p: SpaceTimePoint, eps: float = 8.0
) -> tuple[int, int]:
    """Raw (m_in, m_out) estimates for a lattice-scale point.

    m_out: strands of the sample's forward web within ``eps`` of the point
    are followed eps^2 further steps; surviving clusters (separation > 2)
    count as distinct outgoing paths.  m_in: a fresh mesh of walks launched
    2 eps^2 steps below is filtered to those passing within lattice distance
    1 of the point; walkers that have already merged one step before the
    target time form a single strand, and the surviving strands' positions
    eps^2 steps below the point are clustered.  A pure estimator: exact
    types only emerge as delta -> 0.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    w = dw.field.window
    x_p, t_p = int(round(p.x)), int(round(p.t))
    k = max(1, int(round(eps * eps)))
    if t_p + k > w.t_hi or t_p - 2 * k < w.t_lo:
        raise ValueError("eps-neighbourhood leaves the window")
    if not (w.x_lo + eps <= x_p <= w.x_hi - eps):
        raise ValueError("eps-neighbourhood leaves the window")

    # outgoing census from the sample's own long-lived strands
    later = []
    for path in dw.forward_paths:
        if path.covers(t_p) and path.covers(t_p + k):
            if abs(path.position_at(t_p) - x_p) <= eps:
                later.append(path.position_at(t_p + k))
    m_out = _cluster_count(np.asarray(later)) if later else 1

    # incoming census from a fresh mesh two eps^2-windows below
    pad = 2 * k + 2
    lo = max(w.x_lo, x_p - pad)
    hi = min(w.x_hi, x_p + pad)
    t_m = t_p - 2 * k
    first = lo + ((lo + t_m) & 1)
    xs = np.arange(first, hi + 1, 2, dtype=np.int64)
    snaps = _evolve_rule(dw.field, xs, t_m, 2 * k, {k, 2 * k - 1, 2 * k})
    sel = np.abs(snaps[2 * k] - x_p) <= 1
    if not np.any(sel):
        return 0, max(1, m_out)
    just_before = snaps[2 * k - 1][sel]  # strand identity right before t_p
    before = snaps[k][sel]
    reps = [before[just_before == key].min() for key in np.unique(just_before)]
    m_in = _cluster_count(np.asarray(reps))
    return m_in, max(1, m_out)


def _evolve_rule(field: ArrowField, xs: np.ndarray, t0: int, n_steps: int, keep):
    # deterministic-rule twin of evolve_forward for the oracle fields
    xs = xs.astype(np.int64).copy()
    out = {}
    for k in range(1, n_steps + 1):
        xs = xs + field.arrow(xs, t0 + k - 1).astype(np.int64)
        if k in keep:
            out[k] = xs.copy()
    return out


def classify_point(dw: DoubleWebSample, p: SpaceTimePoint, eps: float = 8.0) -> PointType:
    """Estimated point type; raises if the estimate falls outside the
    admissible taxonomy (an estimator failure, not a web property)."""
    m_in, m_out = estimate_point_counts(dw, p, eps)
    return PointType(m_in, m_out)


# ---------------------------------------------------------------------------
# forward projection
# ---------------------------------------------------------------------------


def forward_full(sample: FullWebSample, cut_times) -> PathSet:
    """All forward semipaths obtained by cutting the web's paths.

    For each path and each cut time the semipath from (path(t), t) onward is
    emitted; identical semipaths are deduplicated.  Contains the forward web
    itself (cuts at splice times) and, at expansion wedges, semipaths absent
    from it.
    """
    t_lo, t_hi = sample.paths.window[0], sample.paths.window[1]
    cuts = [float(t) for t in cut_times]
    for t in cuts:
        if not (t_lo <= t <= t_hi):
            raise ValueError(f"cut time {t} outside the window")
    seen = {}
    for path in sample.paths:
        if path.trivial != "none":
            continue
        knots = path.knot_times()
        for t in cuts:
            sel = knots[knots > t]
            times = np.concatenate([[t], sel])
            values = path.value_at(times)
            semi = ForwardSemipath(t, times, values)
            seen.setdefault(semi.knot_key(), semi)
    return PathSet(tuple(seen.values()), sample.paths.window)


# ---------------------------------------------------------------------------
# expansion wedges (the discrete bifurcation scenario)
# ---------------------------------------------------------------------------


def find_expansion_wedge(
    field: ArrowField,
    probe_level: int,
    rise: int,
    min_width: int,
    min_pinch_level: int,
):
    """Locate a wedge: two dual strands that have coalesced at a pinch site
    while standing at least ``min_width`` apart ``rise`` levels higher.

    Dual strands are traced down from every odd site at ``probe_level``.
    Returns (pinch site (z, s), left bound, right bound, level s + rise) for
    the widest detected wedge, or None.  Between the bounds, forward motion
    is confined: the wedge is the discrete picture of an expansion point,
    and full-web paths cut at the pinch ride its interior.
    """
    w = field.window
    if probe_level - rise <= min_pinch_level:
        raise ValueError("probe level too low for the requested rise")
    depth = probe_level - w.t_lo
    xs = w.odd_xs(probe_level).astype(np.int64)
    xs = xs[(xs >= w.x_lo + depth) & (xs <= w.x_hi - depth)]  # cannot escape
    if len(xs) < 2:
        raise ValueError("window too narrow for the probe depth")
    n_levels = depth + 1
    pos = np.empty((n_levels, len(xs)), dtype=np.int64)
    pos[0] = xs
    cur = xs.copy()
    for i, t in enumerate(range(probe_level, w.t_lo, -1)):
        cur = cur - field.arrow(cur, t - 1).astype(np.int64)
        pos[i + 1] = cur
    best = None
    for j in range(len(xs) - 1):
        gap = pos[:, j + 1] - pos[:, j]
        merged = np.nonzero(gap == 0)[0]
        if not len(merged):
            continue
        i_meet = int(merged[0])
        s = probe_level - i_meet
        if s < min_pinch_level or i_meet < rise:
            continue
        width = int(gap[i_meet - rise])
        if width < min_width:
            continue
        if best is None or width > best[0]:
            z = int(pos[i_meet, j])
            b_l = int(pos[i_meet - rise, j])
            b_r = int(pos[i_meet - rise, j + 1])
            best = (width, (z, s), b_l, b_r, s + rise)
    if best is None:
        return None
    return best[1], best[2], best[3], best[4]
