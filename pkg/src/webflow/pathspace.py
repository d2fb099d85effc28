"""Compactified space-time geometry and metrics on piecewise-linear paths.

Space-time points (x, t) live on the extended plane (both coordinates may be
+/-inf) and are compared through the compactification

    (x, t)  ->  (tanh(x) / (1 + |t|), tanh(t)),

under which the whole plane becomes a bounded set and trajectories that drift
to +/-inf in space or time stay comparable.  All distances in the package are
sup-distances between compactified trajectories:

* ``point_distance``     -- sup-metric between two compactified points;
* ``path_distance``      -- sup over time of the compactified space gap,
                            for bi-infinite full paths or forward semipaths;
* ``hausdorff_distance`` -- induced two-sided Hausdorff distance between
                            finite path sets.

Paths are represented by knots on a finite time window and interpolated
linearly.  Beyond the window a path continues with its compactified space
coordinate frozen at the window edge, so the windowed supremum equals the
supremum of the extended path; the truncation error relative to continuing
the raw space value constantly is bounded by 2 / (1 + T_hi) and callers pick
windows wide enough to make it irrelevant.

All types are immutable after construction and every operation is a pure
function, so everything here is safe to call concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpaceTimePoint",
    "CompactCoords",
    "ForwardSemipath",
    "BackwardSemipath",
    "FullPath",
    "PathSet",
    "space_coord",
    "time_coord",
    "compactify",
    "point_distance",
    "path_distance",
    "hausdorff_distance",
    "splice",
    "paths_cross",
    "crossing_scan",
    "eval_path",
    "path_set_to_json",
    "path_set_from_json",
]


def space_coord(x, t):
    """Compactified space coordinate tanh(x) / (1 + |t|); tanh(+/-inf) = +/-1."""
    return np.tanh(x) / (1.0 + np.abs(t))


def time_coord(t):
    """Compactified time coordinate tanh(t)."""
    return np.tanh(t)


@dataclass(frozen=True)
class SpaceTimePoint:
    """A point of the extended space-time plane; +/-inf is legal, NaN is not."""

    x: float
    t: float

    def __post_init__(self):
        if math.isnan(self.x) or math.isnan(self.t):
            raise ValueError("space-time coordinates must not be NaN")


@dataclass(frozen=True)
class CompactCoords:
    """Image of a space-time point under the compactification; |u|,|v| <= 1."""

    u: float
    v: float


def compactify(p: SpaceTimePoint) -> CompactCoords:
    """Map a point to its compactified coordinates."""
    return CompactCoords(float(space_coord(p.x, p.t)), float(time_coord(p.t)))


def point_distance(p1: SpaceTimePoint, p2: SpaceTimePoint) -> float:
    """Sup-metric between compactified points.

    Zero exactly when the two points agree in compactified coordinates, so
    e.g. (+inf, 0) and (-inf, 0) are at distance 2 while (+inf, s) and
    (+inf, t) for finite s != t are close but distinct.
    """
    a, b = compactify(p1), compactify(p2)
    return max(abs(a.u - b.u), abs(a.v - b.v))


def _validate_knots(times: np.ndarray, values: np.ndarray) -> None:
    if times.ndim != 1 or values.ndim != 1 or len(times) != len(values):
        raise ValueError("knot times and values must be 1-d and equally long")
    if len(times) == 0:
        raise ValueError("a semipath needs at least one knot")
    if np.any(np.isnan(times)) or np.any(np.isnan(values)):
        raise ValueError("knots must not contain NaN")
    if not np.all(np.isfinite(times)):
        raise ValueError("knot times must be finite")
    if len(times) > 1 and not np.all(np.diff(times) > 0):
        raise ValueError("knot times must be strictly increasing")


def _freeze(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ForwardSemipath:
    """A forward trajectory from start time ``t0``, piecewise-linear on its knots.

    ``times[0] == max(t0, window floor)``; evaluation outside the knot range
    clamps to the endpoint values (constant continuation).
    """

    t0: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _freeze(self.times))
        object.__setattr__(self, "values", _freeze(self.values))
        _validate_knots(self.times, self.values)
        if math.isnan(self.t0):
            raise ValueError("t0 must not be NaN")
        if self.t0 > self.times[0]:
            raise ValueError("first knot must not precede t0")

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def value_at(self, t):
        return np.interp(t, self.times, self.values)

    def knot_key(self):
        return (self.t0, self.times.tobytes(), self.values.tobytes())


@dataclass(frozen=True, eq=False)
class BackwardSemipath:
    """A backward trajectory ending at time ``t0``; knots increase up to it."""

    t0: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _freeze(self.times))
        object.__setattr__(self, "values", _freeze(self.values))
        _validate_knots(self.times, self.values)
        if math.isnan(self.t0):
            raise ValueError("t0 must not be NaN")
        if self.t0 < self.times[-1]:
            raise ValueError("last knot must not exceed t0")

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def value_at(self, t):
        return np.interp(t, self.times, self.values)

    def knot_key(self):
        return (self.t0, self.times.tobytes(), self.values.tobytes())


_TRIVIAL_FLAGS = ("none", "plus", "minus")


@dataclass(frozen=True, eq=False)
class FullPath:
    """A bi-infinite trajectory: a backward and a forward semipath spliced
    at ``splice_t`` with exactly equal values there.

    ``trivial`` marks the two constant +/-inf paths, whose splice point is
    conventional rather than unique.
    """

    forward: ForwardSemipath
    backward: BackwardSemipath
    splice_t: float
    trivial: str = "none"

    def __post_init__(self):
        if self.trivial not in _TRIVIAL_FLAGS:
            raise ValueError(f"bad trivial flag {self.trivial!r}")
        if self.trivial != "none":
            return
        if not (self.forward.t0 == self.backward.t0 == self.splice_t):
            raise ValueError("forward, backward and splice times disagree")
        if self.forward.times[0] != self.splice_t:
            raise ValueError("forward component must start at the splice time")
        if self.backward.times[-1] != self.splice_t:
            raise ValueError("backward component must end at the splice time")
        if self.forward.values[0] != self.backward.values[-1]:
            raise ValueError(
                "splice mismatch: forward and backward values differ at the "
                "splice time (caller bug, values must be shared exactly)"
            )

    @classmethod
    def trivial_path(cls, sign: str, window) -> "FullPath":
        """The identically +inf ('plus') or -inf ('minus') path on a window."""
        if sign not in ("plus", "minus"):
            raise ValueError("sign must be 'plus' or 'minus'")
        t_lo, t_hi = float(window[0]), float(window[1])
        v = math.inf if sign == "plus" else -math.inf
        fwd = ForwardSemipath(0.0, [0.0, t_hi], [v, v])
        bwd = BackwardSemipath(0.0, [t_lo, 0.0], [v, v])
        obj = cls.__new__(cls)
        object.__setattr__(obj, "forward", fwd)
        object.__setattr__(obj, "backward", bwd)
        object.__setattr__(obj, "splice_t", 0.0)
        object.__setattr__(obj, "trivial", sign)
        return obj

    @property
    def t_start(self) -> float:
        return self.backward.t_start

    @property
    def t_end(self) -> float:
        return self.forward.t_end

    @property
    def trivial_value(self) -> float:
        return math.inf if self.trivial == "plus" else -math.inf

    def value_at(self, t):
        """Space value at time t; at the splice time both sides agree."""
        if self.trivial != "none":
            return np.full_like(np.asarray(t, dtype=float), self.trivial_value)
        t_arr = np.asarray(t, dtype=float)
        out = np.where(
            t_arr >= self.splice_t,
            self.forward.value_at(t_arr),
            self.backward.value_at(t_arr),
        )
        return out if out.ndim else float(out)

    def compact_at(self, t):
        """Compactified space coordinate along the path."""
        if self.trivial != "none":
            sign = 1.0 if self.trivial == "plus" else -1.0
            return sign / (1.0 + np.abs(np.asarray(t, dtype=float)))
        return space_coord(self.value_at(t), t)

    def knot_times(self) -> np.ndarray:
        return np.union1d(self.backward.times, self.forward.times)

    def knot_key(self):
        if self.trivial != "none":
            return ("trivial", self.trivial)
        return (
            self.splice_t,
            self.backward.times.tobytes(),
            self.backward.values.tobytes(),
            self.forward.times.tobytes(),
            self.forward.values.tobytes(),
        )


def eval_path(p, t):
    """Space value of any path-like object at time t (clamped interpolation)."""
    return p.value_at(t)


def splice(f: ForwardSemipath, g: BackwardSemipath, t_star: float) -> FullPath:
    """Join a backward and a forward semipath meeting at ``t_star``.

    The start times and the values at the splice must agree exactly; a
    mismatch signals a caller bug, not data noise.
    """
    if f.t0 != t_star or g.t0 != t_star:
        raise ValueError("start times of the two semipaths must equal t_star")
    if f.values[0] != g.values[-1]:
        raise ValueError(
            f"values at the splice time differ: {f.values[0]} vs {g.values[-1]}"
        )
    return FullPath(forward=f, backward=g, splice_t=t_star)


def _refined_grid(knots: np.ndarray, refine: int) -> np.ndarray:
    if refine <= 1 or len(knots) < 2:
        return knots
    segs = []
    for a, b in zip(knots[:-1], knots[1:]):
        segs.append(np.linspace(a, b, refine, endpoint=False))
    segs.append(knots[-1:])
    return np.concatenate(segs)


def _semipath_compact(p: ForwardSemipath, grid: np.ndarray) -> np.ndarray:
    # below its start a semipath counts with its start value held constant
    return space_coord(p.value_at(grid), grid)


def path_distance(a, b, refine: int = 4) -> float:
    """Sup of the compactified space gap between two paths of the same kind.

    For two full paths the supremum runs over their shared window; for two
    forward semipaths it additionally includes the compactified gap between
    the start times, mirroring the usual semipath metric.  The supremum is
    evaluated on the union of the knot grids refined ``refine``-fold, which
    is exact for paths sharing a knot grid and otherwise accurate to the
    curvature of tanh over one sub-segment.
    """
    if isinstance(a, FullPath) and isinstance(b, FullPath):
        if (a.t_start, a.t_end) != (b.t_start, b.t_end):
            raise ValueError("full paths carry different windows")
        grid = _refined_grid(np.union1d(a.knot_times(), b.knot_times()), refine)
        return float(np.max(np.abs(a.compact_at(grid) - b.compact_at(grid))))
    if isinstance(a, ForwardSemipath) and isinstance(b, ForwardSemipath):
        if a.t_end != b.t_end:
            raise ValueError("semipaths carry different windows")
        knots = np.union1d(a.times, b.times)
        lo = min(a.t_start, b.t_start)
        knots = np.union1d(knots, [lo])
        grid = _refined_grid(knots, refine)
        sup = float(
            np.max(np.abs(_semipath_compact(a, grid) - _semipath_compact(b, grid)))
        )
        start_gap = abs(float(time_coord(a.t0)) - float(time_coord(b.t0)))
        return max(sup, start_gap)
    raise TypeError("path_distance compares two FullPath or two ForwardSemipath")


def hausdorff_distance(a, b, refine: int = 4) -> float:
    """Two-sided Hausdorff distance between finite path collections.

    Zero exactly when the sets coincide up to distance-zero pairs.
    """
    members_a = list(a.members) if isinstance(a, PathSet) else list(a)
    members_b = list(b.members) if isinstance(b, PathSet) else list(b)
    if not members_a or not members_b:
        raise ValueError("hausdorff_distance needs nonempty path sets")

    def directed(src, dst):
        worst = 0.0
        for p in src:
            best = min(path_distance(p, q, refine=refine) for q in dst)
            worst = max(worst, best)
        return worst

    return max(directed(members_a, members_b), directed(members_b, members_a))


def _span(p) -> tuple[float, float]:
    return (p.t_start, p.t_end)


def paths_cross(a, b) -> bool:
    """True iff the two paths strictly exchange order somewhere.

    Touching (equal values) never counts.  The sign pattern of the gap is
    checked on the union knot grid over the common time domain, which is
    exact for piecewise-linear paths: a linear segment attains a strictly
    positive value only if one of its endpoints does.
    """
    lo = max(_span(a)[0], _span(b)[0])
    hi = min(_span(a)[1], _span(b)[1])
    if lo > hi:
        raise ValueError("paths have disjoint time domains")
    knots = np.union1d(_knots_of(a), _knots_of(b))
    grid = knots[(knots >= lo) & (knots <= hi)]
    grid = np.union1d(grid, [lo, hi])
    va = a.value_at(grid)
    vb = b.value_at(grid)
    return bool(np.any(va > vb) and np.any(va < vb))


def _knots_of(p) -> np.ndarray:
    if isinstance(p, FullPath):
        return p.knot_times()
    return p.times


def crossing_scan(paths) -> list[tuple[int, int]]:
    """All index pairs that strictly cross; disjoint-domain pairs cannot cross."""
    hits = []
    paths = list(paths)
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            lo = max(_span(paths[i])[0], _span(paths[j])[0])
            hi = min(_span(paths[i])[1], _span(paths[j])[1])
            if lo > hi:
                continue
            if paths_cross(paths[i], paths[j]):
                hits.append((i, j))
    return hits


@dataclass(frozen=True, eq=False)
class PathSet:
    """A finite homogeneous collection of paths with shared window metadata.

    ``window`` is (T_lo, T_hi, X_lo, X_hi).  Members are FullPath or
    ForwardSemipath, never mixed.
    """

    members: tuple
    window: tuple = field(default=None)

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValueError("PathSet must not be empty")
        kinds = {type(m) for m in members}
        if not (kinds <= {FullPath} or kinds <= {ForwardSemipath}):
            raise ValueError("PathSet members must be all FullPath or all ForwardSemipath")
        if self.window is None:
            raise ValueError("PathSet needs window metadata (T_lo, T_hi, X_lo, X_hi)")
        window = tuple(float(w) for w in self.window)
        object.__setattr__(self, "window", window)
        t_lo, t_hi = window[0], window[1]
        for m in members:
            if isinstance(m, FullPath):
                if m.trivial != "none":
                    continue
                if (m.t_start, m.t_end) != (t_lo, t_hi):
                    raise ValueError("member span disagrees with the set window")
            else:
                if m.t_end != t_hi:
                    raise ValueError("semipath end disagrees with the set window")

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


# ---------------------------------------------------------------------------
# JSON wire format
#
# {"window": [T_lo, T_hi, X_lo, X_hi],
#  "paths": [{"splice_t": ..., "knots_fwd": [[t, x], ...],
#             "knots_bwd": [[t, x], ...], "trivial": "none|plus|minus"}]}
#
# +/-inf is encoded as the strings "inf" / "-inf".  Forward semipaths are
# encoded with an empty knots_bwd list and splice_t equal to their start time.
# ---------------------------------------------------------------------------


def _num_out(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _num_in(v) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def _knots_out(times, values):
    return [[_num_out(float(t)), _num_out(float(x))] for t, x in zip(times, values)]


def path_set_to_json(ps: PathSet) -> str:
    paths = []
    for m in ps.members:
        if isinstance(m, FullPath):
            if m.trivial != "none":
                paths.append(
                    {
                        "splice_t": _num_out(m.splice_t),
                        "knots_fwd": _knots_out(m.forward.times, m.forward.values),
                        "knots_bwd": _knots_out(m.backward.times, m.backward.values),
                        "trivial": m.trivial,
                    }
                )
            else:
                paths.append(
                    {
                        "splice_t": _num_out(m.splice_t),
                        "knots_fwd": _knots_out(m.forward.times, m.forward.values),
                        "knots_bwd": _knots_out(m.backward.times, m.backward.values),
                        "trivial": "none",
                    }
                )
        else:
            paths.append(
                {
                    "splice_t": _num_out(m.t0),
                    "knots_fwd": _knots_out(m.times, m.values),
                    "knots_bwd": [],
                    "trivial": "none",
                }
            )
    doc = {"window": [_num_out(w) for w in ps.window], "paths": paths}
    return json.dumps(doc, allow_nan=False, sort_keys=True)


def path_set_from_json(text: str) -> PathSet:
    doc = json.loads(text)
    window = tuple(_num_in(w) for w in doc["window"])
    members = []
    for rec in doc["paths"]:
        knots_fwd = rec["knots_fwd"]
        knots_bwd = rec["knots_bwd"]
        splice_t = _num_in(rec["splice_t"])
        trivial = rec.get("trivial", "none")
        if trivial != "none":
            members.append(FullPath.trivial_path(trivial, window))
            continue
        f_times = [_num_in(k[0]) for k in knots_fwd]
        f_vals = [_num_in(k[1]) for k in knots_fwd]
        if not knots_bwd:
            members.append(ForwardSemipath(splice_t, f_times, f_vals))
            continue
        b_times = [_num_in(k[0]) for k in knots_bwd]
        b_vals = [_num_in(k[1]) for k in knots_bwd]
        fwd = ForwardSemipath(splice_t, f_times, f_vals)
        bwd = BackwardSemipath(splice_t, b_times, b_vals)
        members.append(FullPath(fwd, bwd, splice_t))
    return PathSet(tuple(members), window)
