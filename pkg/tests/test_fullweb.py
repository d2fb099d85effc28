import math

import numpy as np
import pytest

from webflow.discreteweb import (
    DoubleWebSample,
    LatticeWindow,
    forward_path,
    rescale_path,
    sample_arrow_field,
    sample_double_web,
)
from webflow.fullweb import (
    ALLOWED_POINT_TYPES,
    FullWebSample,
    PointType,
    SpliceConfig,
    build_skeleton,
    classify_point,
    construction_distance,
    continuation_count,
    enumerate_splices,
    estimate_point_counts,
    find_expansion_wedge,
    forward_full,
    snap_to_lattice,
    splice_construction,
    splice_count,
)
from webflow.pathspace import (
    BackwardSemipath,
    ForwardSemipath,
    SpaceTimePoint,
    crossing_scan,
    eval_path,
    hausdorff_distance,
    path_distance,
    paths_cross,
)

P = SpaceTimePoint


# ---------------------------------------------------------------------------
# point types and counting rules
# ---------------------------------------------------------------------------


def test_point_type_taxonomy():
    for pair in ALLOWED_POINT_TYPES:
        assert PointType(*pair).pair == pair
    for bad in [(0, 0), (2, 2), (1, 3), (3, 1), (0, 4), (-1, 1)]:
        with pytest.raises(ValueError):
            PointType(*bad)


def test_splice_count_table():
    assert splice_count(PointType(0, 1)) == 1
    assert splice_count(PointType(1, 1)) == 2
    assert splice_count(PointType(0, 2)) == 2
    assert splice_count(PointType(1, 2)) == 3  # one pairing excluded
    assert splice_count(PointType(2, 1)) == 3
    assert splice_count(PointType(0, 3)) == 3


def test_continuation_count_cases():
    assert continuation_count(PointType(0, 3), passing_through=True) == 5
    assert continuation_count(PointType(0, 1), passing_through=True) == 1
    assert continuation_count(PointType(1, 2), passing_through=False) == 1
    assert continuation_count(PointType(1, 1), passing_through=False) == 1
    with pytest.raises(ValueError):
        continuation_count(PointType(0, 2), passing_through=False)


# ---------------------------------------------------------------------------
# synthetic splice configurations (all six types)
# ---------------------------------------------------------------------------

T_END = 2.0
T_START = -2.0


def fwd_line(slope):
    return ForwardSemipath(0.0, [0.0, T_END], [0.0, slope * T_END])


def bwd_line(slope):
    return BackwardSemipath(0.0, [T_START, 0.0], [slope * T_START, 0.0])


def incoming_strand(slope_below, slope_above):
    return ForwardSemipath(
        T_START,
        [T_START, 0.0, T_END],
        [slope_below * T_START, 0.0, slope_above * T_END],
    )


def synthetic_config(pair):
    point = P(0.0, 0.0)
    if pair == (0, 1):
        return SpliceConfig(point, PointType(0, 1), (fwd_line(0),), (bwd_line(0),))
    if pair == (1, 1):
        return SpliceConfig(
            point,
            PointType(1, 1),
            (fwd_line(0),),
            (bwd_line(3), bwd_line(1)),
            incoming=incoming_strand(2, 0),
        )
    if pair == (0, 2):
        return SpliceConfig(
            point, PointType(0, 2), (fwd_line(-1), fwd_line(1)), (bwd_line(0),)
        )
    if pair == (1, 2):
        return SpliceConfig(
            point,
            PointType(1, 2),
            (fwd_line(0), fwd_line(2)),
            (bwd_line(3), bwd_line(1)),
            incoming=incoming_strand(2, 0),
        )
    if pair == (2, 1):
        return SpliceConfig(
            point,
            PointType(2, 1),
            (fwd_line(0),),
            (bwd_line(5), bwd_line(3), bwd_line(1)),
        )
    if pair == (0, 3):
        return SpliceConfig(
            point, PointType(0, 3), (fwd_line(-1), fwd_line(0), fwd_line(1)), (bwd_line(0),)
        )
    raise AssertionError(pair)


def test_enumeration_count_matches_rule_for_all_types():
    for pair in sorted(ALLOWED_POINT_TYPES):
        cfg = synthetic_config(pair)
        paths = enumerate_splices(cfg)
        assert len(paths) == splice_count(cfg.ptype), pair


def test_one_two_exclusion_is_the_crossing_pair():
    cfg = synthetic_config((1, 2))
    paths = enumerate_splices(cfg)
    assert len(paths) == 3
    # the excluded pairing is (right forward, leftmost backward): rebuild it
    # and check it is exactly the one crossing the passing strand
    from webflow.pathspace import splice

    excluded = splice(fwd_line(2), bwd_line(3), 0.0)
    assert paths_cross(excluded, cfg.incoming)
    for kept in paths:
        assert not paths_cross(kept, cfg.incoming)
    # and none of the kept paths is the excluded one
    for kept in paths:
        assert path_distance(kept, excluded) > 0


def test_enumerated_paths_do_not_cross_each_other():
    for pair in sorted(ALLOWED_POINT_TYPES):
        paths = enumerate_splices(synthetic_config(pair))
        assert crossing_scan(paths) == []


def test_candidate_count_mismatch_rejected():
    with pytest.raises(ValueError):
        SpliceConfig(P(0, 0), PointType(0, 2), (fwd_line(0),), (bwd_line(0),))


def test_crossing_candidates_rejected():
    crossing_pair = (
        ForwardSemipath(0.0, [0.0, 1.0, T_END], [0.0, 1.0, -1.0]),
        ForwardSemipath(0.0, [0.0, 1.0, T_END], [0.0, -1.0, 1.0]),
    )
    with pytest.raises(ValueError):
        SpliceConfig(P(0, 0), PointType(0, 2), crossing_pair, (bwd_line(0),))


def test_one_two_requires_incoming():
    with pytest.raises(ValueError):
        SpliceConfig(
            P(0, 0),
            PointType(1, 2),
            (fwd_line(0), fwd_line(2)),
            (bwd_line(3), bwd_line(1)),
        )


# ---------------------------------------------------------------------------
# snapping
# ---------------------------------------------------------------------------


def test_snap_rounds_to_even_site():
    # delta = 1: (0.4, 6.2) -> t 6, x 0 (0+6 even)
    assert snap_to_lattice(P(0.4, 6.2), 1.0) == (0, 6)
    # parity correction picks the nearer odd x when t is odd
    x, t = snap_to_lattice(P(0.4, 5.2), 1.0)
    assert t == 5 and x == 1
    # ties break toward -infinity
    assert snap_to_lattice(P(0.0, 5.0), 1.0)[0] == -1


def test_snap_respects_delta_scaling():
    # delta = 0.5: x/delta = 2.2 -> 2, t/delta^2 = 8.0 -> 8
    assert snap_to_lattice(P(1.1, 2.0), 0.5) == (2, 8)


# ---------------------------------------------------------------------------
# skeleton construction
# ---------------------------------------------------------------------------


def make_dw(window, seed, rule="iid"):
    field = sample_arrow_field(window, seed, rule)
    return DoubleWebSample(field, (), ())


def test_skeleton_all_plus_single_point():
    # deterministic all-plus field: forward side climbs one unit per step and
    # the dual walk below descends one unit per level walked down
    dw = make_dw(LatticeWindow(-20, 20, 0, 10), 0, rule="all_plus")
    web = build_skeleton(dw, [P(0.0, 6.0)], delta=1.0)
    assert len(web.paths) == 1
    gamma = web.paths.members[0]
    assert gamma.splice_t == 6.0
    assert eval_path(gamma, 8.0) == 2.0
    assert eval_path(gamma, 10.0) == 4.0
    # splice bridge holds the value constant over [5, 6]
    assert eval_path(gamma, 5.0) == 0.0
    assert eval_path(gamma, 2.0) == -3.0
    assert eval_path(gamma, 0.0) == -5.0


def test_skeleton_duplicate_points_collapse():
    dw = make_dw(LatticeWindow(-40, 40, 0, 16), 3)
    web = build_skeleton(dw, [P(0.1, 8.0), P(-0.1, 8.2)], delta=1.0)
    assert len(web.paths) == 1


def test_skeleton_paths_pass_through_their_seeds():
    dw = make_dw(LatticeWindow(-60, 60, 0, 24), 9)
    pts = [P(x, 12.0) for x in (-8.0, -2.0, 4.0, 10.0)]
    web = build_skeleton(dw, pts, delta=1.0)
    assert len(web.paths) <= len(pts)
    for (x_e, t_lat), gamma in zip(web.d_points, web.paths):
        assert eval_path(gamma, float(t_lat)) == float(x_e)
        assert gamma.splice_t == float(t_lat)


def test_skeleton_empty_seed_list_rejected():
    dw = make_dw(LatticeWindow(-10, 10, 0, 8), 1)
    with pytest.raises(ValueError):
        build_skeleton(dw, [], delta=1.0)


def test_skeleton_monotone_refinement():
    # enlarging the seed set only adds paths: directed distance from the
    # smaller skeleton into the larger one is exactly zero
    dw = make_dw(LatticeWindow(-80, 80, 0, 30), 17)
    small = [P(-4.0, 14.0), P(6.0, 14.0)]
    large = small + [P(0.0, 18.0), P(-10.0, 10.0)]
    web_small = build_skeleton(dw, small, delta=1.0)
    web_large = build_skeleton(dw, large, delta=1.0)
    keys = {m.knot_key() for m in web_large.paths}
    assert all(m.knot_key() in keys for m in web_small.paths)
    d = max(
        min(path_distance(a, b) for b in web_large.paths) for a in web_small.paths
    )
    assert d == 0.0


def test_skeleton_noncrossing_members():
    for s in range(25):
        dw = make_dw(LatticeWindow(-80, 80, 0, 30), s)
        pts = [P(float(x), 14.0) for x in range(-10, 12, 4)]
        pts += [P(float(x), 20.0) for x in range(-9, 9, 6)]
        web = build_skeleton(dw, pts, delta=1.0)
        assert crossing_scan(list(web.paths)) == []


# ---------------------------------------------------------------------------
# construction equivalence
# ---------------------------------------------------------------------------


def test_constructions_identical_on_single_point():
    dw = make_dw(LatticeWindow(-40, 40, 0, 16), 5)
    pts = [P(1.0, 8.0)]
    assert construction_distance(dw, pts, pts, delta=1.0) == 0.0


def test_constructions_identical_all_plus_fine_grid():
    dw = make_dw(LatticeWindow(-60, 60, 0, 20), 0, rule="all_plus")
    pts = [P(float(x), float(t)) for x in range(-6, 7, 2) for t in (8.0, 9.0, 10.0)]
    assert construction_distance(dw, pts, pts, delta=1.0) == 0.0


def test_construction_distance_small_on_random_fields():
    delta = 0.05
    for s in range(10):
        w = LatticeWindow(-90, 90, 0, 50)
        dw = make_dw(w, s)
        d2 = delta * delta
        pts = [
            P(x * delta, t * d2)
            for x in range(-6, 7, 2)
            for t in (20, 21, 22)
            if (x + t) % 2 == 0
        ]
        assert construction_distance(dw, pts, pts, delta) <= 2 * delta


# ---------------------------------------------------------------------------
# point classification
# ---------------------------------------------------------------------------


def bottom_web(window, seed, rule, stride=2):
    field = sample_arrow_field(window, seed, rule)
    xs = window.even_xs(window.t_lo)[::stride]
    paths = tuple(forward_path(field, (int(x), window.t_lo)) for x in xs)
    return DoubleWebSample(field, paths, ())


def test_classify_funnel_detects_merging_strands():
    w = LatticeWindow(-400, 400, 0, 220)
    dw = bottom_web(w, 0, "funnel", stride=1)
    m_in, m_out = estimate_point_counts(dw, P(0.0, 130.0), eps=8.0)
    assert m_in >= 2
    assert m_out == 1


def test_classify_all_plus_on_path_points():
    w = LatticeWindow(-500, 500, 0, 220)
    dw = bottom_web(w, 0, "all_plus", stride=1)
    for x_p, t_p in [(130.0, 130.0), (131.0, 131.0), (140.0, 140.0)]:
        m_in, m_out = estimate_point_counts(dw, P(x_p, t_p), eps=8.0)
        assert m_out == 1
        assert m_in == 1
    pt = classify_point(dw, P(130.0, 130.0), eps=8.0)
    assert pt.pair == (1, 1)


def test_classify_generic_random_points_mostly_simple():
    # light version of the 10^4-point census run in the stats suite
    w = LatticeWindow(-1200, 1200, 0, 840)
    field = sample_arrow_field(w, 12)
    xs = np.arange(-460, 461, 2)
    paths = tuple(forward_path(field, (int(x), 0)) for x in xs)
    dw = DoubleWebSample(field, paths, ())
    rng = np.random.default_rng(5)
    good = 0
    n = 40
    for _ in range(n):
        x_p = float(rng.integers(-180, 180))
        t_p = float(rng.integers(700, 770))
        m_in, m_out = estimate_point_counts(dw, P(x_p, t_p), eps=8.0)
        if m_out == 1 and m_in <= 1:
            good += 1
    assert good / n >= 0.9


def test_classify_window_margin_enforced():
    w = LatticeWindow(-50, 50, 0, 100)
    dw = bottom_web(w, 1, "iid")
    with pytest.raises(ValueError):
        estimate_point_counts(dw, P(0.0, 10.0), eps=8.0)  # 2 eps^2 below bottom


# ---------------------------------------------------------------------------
# forward projection
# ---------------------------------------------------------------------------


def test_forward_full_single_cut_recovers_forward_component():
    dw = make_dw(LatticeWindow(-40, 40, 0, 16), 8)
    web = build_skeleton(dw, [P(0.0, 8.0)], delta=1.0)
    gamma = web.paths.members[0]
    out = forward_full(web, [gamma.splice_t])
    assert len(out) == 1
    semi = out.members[0]
    assert semi.t0 == gamma.splice_t
    assert np.array_equal(semi.values, gamma.forward.values)


def test_forward_full_k_cuts_nested():
    dw = make_dw(LatticeWindow(-40, 40, 0, 16), 8)
    web = build_skeleton(dw, [P(0.0, 8.0)], delta=1.0)
    cuts = [9.0, 11.0, 13.0]
    out = forward_full(web, cuts)
    assert len(out) == 3
    by_t0 = sorted(out.members, key=lambda s: s.t0)
    for earlier, later in zip(by_t0, by_t0[1:]):
        assert earlier.value_at(later.t0) == later.values[0]


def test_forward_full_contains_forward_web():
    dw = make_dw(LatticeWindow(-80, 80, 0, 30), 21)
    pts = [P(float(x), 10.0) for x in range(-8, 10, 4)]
    web = build_skeleton(dw, pts, delta=1.0)
    cuts = sorted({m.splice_t for m in web.paths})
    out = forward_full(web, cuts)
    fwd_web = [
        rescale_path(forward_path(dw.field, site), 1.0) for site in web.d_points
    ]
    d = max(min(path_distance(a, b) for b in out.members) for a in fwd_web)
    assert d == 0.0


def test_forward_full_rejects_cuts_outside_window():
    dw = make_dw(LatticeWindow(-40, 40, 0, 16), 8)
    web = build_skeleton(dw, [P(0.0, 8.0)], delta=1.0)
    with pytest.raises(ValueError):
        forward_full(web, [99.0])


# ---------------------------------------------------------------------------
# expansion wedges
# ---------------------------------------------------------------------------


def test_wedge_detection_and_extra_semipath():
    # find a pinch where two dual strands have merged below a wide-open
    # wedge; the full-web path seeded inside and cut at the pinch is a
    # forward semipath genuinely different from the web's own path there
    # (compared in raw space: tanh saturates at raw lattice coordinates)
    found = 0
    for seed in range(100):
        w = LatticeWindow(-260, 260, 0, 120)
        field = sample_arrow_field(w, seed)
        hit = None
        for probe in (100, 85, 70):
            hit = find_expansion_wedge(
                field, probe_level=probe, rise=20, min_width=16, min_pinch_level=30
            )
            if hit is not None:
                break
        if hit is None:
            continue
        (z, s), b_l, b_r, level = hit
        dw = DoubleWebSample(field, (), ())
        interior = [x for x in range(b_l + 1, b_r, 2) if (x + level) % 2 == 0]
        fresh = rescale_path(forward_path(field, (z, s + 1)), 1.0)
        x_w = max(interior, key=lambda x: abs(x - fresh.value_at(level)))
        web = build_skeleton(dw, [P(float(x_w), float(level))], delta=1.0)
        gamma = web.paths.members[0]
        assert eval_path(gamma, float(s)) == float(z)  # squeezed to the pinch
        extra = forward_full(web, [float(s)]).members[0]
        # same start cell, genuinely different continuation inside the wedge
        assert abs(extra.value_at(float(s)) - fresh.value_at(float(s))) <= 1.0
        assert abs(extra.value_at(float(level)) - fresh.value_at(float(level))) >= 6.0
        # the wedge interior stays strictly between the bounding dual strands
        assert b_l < extra.value_at(float(level)) < b_r
        found += 1
        if found >= 5:
            break
    assert found >= 5


def test_splice_construction_double_web_sources():
    # both constructions run off a sampled double web without touching its
    # traced paths beyond the shared field
    dw = sample_double_web(LatticeWindow(-60, 60, 0, 24), 2, n_paths=4)
    pts = [P(0.0, 12.0), P(4.0, 12.0)]
    skel = build_skeleton(dw, pts, 1.0)
    enum = splice_construction(dw, pts, 1.0)
    assert hausdorff_distance(skel.paths, enum.paths) == 0.0
    assert skel.construction == "skeleton"
    assert enum.construction == "splice_enum"
