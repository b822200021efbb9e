import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hextile.enumeration import enumerate_all
from hextile.formats import read_excitation, write_excitation
from hextile.lattice import build_aperture, element_positions
from hextile.pattern import (
    ArrayModel,
    CostEvaluator,
    ExcitationSet,
    PatternGrid,
    PowerMask,
    ScanCone,
    UVGrid,
    array_factor,
    build_reference,
    cosine_element,
    cost,
    directivity,
    half_power_beamwidths,
    metrics,
    scan_map,
    steered_mask,
    steering_phases,
    subarray_coefficients,
    tiled_excitation,
    tiled_weights_batch,
)
from hextile.tiling import decode, minimal_tiling, tile_pairs_batch, word_to_heights

RHO = math.sqrt(3) / 4


@pytest.fixture(scope="module")
def ap2():
    return build_aperture(2, RHO)


def two_element(x0, grid=201):
    pos = np.array([[-x0, 0.0], [x0, 0.0]])
    return ArrayModel(pos, UVGrid(grid)).pattern(np.ones(2))


# --------------------------------------------------------------------------
# Excitations and sub-array coefficients


def test_reference_kinds(ap2):
    uni = build_reference(ap2)
    assert np.array_equal(uni.amplitude, np.ones(24)) and np.array_equal(uni.phase_deg, np.zeros(24))
    tap = build_reference(ap2, "cosine-taper", exponent=1.0)
    r = np.hypot(*element_positions(ap2).T)
    assert np.all(tap.amplitude <= 1.0)
    # weights fall off monotonically with distance from the centre
    order = np.argsort(r, kind="stable")
    assert np.all(np.diff(tap.amplitude[order]) <= 1e-12)
    assert tap.amplitude[order[0]] > 0.89 and tap.amplitude[order[-1]] < 0.37
    tight = build_reference(ap2, "cosine-taper", radius=r.max())
    assert tight.amplitude.min() == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        build_reference(ap2, "gaussian")
    with pytest.raises(ValueError):
        build_reference(ap2, "file")


def test_excitation_validation():
    with pytest.raises(ValueError):
        ExcitationSet([1.0, -0.1], [0.0, 0.0])
    with pytest.raises(ValueError):
        ExcitationSet([1.0], [math.nan])
    with pytest.raises(ValueError):
        ExcitationSet([1.0, 2.0], [0.0])
    e = ExcitationSet([1.0], [0.0])
    with pytest.raises(ValueError):
        e.amplitude[0] = 3.0


def test_coefficient_examples(ap2):
    t = minimal_tiling(ap2)
    amp = np.ones(24)
    ph = np.zeros(24)
    a, b = t.tiles[0].triangle_a, t.tiles[0].triangle_b
    amp[b] = 0.6
    ph[a], ph[b] = 10.0, 20.0
    c = subarray_coefficients(t, ExcitationSet(amp, ph))
    assert c.amplitude[0] == pytest.approx(0.8)
    assert math.degrees(c.phase[0]) == pytest.approx(15.0)
    assert np.all(c.amplitude[1:] == 1.0)


def test_coefficients_average_across_wrap(ap2):
    t = minimal_tiling(ap2)
    ph = np.zeros(24)
    a, b = t.tiles[0].triangle_a, t.tiles[0].triangle_b
    ph[a], ph[b] = 170.0, -170.0
    c = subarray_coefficients(t, ExcitationSet(np.ones(24), ph))
    assert abs(math.cos(c.phase[0]) + 1.0) < 1e-12


def test_coefficients_size_mismatch(ap2):
    with pytest.raises(ValueError):
        subarray_coefficients(minimal_tiling(ap2), ExcitationSet(np.ones(6), np.zeros(6)))


def test_steering_phases(ap2):
    assert np.all(steering_phases(ap2, 0, 0) == 0)
    x = element_positions(ap2)[:, 0]
    assert np.allclose(steering_phases(ap2, 30, 0), -2 * math.pi * x * 0.5, atol=1e-12)
    assert np.allclose(steering_phases(ap2, 30, 0), -steering_phases(ap2, 30, 180), atol=1e-12)


def test_batch_weights_match_single(ap2):
    ref = build_reference(ap2, "cosine-taper", exponent=2.0)
    ref = ExcitationSet(ref.amplitude, np.degrees(steering_phases(ap2, 20, 45)))
    words = [w for w, _ in enumerate_all(ap2)]
    H = np.array([word_to_heights(ap2, w) for w in words])
    a, b = tile_pairs_batch(ap2, H)
    W = tiled_weights_batch(a, b, ref)
    for w, row in zip(words, W):
        t = decode(ap2, w)
        single = tiled_excitation(t, subarray_coefficients(t, ref)).weights
        assert np.allclose(row, single, rtol=0, atol=1e-12)


# --------------------------------------------------------------------------
# Patterns


def test_two_element_closed_form():
    x0 = 0.3
    pat = two_element(x0)
    uu, _ = pat.grid.mesh()
    expected = np.cos(2 * math.pi * x0 * uu) ** 2
    assert np.max(np.abs(pat.power - np.where(pat.visible, expected, 0.0))) < 1e-9
    t = np.linspace(-1, 1, 57)
    assert np.allclose(pat.power_at(t, 0 * t) * pat.scale, 4 * np.cos(2 * math.pi * x0 * t) ** 2, atol=1e-12)


def test_two_element_beamwidth():
    x0 = 0.3
    az, el = half_power_beamwidths(two_element(x0))
    assert az == pytest.approx(2 * math.degrees(math.asin(1 / (8 * x0))), abs=1e-9)
    assert math.isnan(el)  # no -3 dB point along v


def test_two_element_sidelobe():
    x0 = 0.75
    pat = two_element(x0)
    # first null at u = 1/(4 x0); the next lobe peaks at u = 1/(2 x0), at the main peak level
    mask = PowerMask((0.0, 0.0), (2 / (4 * x0), 2.0), -20.0)
    m = metrics(pat, mask)
    uu, vv = pat.grid.mesh()
    outside = pat.visible & ~mask.in_mainlobe(uu, vv)
    expected = np.max(np.cos(2 * math.pi * x0 * uu[outside]) ** 2)
    assert m.sll_db == pytest.approx(10 * math.log10(expected), abs=1e-9)
    assert m.sll_db > -0.01


def test_single_element_flat():
    pat = ArrayModel(np.zeros((1, 2)), UVGrid(51)).pattern(np.array([0.3 + 0.4j]))
    assert np.allclose(pat.power[pat.visible], 1.0)


def test_broadside_peak_and_normalisation():
    ap = build_aperture(10, RHO)
    pat = array_factor(ap, build_reference(ap), 101)
    iv, iu = pat.peak_index()
    assert (iv, iu) == (50, 50)
    assert pat.power.max() == 1.0
    assert np.all(pat.power[~pat.visible] == 0)


def test_zero_excitation_rejected(ap2):
    with pytest.raises(ValueError):
        array_factor(ap2, ExcitationSet(np.zeros(24), np.zeros(24)), 51)
    with pytest.raises(ValueError):
        array_factor(ap2, np.ones(5), 51)


@pytest.mark.parametrize("rings,rho", [(10, RHO), (10, 0.6), (6, 0.5)])
def test_directivity_matches_aperture_area(rings, rho):
    ap = build_aperture(rings, rho)
    d = directivity(array_factor(ap, build_reference(ap), 201))
    area = 1.5 * math.sqrt(3) * (rings * rho) ** 2
    assert abs(d - 10 * math.log10(4 * math.pi * area)) < 0.5


def test_cosine_element_shapes_pattern():
    pos = np.zeros((1, 2))
    pat = ArrayModel(pos, UVGrid(51), cosine_element(1.0)).pattern(np.ones(1))
    uu, vv = pat.grid.mesh()
    expected = np.clip(1 - uu**2 - vv**2, 0, None)
    assert np.allclose(pat.power[pat.visible], expected[pat.visible] / expected[pat.visible].max())


def test_tiled_equals_full_for_uniform(ap2):
    full = array_factor(ap2, build_reference(ap2), 101)
    count = 0
    for _, t in enumerate_all(ap2):
        ex = tiled_excitation(t, subarray_coefficients(t, build_reference(ap2)))
        tiled = array_factor(ap2, ex, 101)
        assert np.max(np.abs(tiled.power - full.power)) <= 1e-10
        count += 1
    assert count == 20


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 19), st.floats(0, 60), st.floats(0, 360))
def test_steered_phase_error_is_half_difference(idx, theta, phi):
    ap = build_aperture(2, RHO)
    t = [t for _, t in enumerate_all(ap)][idx]
    beta = steering_phases(ap, theta, phi)
    ex = tiled_excitation(t, subarray_coefficients(t, ExcitationSet.from_radians(np.ones(24), beta)))
    err = np.angle(np.exp(1j * (ex.phase - beta)))
    for tile in t.tiles:
        a, b = tile.triangle_a, tile.triangle_b
        half = np.angle(np.exp(1j * (beta[b] - beta[a]))) / 2
        assert err[a] == pytest.approx(half, abs=1e-9)
        assert err[b] == pytest.approx(-half, abs=1e-9)


# --------------------------------------------------------------------------
# Cost


def test_cost_zero_under_mask(ap2):
    pat = array_factor(ap2, build_reference(ap2), 51)
    assert cost(pat, PowerMask(floor_db=0.0)) == 0.0


def test_cost_single_cell():
    grid = UVGrid(41)
    vis = grid.visible()
    power = np.zeros((41, 41))
    power[20, 20] = 1.0
    eps = 0.003
    mask = PowerMask((0.0, 0.0), (0.2, 0.2), -20.0)
    power[20, 35] = mask.floor + eps
    pat = PatternGrid(grid, power, vis, 1.0)
    assert cost(pat, mask) == pytest.approx(eps * grid.cell_area, rel=1e-12)


def test_cost_against_fine_quadrature(ap2):
    # independent midpoint rule at a much finer grid, plain in/out mask
    t = minimal_tiling(ap2)
    ex = tiled_excitation(t, subarray_coefficients(t, build_reference(ap2)))
    mask = PowerMask((0.0, 0.0), (0.9, 0.9), -20.0)
    chi = cost(array_factor(ap2, ex, 101), mask)
    xy = element_positions(ap2)
    w = ex.weights
    n = 1000
    x = (np.arange(n) + 0.5) / n * 2 - 1
    total = 0.0
    for v in x:
        u = x[x**2 + v**2 <= 1]
        f = np.exp(2j * np.pi * (np.outer(u, xy[:, 0]) + v * xy[:, 1])) @ w
        p = np.abs(f) ** 2 / abs(w.sum()) ** 2
        U = np.where((np.abs(u) <= 0.45) & (abs(v) <= 0.45), 1.0, 0.01)
        total += np.maximum(p - U, 0).sum()
    oracle = total * (2 / n) ** 2
    assert chi == pytest.approx(oracle, rel=0.01)


@settings(max_examples=20, deadline=None)
@given(st.floats(-40, -3), st.floats(0.1, 10), st.floats(0.2, 1.5), st.sampled_from(["rectangle", "ellipse"]))
def test_cost_monotone(floor_db, raise_db, width, shape):
    ap = build_aperture(2, RHO)
    pat = array_factor(ap, build_reference(ap, "cosine-taper"), 61)
    lo = PowerMask((0.0, 0.0), (width, width), floor_db, shape)
    hi = PowerMask((0.0, 0.0), (width, width), floor_db + raise_db, shape)
    wider = PowerMask((0.0, 0.0), (width + 0.1, width + 0.1), floor_db, shape)
    c = cost(pat, lo)
    assert cost(pat, hi) <= c
    assert cost(pat, wider) <= c + 1e-15
    louder = PatternGrid(pat.grid, pat.power * 10 ** (raise_db / 10), pat.visible, pat.scale)
    assert cost(louder, lo) >= c


def test_mainlobe_fraction_area():
    grid = UVGrid(101)
    rect = PowerMask((0.1, -0.05), (0.9, 0.5), -20.0)
    assert rect.mainlobe_fraction(grid).sum() * grid.cell_area == pytest.approx(0.45, rel=1e-12)
    ell = PowerMask((0.0, 0.0), (0.8, 0.6), -20.0, "ellipse")
    assert ell.mainlobe_fraction(grid).sum() * grid.cell_area == pytest.approx(math.pi * 0.4 * 0.3, rel=1e-3)


def test_cost_refines(ap2):
    t = minimal_tiling(build_aperture(4, RHO))
    ap = build_aperture(4, RHO)
    ex = tiled_excitation(t, subarray_coefficients(t, build_reference(ap)))
    mask = PowerMask(floor_db=-20.0)
    c1, c2 = (cost(array_factor(ap, ex, r), mask) for r in (101, 201))
    assert abs(c1 - c2) / c2 < 0.02


def test_evaluator_matches_cost(ap2):
    grid = UVGrid(61)
    mask = PowerMask((0.0, 0.0), (0.7, 0.7), -15.0, "ellipse")
    ev = CostEvaluator(ArrayModel.for_aperture(ap2, grid), mask)
    ref = build_reference(ap2, "cosine-taper", exponent=2.0)
    words = [w for w, _ in enumerate_all(ap2)]
    a, b = tile_pairs_batch(ap2, np.array([word_to_heights(ap2, w) for w in words]))
    batch = ev(tiled_weights_batch(a, b, ref))
    for w, chi in zip(words, batch):
        t = decode(ap2, w)
        pat = array_factor(ap2, tiled_excitation(t, subarray_coefficients(t, ref)), grid)
        assert chi == pytest.approx(cost(pat, mask), rel=1e-10, abs=1e-15)


# --------------------------------------------------------------------------
# Metrics and scanning


def test_metrics_warns_when_peak_outside(ap2, caplog):
    pat = array_factor(ap2, build_reference(ap2), 51)
    m = metrics(pat, PowerMask((0.7, 0.0), (0.2, 0.2), -20.0))
    assert not m.peak_in_mainlobe
    assert "outside the mainlobe" in caplog.text


def test_hpbw_grid_fallback_close_to_exact():
    exact = two_element(0.3, 401)
    coarse = PatternGrid(exact.grid, exact.power, exact.visible, exact.scale)
    assert half_power_beamwidths(coarse)[0] == pytest.approx(half_power_beamwidths(exact)[0], abs=0.05)


def test_scan_cone_defaults():
    c = ScanCone()
    assert (c.theta0, c.phi0) == (30.0, 0.0)
    assert c.thetas[0] == -30 and c.thetas[-1] < 30
    assert c.phis[0] == 0 and c.phis[-1] < 360
    with pytest.raises(ValueError):
        ScanCone(theta_gamma=(0, 1, 0)).thetas


def test_scan_zero_offset_matches_unscanned():
    ap = build_aperture(3, RHO)
    t = minimal_tiling(ap)
    mask = PowerMask(floor_db=-20.0)
    amp = build_reference(ap, "cosine-taper").amplitude
    cone = ScanCone(theta0=30.0, phi0=0.0, theta_gamma=(0, 1, 1), phi_gamma=(0, 1, 1))
    sm = scan_map(ap, t, amp, cone, mask, 101)
    assert sm.sll_db.shape == (1, 1)
    ref = ExcitationSet.from_radians(amp, steering_phases(ap, 30, 0))
    pat = array_factor(ap, tiled_excitation(t, subarray_coefficients(t, ref)), 101)
    m = metrics(pat, steered_mask(mask, 30, 0))
    assert sm.sll_db[0, 0] == m.sll_db
    assert sm.d_dbi[0, 0] == m.d_dbi


def test_scan_untiled_control_flat_in_phi():
    ap = build_aperture(3, RHO)
    cone = ScanCone(theta_gamma=(10, 11, 1), phi_gamma=(0, 360, 15))
    sm = scan_map(ap, None, np.ones(ap.n_triangles), cone, PowerMask(floor_db=-20.0), 101)
    assert sm.sll_db.shape == (1, 24)
    assert np.ptp(sm.sll_db) < 0.1


def test_excitation_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    ex = ExcitationSet(rng.random(54), rng.uniform(-180, 180, 54))
    p = tmp_path / "ex.csv"
    write_excitation(p, ex)
    assert read_excitation(p, 54) == ex
