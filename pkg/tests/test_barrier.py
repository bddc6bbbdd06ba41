import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fblab.barrier import (
    ComparisonFamily,
    PlaneProfile,
    RadialBarrier,
    annulus_fb_slope_check,
    default_gamma,
    eval_barrier,
    touching_search,
    validate_gamma,
)
from fblab.grid import GridSpec, ScalarField

from oracles import touching_loops


def _at_radius(b, rho):
    x = np.array(b.center, float)
    x[0] += rho
    return float(eval_barrier(b, x))


def test_eval_barrier_examples():
    b = RadialBarrier(2, -1.0)
    assert b.center == (0.0, 0.2)
    assert _at_radius(b, 1 / 20) == 1.0
    assert _at_radius(b, 3 / 4) == 0.0
    assert _at_radius(b, 0.0) == 1.0 and _at_radius(b, 2.0) == 0.0
    # (4 - 4/3) / (20 - 4/3) = 1/7
    assert _at_radius(b, 0.25) == pytest.approx(0.14285714285714285, abs=1e-14)


@pytest.mark.parametrize("n,gamma,ok", [(2, -1.0, True), (3, -2.0, True), (3, -1.0, False)])
def test_validate_gamma_examples(n, gamma, ok):
    spec = GridSpec.unit(n, 1, 1 / 64 if n == 2 else 1 / 32)
    v = validate_gamma(spec, gamma)
    assert v.passed is ok
    assert v.annulus_nodes > 0
    if not ok:
        assert v.analytic_min == 0


@pytest.mark.parametrize("gamma", [0.0, 0.5])
def test_validate_gamma_rejects_nonnegative(gamma):
    with pytest.raises(ValueError):
        validate_gamma(GridSpec.unit(2, 1, 1 / 16), gamma)


def test_default_gamma():
    assert default_gamma(GridSpec.unit(2, 1, 1 / 64)) == -0.5
    assert default_gamma(GridSpec.unit(3, 1, 1 / 32)) == -2.0


@given(st.sampled_from([2, 3]), st.sampled_from([-0.5, -1.0, -2.0, -4.0]),
       st.lists(st.floats(0, 1.5), min_size=2, max_size=30))
def test_barrier_radially_nonincreasing(n, gamma, radii):
    b = RadialBarrier(n, gamma)
    rho = np.sort(np.asarray(radii))
    vals = b.radial(rho)
    assert np.all(np.diff(vals) <= 1e-15)
    assert np.all((vals >= 0) & (vals <= 1))


@pytest.mark.parametrize("gamma", [-0.5, -1.0, -2.0])
def test_barrier_continuous_at_gluing_spheres(gamma):
    b = RadialBarrier(2, gamma)
    for r in (b.inner_radius, b.outer_radius):
        lo, hi = b.radial(np.nextafter(r, 0)), b.radial(np.nextafter(r, 2))
        assert abs(float(lo) - float(hi)) <= 1e-12


def _families(spec, eps=0.01, c0=0.1, sigma=0.0, gamma=None):
    b = RadialBarrier.build(spec, gamma)
    p = PlaneProfile(sigma)
    return (ComparisonFamily(p, b, c0, eps, "sub"), ComparisonFamily(p, b, c0, eps, "super"))


@given(st.floats(-1, 1), st.floats(0, 0.5))
def test_families_monotone_in_t(t, dt):
    spec = GridSpec.unit(2, 1, 1 / 16)
    sub, sup = _families(spec)
    assert np.all(sub.values(spec, t + dt) >= sub.values(spec, t))
    assert np.all(sup.values(spec, t + dt) <= sup.values(spec, t))


@pytest.mark.parametrize("n,N", [(2, 128), (3, 32)])
def test_family_laplacian_signs(n, N):
    spec = GridSpec.unit(n, 1, 1 / N)
    sub, sup = _families(spec)
    assert np.all(sub.laplacian_on_annulus(spec) > 0)
    assert np.all(sup.laplacian_on_annulus(spec) < 0)


def test_touching_examples():
    spec = GridSpec.unit(2, 1, 1 / 64)
    sub, sup = _families(spec)
    region = spec.ball_mask()
    p = ScalarField(spec, np.broadcast_to(PlaneProfile()(*spec.mesh()), spec.shape).astype(float))
    t, x = touching_search(p, sub, region)
    assert t == 0.0
    assert np.linalg.norm(np.asarray(x) - sub.barrier.center) <= 1 / 20
    t, x = touching_search(ScalarField(spec, p.values + 0.01), sup, region)
    assert t == 0.0
    assert np.linalg.norm(np.asarray(x) - sup.barrier.center) <= 1 / 20
    with pytest.raises(ValueError, match="empty region"):
        touching_search(p, sub, np.zeros(spec.shape, bool))


@given(st.integers(0, 2**31 - 1), st.sampled_from(["sub", "super"]))
def test_touching_matches_scan(seed, orientation):
    spec = GridSpec.unit(2, 1, 1 / 16)
    rng = np.random.default_rng(seed)
    sub, sup = _families(spec)
    fam = sub if orientation == "sub" else sup
    v0 = fam.values(spec, 0.0)
    bump = np.abs(rng.normal(scale=0.01, size=spec.shape))
    g = v0 + bump if orientation == "sub" else v0 - bump
    region = spec.ball_mask() & (rng.uniform(size=spec.shape) < 0.7)
    if not region.any():
        return
    t, x = touching_search(ScalarField(spec, g), fam, region)
    best, where = touching_loops(g, v0, region, orientation)
    assert t == best
    assert np.allclose(x, spec.node_point(where))
    # after sliding by t the family is still on its side and touches
    vt = fam.values(spec, t)
    gap = (g - vt) if orientation == "sub" else (vt - g)
    assert gap[region].min() == pytest.approx(0.0, abs=1e-15)


def test_slope_degenerate_epsilon():
    spec = GridSpec.unit(2, 1, 1 / 64)
    sub, _ = _families(spec, eps=0.0)
    v = annulus_fb_slope_check(sub, spec)
    assert v.status == "degenerate epsilon" and not v.passed


def test_slope_strict_direction():
    # qualitative separation: sub slopes exceed 1, super slopes stay in (1/2, 1)
    spec = GridSpec.unit(2)
    for gamma in (-0.5, -1.0):
        sub, sup = _families(spec, gamma=gamma)
        a = annulus_fb_slope_check(sub, spec, required_margin=0.0)
        b = annulus_fb_slope_check(sup, spec, required_margin=0.0)
        assert a.count > 0 and b.count > 0
        assert a.min_slope > 1 and a.margin > 0
        assert 0.5 <= b.min_slope and b.max_slope < 1 and b.margin > 0


@pytest.mark.xfail(strict=True, reason=(
    "the slope excess is about c0 eps |w'| on the level set, a few 1e-5 for "
    "eps = 0.01 and c0 = 0.1, below the 1e-4 margin"
))
def test_slope_margin_1e4():
    spec = GridSpec.unit(2)
    sub, sup = _families(spec, gamma=-1.0)
    assert annulus_fb_slope_check(sub, spec).passed
    assert annulus_fb_slope_check(sup, spec).passed


def test_slope_vacuous_when_level_set_misses_annulus():
    spec = GridSpec.unit(2, 1, 1 / 64)
    sub, _ = _families(spec)
    far = sub.with_t(5.0)
    assert annulus_fb_slope_check(far, spec).status == "vacuous"
