import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fblab.certify import (
    HarnackBand,
    HypothesisError,
    alpha_from_shrink,
    band_slack,
    harnack_cascade,
    harnack_step,
    tightest_band,
)
from fblab.grid import GridSpec, VectorField

from conftest import plane_field
from oracles import tightest_band_loops


@pytest.fixture(scope="module")
def spec():
    return GridSpec.unit(2, 1, 1 / 128)


def test_degenerate_band_stays(spec):
    U = plane_field(spec)
    for r in (0.2, 0.5, 1.0):
        out = harnack_step(U, HarnackBand((0, 0), r, 0.0, 0.0))
        assert (out.a, out.b, out.shrink_factor) == (0.0, 0.0, 0.0)
        assert out.r == r / 20


def test_shifted_plane_recovers_shift(spec):
    d = 0.004
    U = plane_field(spec, shift=d)
    out = harnack_step(U, HarnackBand((0, 0.3), 0.2, 0.0, 2 * d))
    assert abs(out.a - d) <= 2 * spec.h and abs(out.b - d) <= 2 * spec.h
    assert out.shrink_factor <= 2 * spec.h / (2 * d)


def test_step_hypothesis_errors(spec):
    U = plane_field(spec, shift=0.004)
    with pytest.raises(HypothesisError, match="inside B_1"):
        harnack_step(U, HarnackBand((0, 0.5), 0.6, 0.0, 0.008))
    with pytest.raises(HypothesisError, match="positivity set"):
        harnack_step(U, HarnackBand((0, -0.5), 0.2, 0.0, 0.008))
    with pytest.raises(HypothesisError, match="band trapping"):
        harnack_step(U, HarnackBand((0, 0.3), 0.2, 0.0, 0.002))
    with pytest.raises(HypothesisError, match="eps_bar r"):
        harnack_step(U, HarnackBand((0, 0.3), 0.2, -0.05, 0.05))
    spec2 = spec.with_m(2)
    xn = np.broadcast_to(spec2.mesh()[-1], spec2.shape)
    # u^2 vanishes on B_r(x0) but exceeds r (width/r)^(3/4) elsewhere in B_1/2(x0)
    V = VectorField(spec2, np.stack([np.maximum(xn + 0.004, 0), np.where(xn < 0.05, 0.02, 0.0)]))
    with pytest.raises(HypothesisError, match="component smallness"):
        harnack_step(V, HarnackBand((0, 0.3), 0.2, 0.0, 0.008))


def test_tightest_band_matches_loops(spec):
    spec = spec.with_m(2)
    rng = np.random.default_rng(2)
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    U = VectorField(spec, np.stack([np.maximum(xn + 0.01 * rng.uniform(size=spec.shape), 0),
                                    0.001 * rng.normal(size=spec.shape)]))
    for x0, r in (((0.0, 0.1), 0.3), ((0.2, 0.0), 0.05)):
        band = tightest_band(U, x0, r)
        a, b = tightest_band_loops(U, np.asarray(x0), r)
        assert band.a == a and band.b == b
        assert band_slack(U, band) <= 1e-15


@given(st.integers(0, 2**31 - 1), st.floats(0, 0.004), st.floats(0, 0.004))
def test_step_bands_nest(seed, wa, wb):
    spec = GridSpec.unit(2, 1, 1 / 32)
    rng = np.random.default_rng(seed)
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    U = VectorField(spec, np.maximum(xn + 0.003 * rng.uniform(size=spec.shape), 0)[None])
    x0, r = (0.0, 0.3), 0.25
    t = tightest_band(U, x0, r)
    band = HarnackBand(x0, r, t.a - wa, t.b + wb)
    out = harnack_step(U, band)
    assert band.a <= out.a <= out.b <= band.b
    assert 0 <= out.shrink_factor <= 1


def test_alpha_formula():
    assert alpha_from_shrink([0.9, 0.9, 0.9]) == pytest.approx(0.03517, abs=1e-5)
    for fs in ([0.9], [0.5, 0.8], [0.99, 0.3, 0.7]):
        assert abs(alpha_from_shrink(fs) - (-math.log(max(fs)) / math.log(20))) <= 1e-12
    assert alpha_from_shrink([0.0, 0.0]) == math.inf
    assert alpha_from_shrink([]) is None


def test_cascade_radii_and_reasons(spec):
    U = plane_field(spec, shift=0.004)
    band0 = HarnackBand((0, 0.3), 0.2, 0.0, 0.008)
    rec = harnack_cascade(U, (0, 0.3), band0, k_max=3, min_radius_nodes=0)
    assert [b.r for b in rec.bands] == [0.2 / 20**k for k in range(len(rec.bands))]
    assert rec.stop_reason
    assert all(0 <= s <= 1 for s in rec.shrink_factors)

    floor = harnack_cascade(U, (0, 0.3), band0, k_max=3)
    assert floor.stop_reason.startswith("resolution floor")

    bad = harnack_cascade(U, (0, 0.3), HarnackBand((0, 0.3), 0.2, 0.0, 0.001), k_max=3,
                           min_radius_nodes=0)
    assert bad.stop_reason.startswith("hypothesis exhausted") and bad.shrink_factors == []

    done = harnack_cascade(U, (0, 0.3), band0, k_max=1, min_radius_nodes=0)
    assert done.stop_reason.startswith("k_max reached")


def test_cascade_exact_plane_is_degenerate(spec):
    U = plane_field(spec)
    rec = harnack_cascade(U, (0, 0), HarnackBand((0, 0), 1.0, 0.0, 0.0), k_max=3,
                          min_radius_nodes=0)
    assert rec.shrink_factors and all(s == 0 for s in rec.shrink_factors)
    assert rec.alpha_estimate == math.inf
    assert rec.to_dict()["alpha_estimate"] == "inf"
    cols = list(rec.rows()[0])
    assert cols == ["k", "radius", "a", "b", "width", "shrink_factor"]


def test_cascade_shifted_plane_collapses(spec):
    d = 0.004
    U = plane_field(spec, shift=d)
    rec = harnack_cascade(U, (0, 0.3), HarnackBand((0, 0.3), 0.2, 0.0, 2 * d), k_max=1,
                           min_radius_nodes=0)
    assert rec.shrink_factors[0] <= 2 * spec.h / (2 * d)
