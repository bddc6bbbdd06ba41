import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fblab.certify import fb_gradient_residual, measure_flatness
from fblab.elliptic import default_tol
from fblab.grid import GridSpec, VectorField, classify_regions, neighbor_any, norm_field
from fblab.variational import (
    MinimizeParams,
    boundary_family,
    energy,
    free_nodes,
    harmonic_residual_on_positivity,
    minimize,
    penalized_energy,
)

from conftest import H, plane_field
from oracles import penalized_energy_loops


def _tol(res):
    spec = res.field.spec
    free = free_nodes(spec)
    layer = neighbor_any(free) & ~free
    return default_tol(res.field.data[:, layer], spec.h, spec.dim_n)


def test_energy_examples():
    spec = GridSpec.unit(2, 1, H)
    zero = VectorField(spec, np.zeros((1,) + spec.shape))
    assert energy(zero).total == 0
    rep = energy(plane_field(spec))
    assert abs(rep.dirichlet_term - math.pi / 2) <= 0.02
    assert abs(rep.measure_term - math.pi / 2) <= 0.02
    assert abs(rep.total - math.pi) <= 0.04
    assert rep.total == rep.dirichlet_term + rep.measure_term
    rep2 = energy(plane_field(spec, slope=2.0))
    assert abs(rep2.dirichlet_term - 4 * math.pi / 2) <= 0.1


@pytest.mark.parametrize("n,m,N", [(2, 1, 32), (2, 2, 16), (3, 2, 8)])
def test_penalized_energy_matches_loop_oracle(n, m, N):
    spec = GridSpec.unit(n, m, 1 / N)
    U = VectorField(spec, np.random.default_rng(n * m).normal(size=(m,) + spec.shape))
    for delta in (0.05, 0.1, 1.0):
        rep = penalized_energy(U, delta)
        d, meas = penalized_energy_loops(U, delta)
        assert abs(rep.dirichlet_term - d) <= 1e-12 * max(d, 1.0)
        assert abs(rep.measure_term - meas) <= 1e-12


def test_penalized_energy_examples():
    spec = GridSpec.unit(2, 1, 1 / 64)
    zero = VectorField(spec, np.zeros((1,) + spec.shape))
    for delta in (0.01, 0.1, 1.0):
        assert penalized_energy(zero, delta).measure_term == 0
    # saturating field: |U| >= delta wherever it is positive
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    step = VectorField(spec, np.where(xn > 0, 0.5, 0.0)[None])
    count = np.count_nonzero((xn > 0) & free_nodes(spec))
    assert penalized_energy(step, 0.1).measure_term == spec.h**2 * count
    P = plane_field(spec)
    d, meas = penalized_energy_loops(P, 0.1)
    assert abs(penalized_energy(P, 0.1).measure_term - meas) <= 1e-12
    # deficit in the 0 < x_n < 0.1 strip keeps it below the half disk
    assert meas < math.pi / 2
    with pytest.raises(ValueError):
        penalized_energy(P, 0.0)


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 1.0))
def test_penalized_measure_bounds(seed, delta):
    spec = GridSpec.unit(2, 2, 1 / 16)
    U = VectorField(spec, np.random.default_rng(seed).normal(size=(2,) + spec.shape))
    pe = penalized_energy(U, delta)
    assert pe.dirichlet_term >= 0
    assert 0 <= pe.measure_term <= spec.h**2 * np.count_nonzero(free_nodes(spec)) + 1e-12
    # smaller delta saturates more
    assert penalized_energy(U, delta / 2).measure_term >= pe.measure_term - 1e-15


@pytest.mark.parametrize("sched", [(), (0.1, 0.2), (0.1, 0.1), (0.1, -0.05)])
def test_schedule_validation(sched):
    with pytest.raises(ValueError):
        MinimizeParams(continuation_schedule=sched)


def test_minimize_zero_data():
    spec = GridSpec.unit(2, 1, 1 / 64)
    fn, _ = boundary_family("zero")
    U = minimize(fn, spec)
    assert np.all(U.data == 0) and energy(U).total == 0


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown boundary family"):
        boundary_family("sphere")


def test_plane_minimizer(runs):
    res = runs.get("plane")
    U = res.field
    spec = U.spec
    cert = measure_flatness(U, None, 0.5)
    assert cert.epsilon <= 0.05
    # boundary layer untouched, bit for bit
    fn, _ = boundary_family("plane")
    phi = VectorField.from_function(spec, fn).data
    free = free_nodes(spec)
    assert np.array_equal(U.data[:, ~free], phi[:, ~free])
    # one-phase consistency
    assert U.data.min() >= -10 * _tol(res)
    # gradient condition on the free boundary
    assert fb_gradient_residual(U).sup <= 5 * math.sqrt(spec.h)
    # non-degeneracy surrogate
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    region = spec.ball_mask(None, 0.75) & (xn < -0.05)
    assert np.all(norm_field(U).values[region] == 0)


def test_descent_log_monotone(runs):
    res = runs.get("plane")
    assert res.energy_log
    by_stage = {}
    for delta, kind, e, ok in res.energy_log:
        if ok:
            by_stage.setdefault(delta, []).append(e)
    for es in by_stage.values():
        es = np.array(es)
        assert np.all(np.diff(es) <= 1e-12 * np.abs(es[:-1]))
    for st_ in res.stages:
        assert st_.energy_end <= st_.energy_start * (1 + 1e-12)


def test_two_component_minimizer(runs):
    th = 0.1
    res = runs.get("two-component", (th,))
    U = res.field
    assert U.spec.dim_m == 2
    tol = _tol(res)
    assert harmonic_residual_on_positivity(U) <= 10 * tol
    scalar = runs.get("plane").field
    # rotation in the target: |U| follows the scalar minimizer
    diff = np.abs(norm_field(U).values - norm_field(scalar).values)
    assert np.max(diff[U.spec.ball_mask(None, 0.75)]) <= 0.02
    # and the direction of U stays (cos th, sin th)
    pos = classify_regions(U).positivity
    cross = U.data[0] * math.sin(th) - U.data[1] * math.cos(th)
    assert np.max(np.abs(cross[pos])) <= 1e-8


def test_snapshot_boundary_is_extended():
    spec = GridSpec.unit(2, 1, 1 / 32)
    P = plane_field(spec)
    U = minimize(P, spec, MinimizeParams(coarse_start=False))
    free = free_nodes(spec)
    assert np.array_equal(U.data[:, ~free], P.data[:, ~free])
    assert measure_flatness(U, None, 0.5).epsilon <= 0.1
