"""Vectorial Alt-Caffarelli energy and discrete minimizers.

The solver minimizes the penalized energy

    E_d(U) = h^(n-2) * sum_{edges} |U_i - U_j|^2 + h^n * sum_{ball} beta_d(|U|),
    beta_d(s) = min(s / d, 1),

over the open unit ball with ``U`` fixed on the adjacent node layer.  Each
stage of the continuation schedule alternates active-set linear solves with
red-black nonlinear Gauss-Seidel sweeps; only energy-decreasing iterates are
accepted.  The final field is the harmonic sharpening of the last stage
(see :func:`minimize_detailed`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from scipy import ndimage

from .elliptic import (
    DirichletProblem,
    SolverError,
    _assemble,
    default_tol,
    prefer_direct,
    solve_harmonic,
)
from .grid import (
    GridSpec,
    VectorField,
    classify_regions,
    default_zero_tol,
    discrete_gradient,
    laplacian_array,
    neighbor_any,
    norm_field,
)

log = logging.getLogger(__name__)


class DivergenceError(SolverError):
    pass


@dataclass(frozen=True)
class EnergyReport:
    dirichlet_term: float
    measure_term: float

    @property
    def total(self):
        return self.dirichlet_term + self.measure_term

    def to_dict(self):
        return {
            "dirichlet_term": self.dirichlet_term,
            "measure_term": self.measure_term,
            "total": self.total,
        }


@dataclass(frozen=True)
class MinimizeParams:
    continuation_schedule: tuple = (0.2, 0.1, 0.05, 0.02)
    max_sweeps: int = 400
    max_active_set_iter: int = 60
    sharpen: bool = True
    tol: float | None = None
    coarse_start: bool = True

    def __post_init__(self):
        sched = tuple(float(d) for d in self.continuation_schedule)
        if not sched or any(d <= 0 for d in sched):
            raise ValueError("penalization widths must be positive")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("continuation schedule must be strictly decreasing")
        object.__setattr__(self, "continuation_schedule", sched)

    @property
    def delta(self):
        return self.continuation_schedule[-1]


def energy(U, x0=None, r=1.0, zero_tol=None):
    """Dirichlet and measure terms over the nodes of the closed ball ``B_r(x0)``.

    Gradients are centred differences; each node carries weight ``h^n``.
    """
    spec = U.spec
    spec.check_ball(x0, r)
    ball = spec.ball_mask(x0, r)
    if zero_tol is None:
        zero_tol = default_zero_tol(U)
    w = spec.h**spec.dim_n
    dir_term = 0.0
    for comp in U.components:
        g = discrete_gradient(comp)
        dir_term += float(np.sum(g[:, ball] ** 2))
    mag = norm_field(U).values
    meas = float(np.count_nonzero(mag[ball] > zero_tol))
    return EnergyReport(w * dir_term, w * meas)


def beta(s, delta):
    return np.minimum(s / delta, 1.0)


def free_nodes(spec):
    return spec.ball_mask(strict=True)


def _edge_dirichlet(data, free, h):
    n = free.ndim
    total = 0.0
    for k in range(n):
        hi = [slice(None)] * n
        lo = [slice(None)] * n
        hi[k] = slice(1, None)
        lo[k] = slice(None, -1)
        touch = free[tuple(hi)] | free[tuple(lo)]
        diff = data[(slice(None),) + tuple(hi)] - data[(slice(None),) + tuple(lo)]
        total += float(np.sum((diff**2)[:, touch]))
    return h ** (n - 2) * total


def penalized_energy(U, delta, free=None):
    """Energy with the positivity indicator replaced by ``min(|U|/delta, 1)``.

    The Dirichlet term is the edge sum the descent actually minimizes: every
    grid edge with an endpoint in the open unit ball contributes
    ``h^(n-2) |U_i - U_j|^2``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    spec = U.spec
    free = free_nodes(spec) if free is None else free
    mag = norm_field(U).values
    meas = spec.h**spec.dim_n * float(np.sum(beta(mag[free], delta)))
    return EnergyReport(_edge_dirichlet(U.data, free, spec.h), meas)


# -- boundary data ----------------------------------------------------------

FAMILIES = ("zero", "plane", "tilted-plane", "two-component", "perturbed-plane")


def _pos(v):
    return np.maximum(v, 0.0)


def boundary_family(name, params=(), dim_m=None):
    """Analytic boundary data as ``(fn, dim_m)``; ``fn(*mesh)`` returns components.

    ``plane``                   f1 * x_n^+
    ``tilted-plane th``         f1 * <x, nu>^+ with nu = (sin th, 0, .., cos th)
    ``two-component th``        (cos th, sin th) * x_n^+
    ``perturbed-plane A,k``     f1 * (x_n + A Re((x_1 + i x_n)^k))^+
    ``zero``                    0
    """
    params = tuple(float(p) for p in params)
    if name == "zero":
        m = dim_m or 1
        return (lambda *x: [np.zeros(np.broadcast(*x).shape)] * m), m
    if name == "plane":
        m = dim_m or 1
        return _embed(lambda *x: _pos(x[-1]), m), m
    if name == "tilted-plane":
        (th,) = params or (0.0,)
        m = dim_m or 1
        return _embed(lambda *x: _pos(np.sin(th) * x[0] + np.cos(th) * x[-1]), m), m
    if name == "two-component":
        (th,) = params or (0.0,)
        m = max(dim_m or 2, 2)

        def fn(*x):
            base = _pos(x[-1])
            comps = [np.cos(th) * base, np.sin(th) * base]
            return comps + [np.zeros_like(base)] * (m - 2)

        return fn, m
    if name == "perturbed-plane":
        amp, mode = params if len(params) == 2 else (0.02, 1)
        mode = int(mode)
        m = dim_m or 1

        def scalar(*x):
            z = (x[0] + 1j * x[-1]) ** mode
            return _pos(x[-1] + amp * np.real(z))

        return _embed(scalar, m), m
    raise ValueError(f"unknown boundary family {name!r}; choose from {FAMILIES}")


def _embed(scalar, m):
    def fn(*x):
        base = scalar(*x)
        base = np.broadcast_to(base, np.broadcast(*x).shape)
        return [base] + [np.zeros(base.shape)] * (m - 1)

    return fn


def sample_boundary(spec, phi):
    """Full-grid samples of the boundary data (callable or VectorField)."""
    if isinstance(phi, VectorField):
        if phi.spec.shape != spec.shape:
            raise ValueError("boundary snapshot grid does not match")
        return np.array(phi.data)
    return np.array(VectorField.from_function(spec, phi).data)


# -- descent ----------------------------------------------------------------


@dataclass
class StageReport:
    delta: float
    energy_start: float
    energy_end: float
    iterations: int
    accepted_solves: int
    gs_sweeps: int
    stationarity: float


@dataclass
class MinimizeResult:
    field: VectorField
    penalized: VectorField
    energy_log: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    harmonic_residual: float = 0.0


class _Descent:
    """Penalized descent state on the free (open-ball) nodes."""

    def __init__(self, spec, data, free):
        self.spec = spec
        self.h = spec.h
        self.n = spec.dim_n
        self.U = data
        self.free = free
        parity = np.indices(spec.shape).sum(axis=0) % 2
        self.colors = [free & (parity == c) for c in (0, 1)]
        self.log = []

    def energy(self, delta, U=None):
        U = self.U if U is None else U
        mag = np.sqrt(np.sum(U**2, axis=0))
        meas = self.h**self.n * float(np.sum(beta(mag[self.free], delta)))
        return _edge_dirichlet(U, self.free, self.h) + meas

    def neighbor_mean(self, U=None):
        U = self.U if U is None else U
        return np.stack([laplacian_array(c, 1.0) / (2 * self.n) + c for c in U])

    def local_minimizer(self, ubar, delta):
        """Exact minimizer of ``2n|v - ubar|^2 + h^2 beta(|v|)`` and its branch.

        Branch codes: 0 zero, 1 layer (0 < |v| < delta), 2 pinned at
        ``|v| = delta``, 3 harmonic.
        """
        a = np.sqrt(np.sum(ubar**2, axis=0))
        c = self.h**2 / (4 * self.n * delta)
        n2 = 2 * self.n
        h2 = self.h**2
        s1 = np.clip(a - c, 0.0, delta)
        cost1 = n2 * (s1 - a) ** 2 + h2 * s1 / delta
        s2 = np.maximum(a, delta)
        cost2 = n2 * (s2 - a) ** 2 + h2
        use_h = cost2 < cost1
        s = np.where(use_h, s2, s1)
        branch = np.where(
            use_h,
            np.where(s2 > a, 2, 3),
            np.where(s1 <= 0, 0, np.where(s1 >= delta, 2, 1)),
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.where(a > 0, ubar / np.where(a > 0, a, 1.0), 0.0)
        return s * d, branch, d

    def gs_sweep(self, delta):
        for mask in self.colors:
            ubar = self.neighbor_mean()
            v, _, _ = self.local_minimizer(ubar[:, mask], delta)
            self.U[:, mask] = v

    def stationarity(self, delta):
        ubar = self.neighbor_mean()
        v, _, _ = self.local_minimizer(ubar[:, self.free], delta)
        return float(np.max(np.abs(v - self.U[:, self.free]), initial=0.0))

    def active_set_candidate(self, delta):
        """Solve the linear system of the current branch pattern."""
        ubar = self.neighbor_mean()
        v, branch, d = self.local_minimizer(ubar, delta)
        branch = np.where(self.free, branch, -1)
        layer_rhs = (branch == 1) & self.free
        unknown = layer_rhs | (self.free & (branch == 3))
        if not unknown.any():
            return None, branch
        cand = self.U.copy()
        fixed_zero = self.free & (branch == 0)
        pinned = self.free & (branch == 2)
        A = None
        out = []
        for i in range(cand.shape[0]):
            fixed = cand[i].copy()
            fixed[fixed_zero] = 0.0
            fixed[pinned] = v[i][pinned]
            if A is None:
                A, b0, idx = _assemble(unknown, fixed)
                solve = (
                    spla.splu(A).solve
                    if prefer_direct(idx.size, self.n)
                    else (lambda rhs, A=A: spla.cg(A, rhs, rtol=1e-12)[0])
                )
            else:
                _, b0, _ = _assemble(unknown, fixed)
            f = np.where(layer_rhs, d[i], 0.0)[unknown]
            b = b0 - self.h**2 * f / (2 * delta)
            x = solve(b)
            comp = fixed
            comp.ravel()[idx] = x
            out.append(comp)
        cand = np.stack(out)
        # layer nodes whose solved value turned against the descent direction
        # belong to the zero set; projecting them keeps the candidate useful
        flipped = layer_rhs & (np.sum(cand * d, axis=0) <= 0)
        cand[:, flipped] = 0.0
        return cand, branch

    def _line_search(self, delta, cand, e):
        step = cand - self.U
        for t in (1.0, 0.5, 0.25, 0.125):
            trial = self.U + t * step
            ec = self.energy(delta, trial)
            ok = ec <= e
            self.log.append((delta, "active-set", ec, bool(ok)))
            if ok:
                self.U = trial
                return True
        return False

    def run_stage(self, delta, params):
        e0 = self.energy(delta)
        e = e0
        self.log.append((delta, "start", e0, True))
        scale = max(float(np.max(np.abs(self.U))), 1e-300)
        prev_branch = None
        accepted = sweeps = it = stalls = 0
        e_prev = e
        for it in range(1, params.max_active_set_iter + 1):
            cand, branch = self.active_set_candidate(delta)
            if cand is not None and self._line_search(delta, cand, e):
                e = self.log[-1][2]
                accepted += 1
            for _ in range(4):
                self.gs_sweep(delta)
                sweeps += 1
            en = self.energy(delta)
            if en > e * (1 + 1e-13) + 1e-300:
                raise DivergenceError(f"energy increased during sweeps at delta={delta}")
            self.log.append((delta, "sweep", en, True))
            gain = e_prev - en
            e_prev = e = en
            st = self.stationarity(delta)
            same = prev_branch is not None and np.array_equal(branch, prev_branch)
            if same and st <= 1e-11 * scale:
                break
            # a lattice-pinned zero front only unzips a couple of nodes per
            # iteration; stop once the gain is below one node's measure weight
            slow = gain <= self.h**self.n
            stalls = stalls + 1 if slow else 0
            if stalls >= 2:
                break
            prev_branch = branch
            if sweeps >= params.max_sweeps and st <= 1e-9 * scale:
                break
        if not np.isfinite(e) or e > e0 * (1 + 1e-12):
            raise DivergenceError(f"penalized energy increased over stage delta={delta}")
        return StageReport(delta, e0, e, it, accepted, sweeps, self.stationarity(delta))


def _coarse_spec(spec, min_per_unit=64):
    """Half-resolution standard grid, or None when not worth it."""
    per_unit = round(1.0 / spec.h)
    if per_unit % 2 or per_unit // 2 < min_per_unit:
        return None
    try:
        pad = round(-spec.lo[0] / spec.h) - per_unit
        std = GridSpec.unit(spec.dim_n, spec.dim_m, spec.h, pad)
    except ValueError:
        return None
    if std != spec or pad % 2:
        return None
    return GridSpec.unit(spec.dim_n, spec.dim_m, 2 * spec.h, pad // 2)


def _prolong(U, spec):
    """Multilinear interpolation of ``U`` onto the nodes of ``spec``."""
    src = U.spec
    idx = [
        ((ax - lo) / src.h).reshape([-1 if j == k else 1 for j in range(spec.dim_n)])
        for k, (ax, lo) in enumerate(zip(spec.axes(), src.lo))
    ]
    coords = np.stack(np.broadcast_arrays(*idx))
    out = [ndimage.map_coordinates(c, coords, order=1, mode="nearest") for c in U.data]
    return VectorField(spec, np.stack(out))


def _initial_guess(spec, phi_vals, free, tol):
    out = phi_vals.copy()
    layer = neighbor_any(free) & ~free
    for i in range(out.shape[0]):
        bv = np.where(layer, phi_vals[i], np.nan)
        prob = DirichletProblem(spec.with_m(1), free, bv)
        out[i] = np.nan_to_num(solve_harmonic(prob, tol=tol).values)
    return out


def minimize_detailed(phi, spec, params=None, init=None):
    """Continuation descent for the penalized energy plus harmonic sharpening.

    ``phi`` is a callable ``fn(*mesh)`` or a VectorField whose values on the
    node layer just outside the unit ball are the boundary data.  A callable
    is also used as the initial guess; a snapshot is harmonically extended.
    With ``params.coarse_start`` a callable is first run through the whole
    schedule on the half-resolution grid (recursively, down to h = 1/64) and
    only the last stage is repeated here, starting from the interpolant.

    The returned :class:`MinimizeResult` keeps the penalized critical point of
    the last stage in ``penalized``.  ``field`` is its sharpening: harmonic on
    ``{|U| > delta/4}``, zero elsewhere in the ball, equal to ``phi`` on the
    layer.  The ``delta/4`` level is where the one-dimensional penalized
    profile ``(x + delta)^2 / (4 delta)`` crosses the sharp plane's zero.
    """
    params = params or MinimizeParams()
    spec = spec.with_m(spec.dim_m)
    phi_vals = sample_boundary(spec, phi)
    spec = spec.with_m(phi_vals.shape[0])
    free = free_nodes(spec)
    layer = neighbor_any(free) & ~free
    tol = params.tol if params.tol is not None else default_tol(
        phi_vals[:, layer], spec.h, spec.dim_n
    )
    schedule = params.continuation_schedule
    coarse = _coarse_spec(spec) if params.coarse_start else None
    if init is None and coarse is not None and not isinstance(phi, VectorField):
        # continuation on the half-resolution grid, then the last stage here
        sub = MinimizeParams(
            schedule, params.max_sweeps, params.max_active_set_iter, False, None, True
        )
        init = _prolong(minimize_detailed(phi, coarse, sub).penalized, spec)
        schedule = schedule[-1:]
    if init is not None:
        data = np.array(init.data)
        data[:, ~free] = phi_vals[:, ~free]
    elif isinstance(phi, VectorField):
        data = _initial_guess(spec, phi_vals, free, tol)
    else:
        data = phi_vals.copy()
    if not np.any(data[:, layer]):
        zero = VectorField(spec, np.where(free, 0.0, phi_vals))
        return MinimizeResult(zero, zero, [], [], 0.0)

    desc = _Descent(spec, data, free)
    stages = []
    for delta in schedule:
        stages.append(desc.run_stage(delta, params))
        log.debug("stage %s", stages[-1])
    penalized = VectorField(spec, desc.U.copy())
    if not params.sharpen:
        return MinimizeResult(penalized, penalized, desc.log, stages, float("nan"))

    mag = np.sqrt(np.sum(desc.U**2, axis=0))
    omega = free & (mag > params.delta / 4)
    sharp = np.where(free, 0.0, phi_vals)
    res = 0.0
    if omega.any():
        for i in range(sharp.shape[0]):
            bv = np.where(free & ~omega, 0.0, phi_vals[i])
            sol = solve_harmonic(DirichletProblem(spec.with_m(1), omega, bv), tol=tol)
            sharp[i] = sol.values
            res = max(res, _harmonic_residual(sharp[i], omega, spec.h))
    return MinimizeResult(VectorField(spec, sharp), penalized, desc.log, stages, res)


def _harmonic_residual(v, region, h):
    return float(np.max(np.abs(laplacian_array(v, h)[region]), initial=0.0))


def minimize(phi, spec, params=None):
    """Discrete minimizer for boundary data ``phi``; see :func:`minimize_detailed`."""
    return minimize_detailed(phi, spec, params).field


def harmonic_residual_on_positivity(U, zero_tol=None):
    """Largest discrete Laplacian of any component over the positivity set."""
    masks = classify_regions(U, zero_tol)
    return max(
        _harmonic_residual(c, masks.positivity, U.spec.h) for c in U.data
    )
