"""Harmonic solves on masked node sets, rescaling, and the linearized system.

All linear solves use the (2n+1)-point stencil.  Boundary values are imposed
on the layer of grid nodes adjacent to the region, never on curved surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from .grid import GridSpec, ScalarField, VectorField, laplacian_array, neighbor_any

DIRECT_LIMIT = 600_000
DIRECT_LIMIT_3D = 5_000


def prefer_direct(num_unknowns, dim_n):
    """LU fill-in is mild in 2D but grows fast in 3D."""
    return num_unknowns <= (DIRECT_LIMIT if dim_n == 2 else DIRECT_LIMIT_3D)


class SolverError(RuntimeError):
    """Raised when an iterative solve stalls; carries the final residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


def default_tol(values, h, n):
    """Residual tolerance scaled by the data, floored at stencil round-off.

    The sup-norm of a scaled residual cannot drop below roughly
    ``eps * 2n * max|g| / h^2``.
    """
    values = np.asarray(values, float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return 1e-10
    osc = float(values.max() - values.min())
    big = float(np.abs(values).max())
    floor = 64 * np.finfo(float).eps * 2 * n * max(big, 1.0) / (h * h)
    return max(1e-10 * osc, floor)


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """Find ``u`` with discrete Laplacian zero on ``region``.

    ``boundary_values`` is a full-grid array; only its entries on the layer of
    nodes adjacent to the region are read, and those must be finite.
    """

    spec: GridSpec
    region: np.ndarray
    boundary_values: np.ndarray

    def __post_init__(self):
        region = np.asarray(self.region, bool)
        bv = np.asarray(self.boundary_values, float)
        if region.shape != self.spec.shape or bv.shape != self.spec.shape:
            raise ValueError("region/boundary arrays must match the grid shape")
        object.__setattr__(self, "region", region)
        object.__setattr__(self, "boundary_values", bv)

    @property
    def layer(self):
        return neighbor_any(self.region) & ~self.region

    def validate(self):
        region = self.region
        if not region.any():
            raise ValueError("empty region")
        edge = np.zeros_like(region)
        for k in range(region.ndim):
            sl = [slice(None)] * region.ndim
            sl[k] = 0
            edge[tuple(sl)] = True
            sl[k] = -1
            edge[tuple(sl)] = True
        if (region & edge).any():
            raise ValueError("region touches the box edge; stencil incomplete")
        layer = self.layer
        good = layer & np.isfinite(self.boundary_values)
        if not good.any():
            raise ValueError("region has no boundary layer with finite data")
        # every connected piece of the region must reach usable boundary data
        labels, count = ndimage.label(region)
        touching = np.unique(labels[neighbor_any(good) & region])
        if len(set(touching) - {0}) != count:
            raise ValueError("disconnected region nodes: some component has no boundary data")
        if (layer & ~np.isfinite(self.boundary_values)).any():
            raise ValueError("boundary value missing on the region's boundary layer")


def _assemble(region, fixed, reflect_index=None):
    """Unscaled system ``2n u_i - sum_j u_j = sum_{fixed j} g_j``.

    With ``reflect_index`` set, a neighbour below that index on the last axis
    is replaced by its mirror image (ghost-node Neumann condition).
    """
    shape = region.shape
    n = region.ndim
    flat_region = region.ravel()
    unknown = np.flatnonzero(flat_region)
    idx = -np.ones(flat_region.size, dtype=np.int64)
    idx[unknown] = np.arange(unknown.size)
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(n)])
    last = np.unravel_index(unknown, shape)[-1]
    fixed_flat = fixed.ravel()

    rows = [np.arange(unknown.size)]
    cols = [np.arange(unknown.size)]
    vals = [np.full(unknown.size, 2.0 * n)]
    rhs = np.zeros(unknown.size)
    for k in range(n):
        for step in (-1, 1):
            nb = unknown + step * strides[k]
            if reflect_index is not None and k == n - 1 and step == -1:
                mirror = last <= reflect_index
                nb = np.where(mirror, unknown + strides[k], nb)
            j = idx[nb]
            inside = j >= 0
            rows.append(np.flatnonzero(inside))
            cols.append(j[inside])
            vals.append(-np.ones(int(inside.sum())))
            rhs[~inside] += fixed_flat[nb[~inside]]
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(unknown.size, unknown.size),
    )
    return A, rhs, unknown


def _sup(a):
    return float(np.max(np.abs(a), initial=0.0))


def _solve_direct(A, b, h, tol, refine=3):
    lu = spla.splu(A)
    x = lu.solve(b)
    res = _sup(b - A @ x) / h**2
    for _ in range(refine):
        if res <= tol:
            break
        x = x + lu.solve(b - A @ x)
        res = _sup(b - A @ x) / h**2
    return x, res


def _solve_cg(A, b, h, tol, max_iter, x0=None):
    x, _ = spla.cg(A, b, x0=x0, rtol=0.0, atol=0.25 * tol * h * h, maxiter=max_iter)
    return x, _sup(b - A @ x) / h**2


def _solve_sor(problem, tol, max_iter, omega=None, check_every=10):
    spec = problem.spec
    h, n = spec.h, spec.dim_n
    region = problem.region
    u = np.where(region, 0.0, np.nan_to_num(problem.boundary_values))
    layer_vals = problem.boundary_values[problem.layer]
    u[region] = float(np.mean(layer_vals))
    if omega is None:
        pts = np.argwhere(region)
        extent = (pts.max(axis=0) - pts.min(axis=0)).max() + 2
        omega = 2.0 / (1.0 + np.sin(np.pi / extent))
    parity = np.indices(spec.shape).sum(axis=0) % 2
    colors = [region & (parity == c) for c in (0, 1)]
    res = np.inf
    for it in range(1, max_iter + 1):
        for mask in colors:
            gs = laplacian_array(u, 1.0)[mask] / (2 * n) + u[mask]
            u[mask] += omega * (gs - u[mask])
        if it % check_every == 0 or it == max_iter:
            res = _sup(laplacian_array(u, h)[region])
            if res <= tol:
                return u, res, it
    raise SolverError(f"SOR did not converge in {max_iter} sweeps", res)


def solve_harmonic(problem, tol=None, max_iter=10**6, method="auto", omega=None):
    """Discrete-harmonic extension of the boundary data into ``problem.region``.

    ``method`` is ``"direct"`` (sparse LU), ``"sor"`` (red-black SOR) or
    ``"cg"``; ``"auto"`` picks LU for moderate systems (see
    :func:`prefer_direct`) and CG above.  Raises :class:`SolverError` if
    the scaled residual stays above ``tol``.
    """
    problem.validate()
    spec = problem.spec
    h = spec.h
    if tol is None:
        tol = default_tol(problem.boundary_values[problem.layer], h, spec.dim_n)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "sor":
        u, _, _ = _solve_sor(problem, tol, max_iter, omega)
        out = problem.boundary_values.copy()
        out[problem.region] = u[problem.region]
        return ScalarField(spec.with_m(1), out)
    fixed = np.nan_to_num(problem.boundary_values)
    A, b, unknown = _assemble(problem.region, fixed)
    if method == "auto":
        method = "direct" if prefer_direct(unknown.size, spec.dim_n) else "cg"
    if method == "direct":
        x, res = _solve_direct(A, b, h, tol)
    elif method == "cg":
        x, res = _solve_cg(A, b, h, tol, max_iter)
        if res > tol and unknown.size <= DIRECT_LIMIT:
            x, res = _solve_direct(A, b, h, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res > tol:
        raise SolverError(f"residual {res:.3e} above tolerance {tol:.3e}", res)
    out = problem.boundary_values.copy()
    out.ravel()[unknown] = x
    return ScalarField(spec.with_m(1), out)


def rescale(U, x0=None, r=1.0):
    """``U_r(x) = U(r x + x0) / r`` resampled on the same grid.

    Values come from multilinear interpolation; points mapped outside the box
    take the nearest edge value and carry no meaning beyond ``B_1``.
    """
    if not r > 0:
        raise ValueError("rescale radius must be positive")
    spec = U.spec
    x0 = np.zeros(spec.dim_n) if x0 is None else np.asarray(x0, float)
    spec.check_ball(x0, r)
    per_axis = [(r * ax + c - lo) / spec.h for ax, c, lo in zip(spec.axes(), x0, spec.lo)]
    coords = np.stack(np.meshgrid(*per_axis, indexing="ij"))
    data = np.stack([
        ndimage.map_coordinates(c, coords, order=1, mode="nearest", prefilter=False)
        for c in U.data
    ]) / r
    return VectorField(spec, data)


@dataclass(frozen=True)
class LinearizedProblem:
    """Decoupled half-ball system: Neumann for one component, zero trace for the rest.

    ``dirichlet_data`` holds one callable per component, ``fn(*mesh)``, giving
    the values imposed on the spherical part of the boundary.
    """

    dirichlet_data: tuple
    half_ball_radius: float = 0.5
    neumann_component_index: int = 0

    @property
    def dim_m(self):
        return len(self.dirichlet_data)


def linearized_domain(spec, radius=0.5, neumann=True):
    """Unknown nodes of one component: open half ball, plus the flat face when Neumann."""
    xn = spec.mesh()[-1]
    r2 = spec.radius2()
    inside = r2 < radius * radius - 1e-12
    return inside & (xn >= -1e-12 if neumann else xn > 1e-12)


def _plane_index(spec):
    j0 = -spec.lo[-1] / spec.h
    if abs(j0 - round(j0)) > 1e-9:
        raise ValueError("grid has no node layer on x_n = 0")
    return int(round(j0))


@dataclass
class LinearizedSolution:
    field: VectorField
    residuals: list = field(default_factory=list)
    domains: list = field(default_factory=list)


def solve_linearized(problem, spec, tol=None, return_details=False):
    """Solve the half-ball system component by component.

    The Neumann component uses ghost-node reflection across ``{x_n = 0}``;
    the others are pinned to zero there.  Components never see each other's
    data.
    """
    j0 = _plane_index(spec)
    R = problem.half_ball_radius
    h, n = spec.h, spec.dim_n
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    on_plane = np.abs(xn) < 1e-12
    out = np.zeros((problem.dim_m,) + spec.shape)
    residuals, domains = [], []
    for i, fn in enumerate(problem.dirichlet_data):
        neumann = i == problem.neumann_component_index
        region = linearized_domain(spec, R, neumann)
        data = np.array(np.broadcast_to(fn(*spec.mesh()), spec.shape), dtype=float)
        if not neumann:
            data[on_plane] = 0.0
        layer = neighbor_any(region) & ~region
        if neumann:
            layer &= xn > -1e-12
        ctol = tol if tol is not None else default_tol(data[layer], h, n)
        A, b, unknown = _assemble(region, data, reflect_index=j0 if neumann else None)
        x, res = _solve_direct(A, b, h, ctol)
        if res > ctol:
            raise SolverError(f"linearized component {i + 1}: residual {res:.3e}", res)
        comp = np.zeros(spec.shape)
        comp[layer] = data[layer]
        if not neumann:
            comp[on_plane & (spec.radius2() <= R * R)] = 0.0
        comp.ravel()[unknown] = x
        out[i] = comp
        residuals.append(res)
        domains.append(region)
    U = VectorField(spec.with_m(problem.dim_m), out)
    if return_details:
        return LinearizedSolution(U, residuals, domains)
    return U


class NotTouchingError(ValueError):
    pass


@dataclass(frozen=True)
class Quadratic:
    """``P(x) = c + <b, x - x_c> + (x - x_c)^T A (x - x_c)`` with ``A`` symmetric."""

    c: float
    b: tuple
    A: tuple
    center: tuple

    @classmethod
    def make(cls, c, b, A=None, center=None):
        b = np.asarray(b, float)
        n = b.size
        A = np.zeros((n, n)) if A is None else np.asarray(A, float)
        center = np.zeros(n) if center is None else np.asarray(center, float)
        A = 0.5 * (A + A.T)
        return cls(float(c), tuple(b), tuple(map(tuple, A)), tuple(center))

    def __call__(self, *mesh):
        b = np.asarray(self.b)
        A = np.asarray(self.A)
        d = [m - xc for m, xc in zip(mesh, self.center)]
        out = self.c + sum(bi * di for bi, di in zip(b, d))
        for i in range(len(d)):
            for j in range(len(d)):
                if A[i, j] != 0.0:
                    out = out + A[i, j] * d[i] * d[j]
        return out

    def laplacian(self):
        return 2.0 * float(np.trace(np.asarray(self.A)))

    def gradient(self, x):
        return np.asarray(self.b) + 2.0 * np.asarray(self.A) @ (
            np.asarray(x, float) - np.asarray(self.center)
        )

    def curvature_bound(self):
        return float(np.max(np.abs(np.linalg.eigvalsh(np.asarray(self.A)))))


@dataclass(frozen=True)
class LinearizedVerdict:
    passed: bool
    location: str  # "interior" or "boundary"
    side: str
    quantity: str  # "laplacian" or "normal_derivative"
    value: float


def viscosity_touch_test_linearized(u1, P, xbar, side, radius=None, half_ball_radius=0.5):
    """Check the viscosity Neumann condition for one touching polynomial.

    Touching is tested on closed-half-ball nodes within ``radius`` (default
    ``2h``) of ``xbar`` with slack ``4 h^2`` times the curvature bound of ``P``.
    Interior contact tests the sign of the Laplacian of ``P``; contact on the
    flat face tests the sign of its normal derivative.
    """
    if side not in ("below", "above"):
        raise ValueError("side must be 'below' or 'above'")
    spec = u1.spec
    h = spec.h
    radius = 2 * h if radius is None else radius
    idx = spec.node_index(xbar)
    xnode = spec.node_point(idx)
    if np.linalg.norm(xnode - np.asarray(xbar, float)) > 1e-9:
        raise NotTouchingError("not a touching pair: xbar is not a grid node")
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    hood = (
        (spec.radius2(xnode) <= radius * radius + 1e-12)
        & (spec.radius2() <= half_ball_radius**2 + 1e-12)
        & (xn >= -1e-12)
    )
    pv = np.broadcast_to(P(*spec.mesh()), spec.shape)
    u = u1.values
    scale = max(1.0, _sup(u[hood]))
    tau = 4 * h * h * P.curvature_bound() + 1e-12 * scale
    gap = (u - pv)[hood] if side == "below" else (pv - u)[hood]
    if abs(pv[idx] - u[idx]) > tau or gap.min() < -tau:
        raise NotTouchingError("not a touching pair")
    if xnode[-1] > 0.5 * h:
        lap = P.laplacian()
        ok = lap <= 0 if side == "below" else lap >= 0
        return LinearizedVerdict(bool(ok), "interior", side, "laplacian", lap)
    pn = float(P.gradient(xnode)[-1])
    ok = pn <= 0 if side == "below" else pn >= 0
    return LinearizedVerdict(bool(ok), "boundary", side, "normal_derivative", pn)
