"""Free boundary conditions in the viscosity and the pointwise sense."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import ScalarField, classify_regions, norm_field
from .anchors import ANCHORS
from .flatness import direction_lattice

BELOW_SLOPES = (1.1, 2.0)
ABOVE_SLOPES = (0.1, 0.9)


@dataclass
class ViscosityReport:
    violations: list = field(default_factory=list)
    violation_count: int = 0
    points_tested: int = 0
    probes_per_point: int = 0
    probe_budget: int = 0
    seed: int = 0
    curvature_bound: float = 0.0
    touch_tol: float = 0.0
    neighborhood_radius: float = 0.0

    @property
    def passed(self):
        return self.violation_count == 0

    def to_dict(self):
        return {
            "passed": self.passed,
            "violations": self.violations,
            "violation_count": self.violation_count,
            "points_tested": self.points_tested,
            "probes_per_point": self.probes_per_point,
            "probe_budget": self.probe_budget,
            "seed": self.seed,
            "curvature_bound": self.curvature_bound,
            "touch_tol": self.touch_tol,
            "neighborhood_radius": self.neighborhood_radius,
            "above_test_region": "positivity set and free boundary",
            "paper_anchor": ANCHORS["viscosity"],
        }


def _random_probes(rng, count, n, slopes, K):
    w = rng.normal(size=(count, n))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    s = rng.uniform(slopes[0], slopes[1], size=count)
    A = rng.normal(size=(count, n, n))
    Q = 0.5 * (A + A.transpose(0, 2, 1))
    norms = np.linalg.norm(Q, ord=2, axis=(1, 2))
    Q *= (K * rng.uniform(0, 1, size=count) / np.where(norms > 0, norms, 1))[:, None, None]
    return w, s, Q


def _structured_probes(normal, slopes, K):
    n = len(normal)
    I = np.eye(n)
    ws, ss, Qs = [], [], []
    for s in np.linspace(slopes[0], slopes[1], 3):
        for q in (0.0, K, -K):
            ws.append(normal)
            ss.append(s)
            Qs.append(q * I)
    return np.array(ws), np.array(ss), np.array(Qs)


def _stack(a, b):
    return [np.concatenate(z) for z in zip(a, b)]


def _probe_values(Y, w, s, Q):
    """phi_p(y) for every probe p (rows) and offset y (columns)."""
    lin = s[:, None] * (w @ Y.T)
    quad = np.einsum("ki,pij,kj->pk", Y, Q, Y)
    return lin + quad


def _local_fit(Y, mag, pos):
    """Unit normal and sub-grid zero of a least-squares affine fit of |U|.

    Returns ``(normal, anchor)`` where ``anchor`` is the offset from the node
    to the point where the fitted plane vanishes along its gradient.  Falls
    back to ``(e_n, 0)`` when the fit is underdetermined.
    """
    n = Y.shape[1]
    if np.count_nonzero(pos) >= n + 1:
        A = np.column_stack([Y[pos], np.ones(np.count_nonzero(pos))])
        coef, _, rank, _ = np.linalg.lstsq(A, mag[pos], rcond=None)
        g, a = coef[:-1], coef[-1]
        gn = np.linalg.norm(g)
        if rank == n + 1 and gn > 0:
            return g / gn, -a * g / gn**2
    e = np.zeros(n)
    e[-1] = 1.0
    return e, np.zeros(n)


def viscosity_check(
    U,
    fb_points=None,
    probe_budget=64,
    seed=0,
    curvature_bound=0.25,
    radius=None,
    n_f=64,
    max_reported=50,
    zero_tol=None,
):
    """Search quadratic probes that touch ``<U, f>`` from below with slope > 1
    or ``|U|`` from above with slope < 1 at free boundary nodes.

    ``fb_points`` is an index array (k, n) or boolean mask; default is every
    free boundary node.  Each point gets nine structured probes per
    condition (local normal, three slopes, curvature 0 or +-K) plus
    ``probe_budget`` random probes per condition drawn from ``seed``.
    A probe touches when it stays within ``4 h^2 K`` of the target on the
    neighbourhood (radius ``4h`` by default).  Touching from above is tested
    on the positivity set and free boundary only.

    Free boundary nodes sit on the zero side, up to one spacing away from
    the interface, so probes are anchored at the sub-grid point where the
    local affine fit of ``|U|`` vanishes (exact for one-plane solutions).
    """
    spec = U.spec
    h = spec.h
    masks = classify_regions(U, zero_tol)
    if fb_points is None:
        idx = np.argwhere(masks.free_boundary)
    else:
        fb = np.asarray(fb_points)
        idx = np.argwhere(fb) if fb.dtype == bool else fb.astype(int).reshape(-1, spec.dim_n)
    K = float(curvature_bound)
    tau = 4 * h * h * K
    radius = 4 * h if radius is None else float(radius)
    reach = int(np.floor(radius / h + 1e-9))
    offs = np.array(
        [o for o in np.ndindex(*(2 * reach + 1,) * spec.dim_n)]
    ) - reach
    offs = offs[np.sum(offs**2, axis=1) * h * h <= radius * radius + 1e-12]
    Y = offs * h
    mag = norm_field(U).values
    support = masks.positivity | masks.free_boundary
    Fdirs = direction_lattice(spec.dim_m, n_f)
    rng = np.random.default_rng(seed)
    below_rand = _random_probes(rng, probe_budget, spec.dim_n, BELOW_SLOPES, K)
    above_rand = _random_probes(rng, probe_budget, spec.dim_n, ABOVE_SLOPES, K)

    report = ViscosityReport(
        points_tested=len(idx), probes_per_point=2 * (probe_budget + 9),
        probe_budget=probe_budget, seed=seed, curvature_bound=K, touch_tol=tau,
        neighborhood_radius=radius,
    )
    shape = np.array(spec.shape)
    for p in idx:
        nb = p + offs
        ok = np.all((nb >= 0) & (nb < shape), axis=1)
        nbt = tuple(nb[ok].T)
        Yp = Y[ok]
        Vp = U.data[(slice(None),) + nbt].T
        Mp = mag[nbt]
        Sp = support[nbt]
        normal, anchor = _local_fit(Yp, Mp, masks.positivity[nbt])
        if np.linalg.norm(anchor) > h:
            anchor = np.zeros(spec.dim_n)
        Ya = Yp - anchor
        point = tuple(float(v) for v in spec.node_point(p) + anchor)

        # condition (1): phi <= <U, f> + tau near the anchor
        w, s, Q = _stack(_structured_probes(normal, BELOW_SLOPES, K), below_rand)
        phi = _probe_values(Ya, w, s, Q)
        # <U, f> <= |U|: probes above |U| touch no <U, f>
        alive = np.max(phi - Mp[None, :], axis=1) <= tau
        if alive.any():
            G = Vp @ Fdirs.T
            for k in np.flatnonzero(alive):
                gap = np.max(phi[k][:, None] - G, axis=0)
                hit = np.flatnonzero(gap <= tau)
                if hit.size:
                    report.violation_count += 1
                    if len(report.violations) < max_reported:
                        report.violations.append({
                            "condition": "below", "point": list(point),
                            "slope": float(s[k]), "direction": w[k].tolist(),
                            "f": Fdirs[hit[0]].tolist(), "gap": float(gap[hit[0]]),
                        })
                    break

        # condition (2): phi >= |U| - tau on the positivity set and F(U)
        w, s, Q = _stack(_structured_probes(normal, ABOVE_SLOPES, K), above_rand)
        phi = _probe_values(Ya, w, s, Q)
        gap = np.max((Mp[None, :] - phi)[:, Sp], axis=1)
        hit = np.flatnonzero(gap <= tau)
        if hit.size:
            k = hit[0]
            report.violation_count += 1
            if len(report.violations) < max_reported:
                report.violations.append({
                    "condition": "above", "point": list(point),
                    "slope": float(s[k]), "direction": w[k].tolist(),
                    "gap": float(gap[k]),
                })
    return report


@dataclass(frozen=True)
class GradientResidual:
    field: ScalarField
    points: np.ndarray

    @property
    def values(self):
        return self.field.values[tuple(self.points.T)] if len(self.points) else np.zeros(0)

    @property
    def sup(self):
        v = self.values
        return float(np.nanmax(np.abs(v))) if np.isfinite(v).any() else 0.0

    def to_dict(self):
        v = self.values
        return {
            "count": int(v.size),
            "sup_abs": self.sup,
            "unresolved": int(np.count_nonzero(np.isnan(v))),
            "mean": float(np.nanmean(v)) if np.isfinite(v).any() else 0.0,
            "min": float(np.nanmin(v)) if np.isfinite(v).any() else 0.0,
            "max": float(np.nanmax(v)) if np.isfinite(v).any() else 0.0,
            "paper_anchor": ANCHORS["fb_gradient"],
        }


def fb_gradient_residual(U, zero_tol=None, radius_nodes=2.5):
    """``|grad |U|| - 1`` at every free boundary node.

    The gradient comes from a least-squares affine fit of ``|U|`` over the
    positive nodes within ``radius_nodes * h`` (widened by one node when the
    fit is underdetermined); it is exact for one-plane solutions.  Off the
    free boundary the returned field is NaN.
    """
    spec = U.spec
    h = spec.h
    masks = classify_regions(U, zero_tol)
    mag = norm_field(U).values
    pts = np.argwhere(masks.free_boundary)
    out = np.full(spec.shape, np.nan)
    shape = np.array(spec.shape)
    cache = {}

    def offsets(rad):
        if rad not in cache:
            reach = int(np.ceil(rad))
            o = np.array(list(np.ndindex(*(2 * reach + 1,) * spec.dim_n))) - reach
            cache[rad] = o[np.sum(o**2, axis=1) <= rad * rad + 1e-9]
        return cache[rad]

    for p in pts:
        for rad in (radius_nodes, radius_nodes + 1, radius_nodes + 2):
            nb = p + offsets(rad)
            nb = nb[np.all((nb >= 0) & (nb < shape), axis=1)]
            t = tuple(nb.T)
            pos = masks.positivity[t]
            if np.count_nonzero(pos) < spec.dim_n + 2:
                continue
            Y = (nb[pos] - p) * h
            A = np.column_stack([Y, np.ones(len(Y))])
            coef, _, rank, _ = np.linalg.lstsq(A, mag[t][pos], rcond=None)
            if rank < spec.dim_n + 1:
                continue
            out[tuple(p)] = np.linalg.norm(coef[:-1]) - 1.0
            break
    return GradientResidual(ScalarField(spec.with_m(1), out), pts)
