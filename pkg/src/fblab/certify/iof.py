"""Improvement of flatness: a small tilt halves the normalized flatness at scale r."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import VectorField, classify_regions
from .anchors import ANCHORS
from .flatness import _BallData, refine, vanish_check
from .harnack import NotFlatError, check_flat_regime


@dataclass(frozen=True)
class TiltResult:
    nu: tuple
    f_bar: tuple
    epsilon_new: float
    eps: float
    r: float
    passed: bool
    vanishing_ok: bool
    tilt_nu: float
    tilt_f: float
    C_cfg: float
    slack: float

    def to_dict(self):
        return {
            "nu": list(self.nu),
            "f_bar": list(self.f_bar),
            "epsilon_new": self.epsilon_new,
            "deviation_new": self.epsilon_new * self.r,
            "eps": self.eps,
            "r": self.r,
            "passed": self.passed,
            "vanishing_ok": self.vanishing_ok,
            "tilt_nu": self.tilt_nu,
            "tilt_f": self.tilt_f,
            "C_cfg": self.C_cfg,
            "slack": self.slack,
            "paper_anchor": ANCHORS["improvement"],
        }


def _cap_grid(dim, radius, per_axis):
    """Unit vectors near the last basis vector, within chord ``radius`` of it."""
    base = np.zeros(dim)
    base[-1] = 1.0
    if dim == 1:
        return base[None, :]
    if radius >= 2:
        t = np.linspace(-np.pi, np.pi, 4 * per_axis, endpoint=False)
        if dim == 2:
            return np.stack([np.sin(t), np.cos(t)], axis=1)
    # chord -> angle -> tangent-plane coordinate
    ang = 2 * np.arcsin(min(radius, 2.0) / 2)
    span = np.tan(min(ang, 1.5))
    axes = [np.linspace(-span, span, per_axis)] * (dim - 1)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim - 1)
    vecs = np.column_stack([grid, np.ones(len(grid))])
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    keep = np.linalg.norm(vecs - base, axis=1) <= radius + 1e-15
    return vecs[keep]


def recenter_at_free_boundary(U, zero_tol=None):
    """Translate ``U`` by whole nodes so its free boundary node nearest the origin sits at 0.

    Returns ``(V, shift)`` with ``V(x) = U(x + shift)``; values pulled in from
    beyond the box repeat the edge.  Fields with a free boundary node within
    ``1.5h`` of the origin come back unchanged with a zero shift.
    """
    spec = U.spec
    masks = classify_regions(U, zero_tol)
    fb = np.argwhere(masks.free_boundary)
    zero = np.zeros(spec.dim_n)
    if len(fb) == 0:
        raise NotFlatError("hypothesis failed: free boundary is empty")
    pts = fb * spec.h + np.asarray(spec.lo)
    dist = np.linalg.norm(pts, axis=1)
    if dist.min() <= 1.5 * spec.h:
        return U, zero
    k = min(range(len(fb)), key=lambda j: (round(dist[j] / spec.h, 9), tuple(fb[j])))
    d = fb[k] - np.asarray(spec.node_index(tuple(zero)))
    pad = int(np.max(np.abs(d)))
    src = np.pad(U.data, [(0, 0)] + [(pad, pad)] * spec.dim_n, mode="edge")
    sl = tuple(slice(pad + dk, pad + dk + s) for dk, s in zip(d, spec.shape))
    V = VectorField(spec, np.ascontiguousarray(src[(slice(None),) + sl]))
    return V, d * spec.h


def improvement_check(U, eps, r, C_cfg=10.0, slack=0.0, check_hypotheses=True,
                      zero_tol=None, per_axis=33):
    """Best tilt ``(nu, f_bar)`` within ``C_cfg * eps`` of ``(e_n, f^1)`` on ``B_r``.

    Passes when ``epsilon_new <= eps / 2 + slack`` and ``|U|`` vanishes on
    ``B_r ∩ {<x, nu> < -(eps/2 + slack) r}``.  Hypotheses (checked unless
    disabled, raising ``NotFlatError``): the two flatness conditions for
    ``eps`` on ``B_1`` and a free boundary node within ``1.5h`` of the origin.
    """
    spec = U.spec
    n, m = spec.dim_n, spec.dim_m
    if check_hypotheses:
        check_flat_regime(U, eps, zero_tol)
        masks = classify_regions(U, zero_tol)
        near = spec.ball_mask(None, 1.5 * spec.h)
        if not (near & masks.free_boundary).any():
            raise NotFlatError("hypothesis failed: 0 in F(U)")
    data = _BallData(U, tuple(np.zeros(n)), r)
    cap = C_cfg * eps
    e_ref = np.eye(n)[-1]
    f_ref = np.eye(m)[0]
    # coarse scan in the admissible caps
    E = _cap_grid(n, cap, per_axis)
    F = _cap_grid(m, cap, per_axis)[:, ::-1] if m > 1 else np.ones((1, 1))
    best = (data.deviation(e_ref, f_ref), e_ref, f_ref)
    for e in E:
        devs = data.deviation_many_f(e, F)
        j = int(np.argmin(devs))
        dj = data.deviation(e, F[j])
        if dj < best[0]:
            best = (dj, e, F[j])
    # least-squares initializer, accepted only inside the caps
    fit = data.linear_fit()
    if fit is not None:
        e, f = fit
        if np.linalg.norm(e - e_ref) <= cap and np.linalg.norm(f - f_ref) <= cap:
            d = data.deviation(e, f)
            if d < best[0]:
                best = (d, e, f)
    dev, nu, f_bar = refine(data, best[1], best[2], cap=(e_ref, f_ref, cap))
    eps_new = dev / r
    threshold = eps / 2 + slack
    van = vanish_check(U, nu, threshold * r, x0=None, r=r, zero_tol=zero_tol)
    passed = eps_new <= threshold and van.passed
    return TiltResult(
        tuple(map(float, nu)), tuple(map(float, f_bar)), float(eps_new), float(eps),
        float(r), bool(passed), bool(van.passed),
        float(np.linalg.norm(nu - e_ref)), float(np.linalg.norm(f_bar - f_ref)),
        float(C_cfg), float(slack),
    )
