"""Grid geometry, sampled fields and finite-difference calculus.

Every field lives on a uniform box grid that strictly contains the closed
unit ball.  Axis ``k`` of a value array corresponds to the coordinate
``x_{k+1}``; the last axis is ``x_n``.  Statements about balls are evaluated
through :func:`ball_restriction` rather than by fitting the mesh to the ball.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """A requested ball or region does not fit inside the sampled box."""


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid ``lo + i*h`` on an axis-aligned box.

    ``shape`` holds the number of nodes per axis, so the box is
    ``[lo_k, lo_k + (shape_k - 1) h]`` along axis ``k``.
    """

    dim_n: int
    dim_m: int
    h: float
    lo: tuple
    shape: tuple

    def __post_init__(self):
        if self.dim_n not in (2, 3):
            raise ValueError("dim_n must be 2 or 3")
        if self.dim_m < 1:
            raise ValueError("dim_m must be >= 1")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if len(self.lo) != self.dim_n or len(self.shape) != self.dim_n:
            raise ValueError("lo/shape length must equal dim_n")
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))
        for lo, hi in self.box:
            if not (lo < -1.0 and hi > 1.0):
                raise ValueError("box must strictly contain the closed unit ball")

    @classmethod
    def unit(cls, dim_n=2, dim_m=1, h=None, pad=4):
        """Symmetric box ``[-(1 + pad*h), 1 + pad*h]^n`` with ``1/h`` integral.

        Default spacings are 1/256 in two dimensions and 1/64 in three.
        """
        if h is None:
            h = 1.0 / 256 if dim_n == 2 else 1.0 / 64
        per_unit = round(1.0 / h)
        if abs(per_unit * h - 1.0) > 1e-12:
            raise ValueError("h must be 1/N for an integer N")
        h = 1.0 / per_unit
        half = per_unit + pad
        return cls(dim_n, dim_m, h, (-half * h,) * dim_n, (2 * half + 1,) * dim_n)

    @property
    def box(self):
        return tuple(
            (lo, lo + (s - 1) * self.h) for lo, s in zip(self.lo, self.shape)
        )

    @property
    def num_nodes(self):
        return int(np.prod(self.shape))

    def with_m(self, dim_m):
        return GridSpec(self.dim_n, dim_m, self.h, self.lo, self.shape)

    def axes(self):
        return _axes(self)

    def mesh(self):
        """Broadcastable coordinate arrays, one per axis."""
        return _mesh(self)

    def coords(self):
        """Dense coordinates, shape ``(dim_n, *shape)``."""
        return np.stack(np.broadcast_arrays(*self.mesh()))

    def radius2(self, x0=None):
        return _radius2(self, None if x0 is None else tuple(float(v) for v in x0))

    def node_index(self, x):
        """Nearest grid index of point ``x``."""
        return tuple(
            int(np.clip(round((xi - lo) / self.h), 0, s - 1))
            for xi, lo, s in zip(x, self.lo, self.shape)
        )

    def node_point(self, idx):
        return np.array([lo + i * self.h for lo, i in zip(self.lo, idx)])

    def ball_mask(self, x0=None, r=1.0, strict=False):
        r2 = self.radius2(x0)
        tol = 1e-12 * max(r * r, 1.0)
        return r2 < r * r - tol if strict else r2 <= r * r + tol

    def check_ball(self, x0, r):
        x0 = np.zeros(self.dim_n) if x0 is None else np.asarray(x0, float)
        for (lo, hi), c in zip(self.box, x0):
            if c - r < lo - 1e-12 or c + r > hi + 1e-12:
                raise DomainError("ball out of domain")


@functools.lru_cache(maxsize=16)
def _axes(spec):
    return tuple(
        _frozen(lo + spec.h * np.arange(s)) for lo, s in zip(spec.lo, spec.shape)
    )


@functools.lru_cache(maxsize=16)
def _mesh(spec):
    out = []
    for k, ax in enumerate(_axes(spec)):
        shape = [1] * spec.dim_n
        shape[k] = -1
        out.append(ax.reshape(shape))
    return tuple(out)


@functools.lru_cache(maxsize=32)
def _radius2(spec, x0):
    mesh = _mesh(spec)
    x0 = (0.0,) * spec.dim_n if x0 is None else x0
    r2 = sum((m - c) ** 2 for m, c in zip(mesh, x0))
    return _frozen(np.broadcast_to(r2, spec.shape))


@dataclass(frozen=True, eq=False)
class ScalarField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.shape:
            raise ValueError(
                f"value array shape {v.shape} does not match grid {self.spec.shape}"
            )
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, spec, fn):
        return cls(spec, np.broadcast_to(fn(*spec.mesh()), spec.shape))


@dataclass(frozen=True, eq=False)
class VectorField:
    """``dim_m`` components sampled on one grid; ``data`` has shape ``(m, *shape)``."""

    spec: GridSpec
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim == self.spec.dim_n:
            d = d[None]
        if d.shape != (self.spec.dim_m,) + self.spec.shape:
            raise ValueError(
                f"data shape {d.shape} does not match "
                f"{(self.spec.dim_m,) + self.spec.shape}"
            )
        object.__setattr__(self, "data", _frozen(d))

    @classmethod
    def from_components(cls, components):
        components = list(components)
        spec = components[0].spec
        if any(c.spec != spec for c in components):
            raise ValueError("components must share one GridSpec")
        return cls(spec.with_m(len(components)), np.stack([c.values for c in components]))

    @classmethod
    def from_function(cls, spec, fn):
        """``fn(*mesh)`` returns a sequence of ``dim_m`` broadcastable arrays."""
        vals = fn(*spec.mesh())
        return cls(spec, np.stack([np.broadcast_to(v, spec.shape) for v in vals]))

    @property
    def components(self):
        return tuple(ScalarField(self.spec.with_m(1), c) for c in self.data)

    def component(self, i):
        return ScalarField(self.spec.with_m(1), self.data[i])


@dataclass(frozen=True, eq=False)
class RegionMasks:
    positivity: np.ndarray
    free_boundary: np.ndarray
    zero: np.ndarray
    zero_tol: float

    def points(self, which="free_boundary", spec=None):
        mask = getattr(self, which)
        idx = np.argwhere(mask)
        if spec is None:
            return idx
        return np.asarray(spec.lo) + spec.h * idx


@dataclass(frozen=True)
class BallStats:
    mask: np.ndarray
    sup: float
    inf: float

    @property
    def oscillation(self):
        return self.sup - self.inf

    @property
    def count(self):
        return int(self.mask.sum())


def norm_field(U):
    """Pointwise Euclidean norm |U| across components."""
    return ScalarField(U.spec.with_m(1), np.sqrt(np.sum(U.data**2, axis=0)))


def default_zero_tol(U):
    return 1e-12 * float(np.max(np.abs(U.data), initial=0.0))


def neighbor_any(mask):
    """True at nodes having at least one grid neighbour inside ``mask``."""
    out = np.zeros_like(mask, dtype=bool)
    for k in range(mask.ndim):
        lead = [slice(None)] * mask.ndim
        trail = [slice(None)] * mask.ndim
        lead[k] = slice(1, None)
        trail[k] = slice(None, -1)
        out[tuple(trail)] |= mask[tuple(lead)]
        out[tuple(lead)] |= mask[tuple(trail)]
    return out


def classify_regions(U, zero_tol=None):
    """Split ball-interior nodes into positivity, free boundary and zero sets.

    The free boundary is the layer of zero nodes touching the positivity set,
    so the three masks are disjoint and cover ``{|x| < 1}``.
    """
    if zero_tol is None:
        zero_tol = default_zero_tol(U)
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    ball = U.spec.ball_mask(strict=True)
    mag = norm_field(U).values
    pos = ball & (mag > zero_tol)
    zero_all = ball & ~pos
    fb = zero_all & neighbor_any(pos) & neighbor_any(zero_all)
    return RegionMasks(pos, fb, zero_all & ~fb, float(zero_tol))


def _shift_sum(v):
    """Sum of the 2n axis neighbours at interior nodes (NaN on the box edge)."""
    n = v.ndim
    out = np.full(v.shape, np.nan)
    inner = tuple(slice(1, -1) for _ in range(n))
    acc = np.zeros(tuple(s - 2 for s in v.shape))
    for k in range(n):
        for step in (-1, 1):
            sl = [slice(1, -1)] * n
            sl[k] = slice(1 + step, v.shape[k] - 1 + step)
            acc += v[tuple(sl)]
    out[inner] = acc
    return out


def laplacian_array(v, h):
    return (_shift_sum(v) - 2 * v.ndim * v) / (h * h)


def discrete_laplacian(f):
    """Standard (2n+1)-point Laplacian; NaN marks the invalid box-edge layer."""
    return ScalarField(f.spec, laplacian_array(f.values, f.spec.h))


def discrete_gradient(f, mask=None):
    """Centered first differences, shape ``(dim_n, *shape)``.

    With ``mask`` given, nodes whose centred stencil leaves the mask fall back
    to the one-sided difference that stays inside it (NaN when neither does).
    Box-edge nodes always use one-sided differences.
    """
    v = f.values
    h = f.spec.h
    grads = []
    for k in range(v.ndim):
        fwd = np.full(v.shape, np.nan)
        bwd = np.full(v.shape, np.nan)
        hi = [slice(None)] * v.ndim
        lo = [slice(None)] * v.ndim
        hi[k] = slice(1, None)
        lo[k] = slice(None, -1)
        d = (v[tuple(hi)] - v[tuple(lo)]) / h
        fwd[tuple(lo)] = d
        bwd[tuple(hi)] = d
        if mask is not None:
            m_up = np.zeros(v.shape, bool)
            m_dn = np.zeros(v.shape, bool)
            m_up[tuple(lo)] = mask[tuple(hi)]
            m_dn[tuple(hi)] = mask[tuple(lo)]
            fwd = np.where(m_up, fwd, np.nan)
            bwd = np.where(m_dn, bwd, np.nan)
        cen = 0.5 * (fwd + bwd)
        g = np.where(np.isnan(cen), np.where(np.isnan(fwd), bwd, fwd), cen)
        grads.append(g)
    return np.stack(grads)


def ball_restriction(f, x0=None, r=1.0):
    """Nodes of the closed ball ``B_r(x0)`` and the sup/inf of ``f`` over them."""
    spec = f.spec
    spec.check_ball(x0, r)
    mask = spec.ball_mask(x0, r)
    vals = f.values[mask]
    if vals.size == 0:
        raise DomainError("ball contains no grid nodes")
    return BallStats(mask, float(vals.max()), float(vals.min()))
