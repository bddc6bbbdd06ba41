"""Plane profiles, the radial barrier and the sliding comparison families.

The barrier is

    w(x) = 1                                        for |x - c| <= r_in
    w(x) = (rho^g - r_out^g) / (r_in^g - r_out^g)   for r_in < rho < r_out
    w(x) = 0                                        for rho >= r_out

with ``rho = |x - c|`` and ``g < 0``.  The sub family slides
``p + c0 eps (w - 1) + t`` up from below, the super family slides
``p + eps - c0 eps (w - 1) - t`` down from above.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import GridSpec, laplacian_array

INNER_RADIUS = 1.0 / 20
OUTER_RADIUS = 3.0 / 4
GAMMA_CANDIDATES = (-0.5, -1.0, -2.0, -4.0)


def _default_center(dim_n):
    c = np.zeros(dim_n)
    c[-1] = 0.2
    return tuple(c)


@dataclass(frozen=True)
class PlaneProfile:
    sigma: float = 0.0

    def __call__(self, *x):
        return x[-1] + self.sigma

    def gradient(self, dim_n):
        g = np.zeros(dim_n)
        g[-1] = 1.0
        return g


@dataclass(frozen=True)
class RadialBarrier:
    dim_n: int = 2
    gamma: float = -0.5
    center: tuple = None
    inner_radius: float = INNER_RADIUS
    outer_radius: float = OUTER_RADIUS

    def __post_init__(self):
        if self.center is None:
            object.__setattr__(self, "center", _default_center(self.dim_n))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != self.dim_n:
            raise ValueError("barrier center must have dim_n coordinates")
        if not self.gamma < 0:
            raise ValueError("gamma must be negative")
        if not 0 < self.inner_radius < self.outer_radius:
            raise ValueError("need 0 < inner_radius < outer_radius")

    @classmethod
    def build(cls, spec, gamma=None, center=None):
        """Barrier checked on ``spec``; the default exponent is :func:`default_gamma`."""
        if gamma is None:
            gamma = default_gamma(spec, center)
        verdict = validate_gamma(spec, gamma, center)
        if not verdict.passed:
            raise ValueError(f"gamma={gamma} does not give Laplacian > 0 on the annulus")
        return cls(spec.dim_n, gamma, center)

    @property
    def denominator(self):
        g = self.gamma
        return self.inner_radius**g - self.outer_radius**g

    def radial(self, rho):
        rho = np.asarray(rho, dtype=float)
        g = self.gamma
        with np.errstate(divide="ignore"):
            mid = (np.maximum(rho, self.inner_radius) ** g - self.outer_radius**g)
        out = np.where(rho <= self.inner_radius, 1.0, mid / self.denominator)
        return np.where(rho >= self.outer_radius, 0.0, out)

    def radial_derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        inside = (rho > self.inner_radius) & (rho < self.outer_radius)
        safe = np.where(inside, rho, 1.0)
        return np.where(inside, self.gamma * safe ** (self.gamma - 1) / self.denominator, 0.0)

    def analytic_laplacian(self, rho):
        """Radial Laplacian on the open annulus."""
        g, n = self.gamma, self.dim_n
        return g * (g + n - 2) * np.asarray(rho, float) ** (g - 2) / self.denominator

    def rho(self, *x):
        return np.sqrt(sum((xi - c) ** 2 for xi, c in zip(x, self.center)))

    def __call__(self, *x):
        return self.radial(self.rho(*x))

    def gradient(self, points):
        """Gradient at points of shape ``(k, n)``."""
        pts = np.atleast_2d(points)
        diff = pts - np.asarray(self.center)
        rho = np.linalg.norm(diff, axis=1)
        scale = np.where(rho > 0, self.radial_derivative(rho) / np.where(rho > 0, rho, 1), 0)
        return diff * scale[:, None]

    def annulus_nodes(self, spec):
        """Nodes whose whole stencil lies in the closed annulus."""
        rho = np.sqrt(spec.radius2(self.center))
        closed = (rho >= self.inner_radius) & (rho <= self.outer_radius)
        full = closed.copy()
        for k in range(spec.dim_n):
            full &= np.roll(closed, 1, axis=k) & np.roll(closed, -1, axis=k)
        return full

    def to_dict(self):
        return {
            "dim_n": self.dim_n,
            "gamma": self.gamma,
            "center": list(self.center),
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
        }


def eval_barrier(b, x):
    """Barrier value at a point or an array of points (last axis = coordinates)."""
    x = np.asarray(x, dtype=float)
    rho = np.linalg.norm(x - np.asarray(b.center), axis=-1)
    return b.radial(rho)


@dataclass(frozen=True)
class GammaVerdict:
    gamma: float
    passed: bool
    analytic_min: float
    discrete_min: float
    annulus_nodes: int
    failing_nodes: int

    def to_dict(self):
        return dict(self.__dict__)


def validate_gamma(spec, gamma, center=None):
    """Strict positivity of the analytic and discrete Laplacian of ``w`` on the annulus."""
    if not gamma < 0:
        raise ValueError("gamma must be negative")
    b = RadialBarrier(spec.dim_n, gamma, center)
    rho = np.linspace(b.inner_radius, b.outer_radius, 257)
    analytic_min = float(np.min(b.analytic_laplacian(rho)))
    nodes = b.annulus_nodes(spec)
    w = b(*spec.mesh())
    lap = laplacian_array(np.broadcast_to(w, spec.shape).astype(float), spec.h)[nodes]
    discrete_min = float(lap.min()) if lap.size else float("nan")
    failing = int(np.count_nonzero(~(lap > 0)))
    passed = analytic_min > 0 and lap.size > 0 and failing == 0
    return GammaVerdict(gamma, passed, analytic_min, discrete_min, int(lap.size), failing)


def default_gamma(spec, center=None):
    """Closest-to-zero candidate exponent that passes :func:`validate_gamma`."""
    for g in GAMMA_CANDIDATES:
        if validate_gamma(spec, g, center).passed:
            return g
    raise ValueError("no candidate gamma gives a subharmonic barrier on this grid")


@dataclass(frozen=True)
class ComparisonFamily:
    profile: PlaneProfile
    barrier: RadialBarrier
    c0: float
    epsilon: float
    orientation: str = "sub"
    t: float = 0.0

    def __post_init__(self):
        if self.orientation not in ("sub", "super"):
            raise ValueError("orientation must be 'sub' or 'super'")
        if self.epsilon < 0 or self.c0 < 0:
            raise ValueError("c0 and epsilon must be >= 0")

    @property
    def amplitude(self):
        return self.c0 * self.epsilon

    def with_t(self, t):
        return replace(self, t=float(t))

    def __call__(self, *x, t=None):
        t = self.t if t is None else t
        p = self.profile(*x)
        w = self.barrier(*x)
        if self.orientation == "sub":
            return p + self.amplitude * (w - 1) + t
        return p + self.epsilon - self.amplitude * (w - 1) - t

    def values(self, spec, t=None):
        return np.broadcast_to(self(*spec.mesh(), t=t), spec.shape).astype(float)

    def gradient(self, points):
        sign = 1.0 if self.orientation == "sub" else -1.0
        pts = np.atleast_2d(points)
        base = np.broadcast_to(self.profile.gradient(pts.shape[1]), pts.shape)
        return base + sign * self.amplitude * self.barrier.gradient(pts)

    def laplacian_on_annulus(self, spec):
        nodes = self.barrier.annulus_nodes(spec)
        return laplacian_array(self.values(spec), spec.h)[nodes]

    def to_dict(self):
        return {
            "sigma": self.profile.sigma,
            "barrier": self.barrier.to_dict(),
            "c0": self.c0,
            "epsilon": self.epsilon,
            "orientation": self.orientation,
            "t": self.t,
        }


def touching_search(g, fam, region):
    """Largest slide ``t`` keeping the family on its side of ``g`` over ``region``.

    Returns ``(t_bar, touch_point)``; ties go to the first node in C order.
    """
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("empty region")
    spec = g.spec
    v0 = fam.values(spec, t=0.0)
    gap = (g.values - v0) if fam.orientation == "sub" else (v0 - g.values)
    flat = np.where(region, gap, np.inf).ravel()
    k = int(np.argmin(flat))
    t_bar = float(flat[k])
    scale = 1e-12 * max(1.0, float(np.max(np.abs(g.values[region]))))
    if t_bar < -scale:
        side = "below" if fam.orientation == "sub" else "above"
        raise ValueError(f"family does not start {side} the field (t = {t_bar:.3e})")
    return t_bar, spec.node_point(np.unravel_index(k, spec.shape))


def level_set_points(values, spec, mask=None):
    """Zero crossings of ``values`` along grid edges, linearly interpolated.

    An edge contributes when its two endpoint values have opposite strict
    signs or one of them is exactly zero.  Returns an array ``(k, n)``.
    """
    pts = []
    lo = np.asarray(spec.lo)
    for k in range(spec.dim_n):
        a = [slice(None)] * spec.dim_n
        b = [slice(None)] * spec.dim_n
        a[k] = slice(None, -1)
        b[k] = slice(1, None)
        va, vb = values[tuple(a)], values[tuple(b)]
        cross = (va * vb < 0) | ((va == 0) & (vb != 0))
        idx = np.argwhere(cross)
        if idx.size == 0:
            continue
        fa = va[cross]
        fb = vb[cross]
        s = fa / (fa - fb)
        p = lo + spec.h * idx.astype(float)
        p[:, k] += s * spec.h
        pts.append(p)
    if not pts:
        return np.zeros((0, spec.dim_n))
    out = np.concatenate(pts)
    return out


@dataclass(frozen=True)
class SlopeVerdict:
    orientation: str
    status: str
    count: int
    min_slope: float
    max_slope: float
    margin: float
    required_margin: float
    t: float
    slopes: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def passed(self):
        return self.status == "pass"

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "slopes"}
        return d


def annulus_fb_slope_check(fam, spec=None, required_margin=1e-4, lower_bound=0.5):
    """Slope of ``v_t`` along its zero level set inside the open annulus.

    Sub families need ``|grad v| >= 1 + required_margin`` there, super
    families ``lower_bound <= |grad v| <= 1 - required_margin``.  Level-set
    points come from edge crossings of the sampled family on ``spec``; the
    gradient is evaluated in closed form at each point.
    """
    b = fam.barrier
    if spec is None:
        spec = GridSpec.unit(b.dim_n)
    nan = float("nan")
    if fam.amplitude == 0:
        return SlopeVerdict(fam.orientation, "degenerate epsilon", 0, 1.0, 1.0, 0.0,
                            required_margin, fam.t)
    pts = level_set_points(fam.values(spec), spec)
    rho = np.linalg.norm(pts - np.asarray(b.center), axis=1)
    pts = pts[(rho > b.inner_radius) & (rho < b.outer_radius)]
    if len(pts) == 0:
        return SlopeVerdict(fam.orientation, "vacuous", 0, nan, nan, nan,
                            required_margin, fam.t)
    slopes = np.linalg.norm(fam.gradient(pts), axis=1)
    lo, hi = float(slopes.min()), float(slopes.max())
    if fam.orientation == "sub":
        margin = lo - 1.0
        ok = margin >= required_margin
    else:
        margin = 1.0 - hi
        ok = margin >= required_margin and lo >= lower_bound
    return SlopeVerdict(fam.orientation, "pass" if ok else "fail", len(pts), lo, hi,
                        margin, required_margin, fam.t, slopes)
