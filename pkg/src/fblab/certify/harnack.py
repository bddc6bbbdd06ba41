"""Component smallness, the Harnack band step and its cascade."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..grid import classify_regions, default_zero_tol, norm_field
from .anchors import ANCHORS

SCALE = 20


class HypothesisError(ValueError):
    """An input does not satisfy the hypotheses of the requested certificate."""


class NotFlatError(HypothesisError):
    pass


def _tol(U, tol):
    if tol is not None:
        return float(tol)
    return 1e-10 * max(1.0, float(np.max(np.abs(U.data), initial=0.0)))


def flat_regime_defect(U, eps, x0=None, r=1.0, zero_tol=None):
    """Worst violations of the two flatness hypotheses against ``f^1 x_n^+``.

    Returns ``(sup |U - f^1 x_n^+| - eps, count of nonzero nodes below -eps)``
    over the closed ball, both measured after the first argument is scaled
    to the ball.
    """
    spec = U.spec
    spec.check_ball(x0, r)
    ball = spec.ball_mask(x0, r)
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    plane = np.zeros_like(U.data)
    plane[0] = np.maximum(xn, 0.0)
    dev = np.sqrt(np.sum((U.data - plane) ** 2, axis=0))[ball]
    if zero_tol is None:
        zero_tol = default_zero_tol(U)
    mag = norm_field(U).values
    below = ball & (xn < -eps) & (mag > zero_tol)
    return float(np.max(dev, initial=0.0) - eps), int(below.sum())


def check_flat_regime(U, eps, zero_tol=None, slack=0.0):
    over, below = flat_regime_defect(U, eps + slack, zero_tol=zero_tol)
    if over > 1e-12 * max(1.0, eps):
        raise NotFlatError(f"not in flat regime: |U - f1 xn+| exceeds eps by {over:.3e}")
    if below:
        raise NotFlatError(f"not in flat regime: {below} nonzero nodes in {{x_n < -eps}}")


def smallest_flat_eps(U, zero_tol=None):
    """Smallest eps for which both flatness hypotheses hold on the unit ball."""
    spec = U.spec
    ball = spec.ball_mask()
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    plane = np.zeros_like(U.data)
    plane[0] = np.maximum(xn, 0.0)
    dev = float(np.max(np.sqrt(np.sum((U.data - plane) ** 2, axis=0))[ball]))
    if zero_tol is None:
        zero_tol = default_zero_tol(U)
    pos = ball & (norm_field(U).values > zero_tol)
    depth = float(np.max(-xn[pos], initial=0.0))
    return max(dev, depth)


@dataclass(frozen=True)
class SmallnessVerdict:
    passed: bool
    constant: float
    C_cfg: float
    eps: float
    witness: tuple | None
    hypotheses_checked: bool

    def to_dict(self):
        return {
            "passed": self.passed,
            "constant": self.constant,
            "C_cfg": self.C_cfg,
            "eps": self.eps,
            "witness": None if self.witness is None else list(self.witness),
            "hypotheses_checked": self.hypotheses_checked,
            "paper_anchor": ANCHORS["smallness"],
        }


def component_smallness(U, eps, C_cfg=10.0, check_hypotheses=True, zero_tol=None):
    """Largest ``|u^i| / (eps (x_n + eps))`` over ``i >= 2`` and ``B_{3/4}`` nodes above ``-eps``.

    With ``check_hypotheses`` the flatness hypotheses are verified first and
    :class:`NotFlatError` is raised when they fail.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if check_hypotheses:
        check_flat_regime(U, eps, zero_tol)
    spec = U.spec
    ball = spec.ball_mask(None, 0.75)
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    region = ball & (xn > -eps)
    worst, where = 0.0, None
    denom = eps * (xn[region] + eps)
    for comp in U.data[1:]:
        ratio = np.abs(comp[region]) / denom
        if ratio.size and ratio.max() > worst:
            k = int(np.argmax(ratio))
            worst = float(ratio[k])
            where = tuple(float(v) for v in spec.coords()[:, region][:, k])
    return SmallnessVerdict(worst <= C_cfg, worst, float(C_cfg), float(eps), where,
                            bool(check_hypotheses))


@dataclass(frozen=True)
class HarnackBand:
    x0: tuple
    r: float
    a: float
    b: float
    shrink_factor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if self.a > self.b:
            raise ValueError("band needs a <= b")
        if self.r <= 0:
            raise ValueError("band radius must be positive")

    @property
    def width(self):
        return self.b - self.a

    def to_dict(self):
        return {
            "x0": list(self.x0),
            "r": self.r,
            "a": self.a,
            "b": self.b,
            "width": self.width,
            "shrink_factor": self.shrink_factor,
            "paper_anchor": ANCHORS["harnack_step"],
        }


def band_slack(U, band, zero_tol=None):
    """Largest violation of ``x_n + a <= u^1 <= |U| <= (x_n + b)^+`` on ``B_r(x0)``."""
    spec = U.spec
    spec.check_ball(band.x0, band.r)
    ball = spec.ball_mask(band.x0, band.r)
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)[ball]
    u1 = U.data[0][ball]
    mag = norm_field(U).values[ball]
    low = np.max(xn + band.a - u1, initial=-np.inf)
    high = np.max(mag - np.maximum(xn + band.b, 0.0), initial=-np.inf)
    return float(max(low, high))


def tightest_band(U, x0, r, zero_tol=None):
    """Smallest (a, b) trapping ``U`` on ``B_r(x0)``."""
    spec = U.spec
    spec.check_ball(x0, r)
    ball = spec.ball_mask(x0, r)
    if not ball.any():
        raise ValueError("ball contains no grid nodes")
    if zero_tol is None:
        zero_tol = default_zero_tol(U)
    xn = np.broadcast_to(spec.mesh()[-1], spec.shape)
    mag = norm_field(U).values
    a = float(np.min((U.data[0] - xn)[ball]))
    pos = ball & (mag > zero_tol)
    b = max(a, float(np.max((mag - xn)[pos], initial=-np.inf)))
    return HarnackBand(x0, r, a, b)


def harnack_step(U, band, eps_bar=0.05, tol=None, zero_tol=None):
    """Tightest band on ``B_{r/20}(x0)`` nested inside ``band``.

    Hypotheses, checked in order, each raising :class:`HypothesisError`
    with its name: the ball lies in ``B_1``; the center sits in the
    positivity set or on the free boundary (within one node); the band
    traps ``U`` on ``B_r(x0)`` within ``10 tol``; ``b - a <= eps_bar r``;
    ``|u^i| <= r ((b - a)/r)^{3/4}`` on ``B_{1/2}(x0)`` for ``i >= 2``.
    """
    spec = U.spec
    tol = _tol(U, tol)
    x0 = np.asarray(band.x0, dtype=float)
    r = band.r
    if np.linalg.norm(x0) + r > 1.0 + 1e-12:
        raise HypothesisError("hypothesis failed: B_r(x0) inside B_1")
    masks = classify_regions(U, zero_tol)
    near = spec.ball_mask(tuple(x0), 1.5 * spec.h)
    if not (near & (masks.positivity | masks.free_boundary)).any():
        raise HypothesisError("hypothesis failed: x0 in positivity set or free boundary")
    slack = band_slack(U, band, zero_tol)
    if slack > 10 * tol:
        raise HypothesisError(f"hypothesis failed: band trapping (violated by {slack:.3e})")
    width = band.width
    if width > eps_bar * r * (1 + 1e-12):
        raise HypothesisError(
            f"hypothesis failed: b0 - a0 <= eps_bar r ({width:.3e} > {eps_bar * r:.3e})"
        )
    if spec.dim_m > 1:
        half = spec.ball_mask(tuple(x0), 0.5)
        spec.check_ball(tuple(x0), 0.5)
        bound = r * (width / r) ** 0.75
        worst = float(np.max(np.abs(U.data[1:][:, half]), initial=0.0))
        if worst > bound + 10 * tol:
            raise HypothesisError(
                "hypothesis failed: component smallness |u^i| <= r((b0-a0)/r)^(3/4) "
                f"({worst:.3e} > {bound:.3e})"
            )
    inner = tightest_band(U, tuple(x0), r / SCALE, zero_tol)
    a1 = max(band.a, inner.a)
    b1 = min(band.b, max(a1, inner.b))
    shrink = (b1 - a1) / width if width > 0 else 0.0
    return HarnackBand(tuple(x0), r / SCALE, a1, b1, shrink)


@dataclass
class CascadeRecord:
    x0: tuple
    bands: list
    shrink_factors: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def alpha_estimate(self):
        return alpha_from_shrink(self.shrink_factors)

    def rows(self):
        out = []
        for k, band in enumerate(self.bands[1:], start=1):
            out.append({
                "k": k,
                "radius": band.r,
                "a": band.a,
                "b": band.b,
                "width": band.width,
                "shrink_factor": band.shrink_factor,
            })
        return out

    def to_dict(self):
        alpha = self.alpha_estimate
        return {
            "x0": list(self.x0),
            "bands": [b.to_dict() for b in self.bands],
            "shrink_factors": list(self.shrink_factors),
            "alpha_estimate": _json_float(alpha),
            "stop_reason": self.stop_reason,
            "paper_anchor": ANCHORS["harnack_cascade"],
        }


def _json_float(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf"
    return x


def alpha_from_shrink(factors):
    """``-log(max factor) / log 20``; infinite when every factor is 0, None when empty."""
    if not factors:
        return None
    worst = max(factors)
    if worst <= 0:
        return math.inf
    return -math.log(worst) / math.log(SCALE)


def harnack_cascade(U, x0, band0, k_max=3, eps_bar=0.05, tol=None, zero_tol=None,
                    min_radius_nodes=8):
    """Repeated :func:`harnack_step` at radii ``r0 20^{-k}``.

    Stops (never raises) when ``k_max`` steps are done, when the next band's
    radius would fall below ``min_radius_nodes * h``, or when a step's
    hypotheses fail; the reason is recorded.
    """
    spec = U.spec
    band0 = replace(band0, x0=tuple(float(v) for v in x0))
    rec = CascadeRecord(band0.x0, [band0])
    current = band0
    for k in range(1, k_max + 1):
        if current.r / SCALE < min_radius_nodes * spec.h:
            rec.stop_reason = (
                f"resolution floor: radius {current.r / SCALE:.4g} < {min_radius_nodes}h "
                f"at step {k}"
            )
            break
        try:
            nxt = harnack_step(U, current, eps_bar, tol, zero_tol)
        except (HypothesisError, ValueError) as exc:
            rec.stop_reason = f"hypothesis exhausted at step {k}: {exc}"
            break
        nxt = replace(nxt, r=band0.r / SCALE**k)
        rec.bands.append(nxt)
        rec.shrink_factors.append(nxt.shrink_factor)
        current = nxt
    else:
        rec.stop_reason = f"k_max reached ({k_max} steps)"
    return rec
