"""Structural equations of a braking vehicle/pedestrian collision.

All kinematics are in SI units (m, m/s, s).  Impact speed is converted to
km/h only when it is fed to the throw-distance and injury-severity models,
which were fitted on km/h data.

The low-level ``*_`` helpers take plain floats and are what the sampler
calls in its inner loop; the public functions wrap them with the domain
types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

G = 9.80665
KMH_PER_MS = 3.6

SEVERITIES = ("slight", "serious", "fatal")

# log-scale variance of measured skid lengths (CV of about 0.10)
SKID_LOG_VAR = 0.01
THROW_LOG_VAR = 0.06

_LOG_2PI = math.log(2.0 * math.pi)


class InvalidParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConstants:
    g: float = G


@dataclass(frozen=True)
class KinematicState:
    """Exogenous variables of one collision.

    x is the distance from the vehicle front to the impact point when the
    driver notices the pedestrian, v the initial speed, tp the
    perception/reaction time, ts the brake transition time and f the
    tyre/road friction coefficient.
    """

    x: float
    v: float
    tp: float
    ts: float
    f: float

    def replace(self, **kw) -> "KinematicState":
        d = dict(x=self.x, v=self.v, tp=self.tp, ts=self.ts, f=self.f)
        d.update(kw)
        return KinematicState(**d)


@dataclass(frozen=True)
class ThrowParams:
    b0: float = -3.43
    b1: float = 1.61
    sigma2_d: float = THROW_LOG_VAR

    def __post_init__(self):
        if not self.sigma2_d > 0:
            raise InvalidParamsError("sigma2_d must be positive")


@dataclass(frozen=True)
class InjuryParams:
    a1: float = 4.07
    a2: float = 7.21
    b_inj: float = 0.095


@dataclass(frozen=True)
class Case:
    """Scene evidence for one accident.

    Any subset of the measurements may be present, but at least one must.
    """

    id: str
    speed_limit_kmh: float = 60.0
    s1_m: Optional[float] = None
    s2_m: Optional[float] = None
    throw_m: Optional[float] = None
    severity: Optional[str] = None

    def __post_init__(self):
        if not self.speed_limit_kmh > 0:
            raise ValueError(f"case {self.id!r}: speed_limit_kmh must be positive")
        for name in ("s1_m", "s2_m", "throw_m"):
            val = getattr(self, name)
            if val is not None and not (math.isfinite(val) and val > 0):
                raise ValueError(f"case {self.id!r}: {name} must be a positive number")
        if self.severity is not None and self.severity not in SEVERITIES:
            raise ValueError(
                f"case {self.id!r}: severity must be one of {SEVERITIES}, got {self.severity!r}"
            )

    @property
    def has_measurements(self) -> bool:
        return any(
            m is not None for m in (self.s1_m, self.s2_m, self.throw_m, self.severity)
        )


@dataclass(frozen=True)
class CollisionOutcome:
    vi: float
    s1_th: float
    s2_th: float


def impact_speed_(x, v, tp, f, g=G):
    reaction = v * tp
    if x < reaction:
        return v
    decel = f * g
    # boundary of the stopping distance counts as no impact
    if x >= reaction + v * v / (2.0 * decel):
        return 0.0
    return math.sqrt(v * v - 2.0 * decel * (x - reaction))


def skid_s1_(v, ts, f, g=G):
    decel = f * g
    # stopped within the transition phase: no marks
    if v <= decel * ts:
        return 0.0
    return v * v / (2.0 * decel) - (v * ts - 0.5 * decel * ts * ts)


def skid_s2_(x, v, tp, ts, f, g=G):
    vi = impact_speed_(x, v, tp, f, g)
    if vi <= 0.0:
        return 0.0
    decel = f * g
    if x < v * tp + v * ts - 0.5 * decel * ts * ts:
        return 0.0
    return vi * vi / (2.0 * decel)


def _log_logistic(z):
    # log(1 / (1 + exp(-z))) without overflow
    if z >= 0:
        return -math.log1p(math.exp(-z))
    return z - math.log1p(math.exp(z))


def _logistic(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def severity_probs_(vi_kmh, a1, a2, b):
    p_slight = _logistic(a1 - b * vi_kmh)
    p_upto_serious = _logistic(a2 - b * vi_kmh)
    return p_slight, p_upto_serious - p_slight, 1.0 - p_upto_serious


def _lognormal_logpdf(y, log_mean, var):
    z = math.log(y) - log_mean
    return -math.log(y) - 0.5 * (_LOG_2PI + math.log(var)) - 0.5 * z * z / var


def log_likelihood_(x, v, tp, ts, f, b0, b1, a1, a2, b_inj,
                    s1_m, s2_m, throw_m, severity, sigma2_d=THROW_LOG_VAR,
                    sigma2_s=SKID_LOG_VAR, g=G):
    """Log-likelihood of the present measurements; -inf if any is impossible.

    ``severity`` is an index into SEVERITIES or None.
    """
    ll = 0.0
    if s1_m is not None:
        s1 = skid_s1_(v, ts, f, g)
        if s1 <= 0.0:
            return -math.inf
        ll += _lognormal_logpdf(s1_m, math.log(s1), sigma2_s)
    if s2_m is not None:
        s2 = skid_s2_(x, v, tp, ts, f, g)
        if s2 <= 0.0:
            return -math.inf
        ll += _lognormal_logpdf(s2_m, math.log(s2), sigma2_s)
    if throw_m is None and severity is None:
        return ll
    vi = impact_speed_(x, v, tp, f, g)
    if vi <= 0.0:
        return -math.inf
    vi_kmh = vi * KMH_PER_MS
    if throw_m is not None:
        ll += _lognormal_logpdf(throw_m, b0 + b1 * math.log(vi_kmh), sigma2_d)
    if severity is not None:
        bv = b_inj * vi_kmh
        if severity == 0:
            ll += _log_logistic(a1 - bv)
        elif severity == 2:
            ll += _log_logistic(bv - a2)
        else:
            p = _logistic(a2 - bv) - _logistic(a1 - bv)
            if p <= 0.0:
                return -math.inf
            ll += math.log(p)
    return ll


def impact_speed(state: KinematicState, const: ModelConstants = ModelConstants()) -> float:
    """Vehicle speed at the impact point in m/s (0 when it stops short).

    Impact at full speed if the pedestrian is reached during the reaction
    phase, no impact if the total stopping distance is at most ``x``, and
    otherwise the speed left after braking at ``f*g`` over ``x - v*tp``.
    """
    return impact_speed_(state.x, state.v, state.tp, state.f, const.g)


def theoretical_skid_s1(state: KinematicState, const: ModelConstants = ModelConstants()) -> float:
    """Braking distance minus the distance covered during brake transition.

    The expression equals (v - f*g*ts)**2 / (2*f*g), which is spuriously
    positive when the vehicle already stops during the transition
    (v <= f*g*ts); that case returns 0, meaning no skidmark is possible.
    """
    return skid_s1_(state.v, state.ts, state.f, const.g)


def theoretical_skid_s2(state: KinematicState, const: ModelConstants = ModelConstants()) -> float:
    """Skid length from the impact point to the end of the skidmark.

    Non-zero only when the pedestrian is struck during the steady skid
    phase, in which case it is the distance needed to stop from ``vi``.
    """
    return skid_s2_(state.x, state.v, state.tp, state.ts, state.f, const.g)


def collision_outcome(state: KinematicState, const: ModelConstants = ModelConstants()) -> CollisionOutcome:
    return CollisionOutcome(
        vi=impact_speed(state, const),
        s1_th=theoretical_skid_s1(state, const),
        s2_th=theoretical_skid_s2(state, const),
    )


def severity_probs(vi_kmh: float, p: InjuryParams) -> tuple[float, float, float]:
    """Ordered-logit probabilities of (slight, serious, fatal) injury.

    Uses the cumulative form P[slight] = L(a1 - b*vi) and
    P[slight or serious] = L(a2 - b*vi), so fatality risk rises with speed.
    """
    if not p.a1 < p.a2:
        raise InvalidParamsError(f"thresholds must satisfy a1 < a2, got a1={p.a1}, a2={p.a2}")
    return severity_probs_(vi_kmh, p.a1, p.a2, p.b_inj)


def severity_index(severity: Optional[str]) -> Optional[int]:
    return None if severity is None else SEVERITIES.index(severity)


def case_log_likelihood(state: KinematicState, tp_: ThrowParams, ip: InjuryParams, case: Case,
                        sigma2_s: float = SKID_LOG_VAR,
                        const: ModelConstants = ModelConstants()) -> float:
    return log_likelihood_(
        state.x, state.v, state.tp, state.ts, state.f,
        tp_.b0, tp_.b1, ip.a1, ip.a2, ip.b_inj,
        case.s1_m, case.s2_m, case.throw_m, severity_index(case.severity),
        sigma2_d=tp_.sigma2_d, sigma2_s=sigma2_s, g=const.g,
    )
