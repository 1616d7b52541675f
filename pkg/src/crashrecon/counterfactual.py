"""Counterfactual queries: would the collision have happened at the limit?

The factual and counterfactual worlds share every background variable
(x, tp, ts, f); only the initial speed is set to the limit.  The pedestrian
is spared in the counterfactual world exactly when the counterfactual
impact speed is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .model import Case, G, KMH_PER_MS, KinematicState, impact_speed, impact_speed_
from .priors import PriorSpec
from .sampler import DegenerateVarianceError, Posterior, Summary, psrf, summarize


class NoSkidEvidenceError(ValueError):
    pass


class NoRealRootError(ValueError):
    pass


@dataclass(frozen=True)
class CounterfactualReport:
    case_id: str
    p_speeding: float
    pn: float
    v_kmh: Summary
    vi_kmh: Summary
    method1_v_kmh: Optional[float] = None
    method1_vistar_kmh: Optional[float] = None
    n_chains: int = 0
    psrf_max: float = float("nan")

    @property
    def converged(self) -> bool:
        return not self.psrf_max > 1.1


@dataclass(frozen=True)
class ReductionEstimate:
    total: float
    n_cases: int


@dataclass(frozen=True)
class Method1Result:
    v_kmh: float
    vi_star_kmh: Optional[float]
    x_m: Optional[float]


def counterfactual_impact_speed(sample: KinematicState, v_star_kmh: Optional[float] = None,
                                v_star_ms: Optional[float] = None) -> float:
    """Impact speed (m/s) had the vehicle started at ``v_star`` instead of ``v``.

    Give the counterfactual speed either in km/h or, to avoid a unit round
    trip, directly in m/s.
    """
    if v_star_ms is None:
        if v_star_kmh is None:
            raise TypeError("give v_star_kmh or v_star_ms")
        v_star_ms = v_star_kmh / KMH_PER_MS
    return impact_speed(sample.replace(v=v_star_ms))


def counterfactual_impact_speeds(posterior: Posterior, v_star_kmh: float) -> np.ndarray:
    v_star = v_star_kmh / KMH_PER_MS
    x, tp, f = (posterior.pooled(q) for q in ("x", "tp", "f"))
    return np.array([impact_speed_(a, v_star, b, c) for a, b, c in zip(x, tp, f)])


def probability_of_necessity(posterior: Posterior, v_star_kmh: float) -> float:
    """Posterior probability that a vehicle at ``v_star_kmh`` would have stopped short."""
    vi_star = counterfactual_impact_speeds(posterior, v_star_kmh)
    if vi_star.size == 0:
        raise ValueError("empty posterior")
    return float(np.mean(vi_star == 0.0))


def prob_speeding(posterior: Posterior | np.ndarray, limit_kmh: float) -> float:
    """Fraction of initial-speed draws (m/s) strictly above the limit."""
    v = posterior.pooled("v") if isinstance(posterior, Posterior) else np.ravel(posterior)
    if v.size == 0:
        raise ValueError("empty posterior")
    return float(np.mean(v > limit_kmh / KMH_PER_MS))


def accident_reduction(reports: Iterable[CounterfactualReport | float]) -> ReductionEstimate:
    """Expected number of accidents prevented: the sum of per-case PN."""
    pns = [r.pn if isinstance(r, CounterfactualReport) else float(r) for r in reports]
    return ReductionEstimate(total=math.fsum(pns), n_cases=len(pns))


def _skid_inversion(s1_m, ts, f, g=G):
    # v^2/(2fg) - ts*v + (fg*ts^2/2 - s1) = 0, positive root
    a = 1.0 / (2.0 * f * g)
    b = -ts
    c = 0.5 * f * g * ts * ts - s1_m
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise NoRealRootError(f"skid length {s1_m} m has no real speed solution")
    root = (-b + math.sqrt(disc)) / (2.0 * a)
    if root <= 0:
        raise NoRealRootError(f"skid length {s1_m} m gives a non-positive speed")
    return root


def deterministic_method1(case: Case, spec: PriorSpec, limit_kmh: Optional[float] = None
                          ) -> Method1Result:
    """Point reconstruction with f, tp and ts fixed at their prior midpoints.

    The initial speed comes from inverting the skid equation.  The
    distance x is recovered from the post-impact skid when available,
    otherwise from the impact speed implied by the median of the throw
    model; with neither, the counterfactual impact speed is left unset.
    """
    if case.s1_m is None:
        raise NoSkidEvidenceError(f"case {case.id!r} has no skidmark measurement")
    limit_kmh = case.speed_limit_kmh if limit_kmh is None else limit_kmh
    f, tp, ts = (spec.midpoint(n) for n in ("f", "tp", "ts"))
    v = _skid_inversion(case.s1_m, ts, f)
    stop = v * tp + v * v / (2.0 * f * G)

    x = None
    if case.s2_m is not None:
        x = max(stop - case.s2_m, 0.0)
    elif case.throw_m is not None:
        vi = math.exp((math.log(case.throw_m) - spec.b0[0]) / spec.b1[0]) / KMH_PER_MS
        if vi >= v:
            x = v * tp
        else:
            x = v * tp + (v * v - vi * vi) / (2.0 * f * G)

    vi_star = None
    if x is not None:
        state = KinematicState(x, v, tp, ts, f)
        vi_star = counterfactual_impact_speed(state, limit_kmh) * KMH_PER_MS
    return Method1Result(v_kmh=v * KMH_PER_MS, vi_star_kmh=vi_star, x_m=x)


def build_report(posterior: Posterior, case: Case, spec: PriorSpec,
                 v_star_kmh: Optional[float] = None,
                 psrf_quantities=("x", "v", "tp", "ts", "f")) -> CounterfactualReport:
    v_star_kmh = case.speed_limit_kmh if v_star_kmh is None else v_star_kmh
    v = posterior.pooled("v") * KMH_PER_MS
    vi = posterior.pooled("vi") * KMH_PER_MS

    worst = float("nan")
    if posterior.n_chains > 1:
        vals = []
        for q in psrf_quantities:
            try:
                vals.append(psrf(posterior, q))
            except DegenerateVarianceError:
                pass
        if vals:
            worst = max(vals)

    try:
        m1 = deterministic_method1(case, spec, v_star_kmh)
    except (NoSkidEvidenceError, NoRealRootError):
        m1 = None
    return CounterfactualReport(
        case_id=case.id,
        p_speeding=prob_speeding(posterior, case.speed_limit_kmh),
        pn=probability_of_necessity(posterior, v_star_kmh),
        v_kmh=summarize(v),
        vi_kmh=summarize(vi),
        method1_v_kmh=None if m1 is None else m1.v_kmh,
        method1_vistar_kmh=None if m1 is None else m1.vi_star_kmh,
        n_chains=posterior.n_chains,
        psrf_max=worst,
    )
