"""Verification machinery: forward simulation and a brute-force grid posterior.

The grid code re-implements the forward model with numpy arrays instead of
calling into :mod:`crashrecon.model`, so the two routes check each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (
    Case,
    G,
    KMH_PER_MS,
    SEVERITIES,
    collision_outcome,
    severity_probs,
)
from .priors import PriorSpec, STATE_NAMES, sample_prior

_LOG_2PI = np.log(2.0 * np.pi)


class ZeroMassError(RuntimeError):
    """Every grid cell has zero likelihood."""


@dataclass(frozen=True)
class GridConfig:
    x: int = 160
    v: int = 90
    tp: int = 10
    ts: int = 8
    f: int = 16
    max_cells: int = 10**8

    def __post_init__(self):
        for n in STATE_NAMES:
            if getattr(self, n) < 8:
                raise ValueError(f"grid resolution for {n} must be at least 8")

    def resolution(self, name: str) -> int:
        return getattr(self, name)

    def refined(self, factor: int = 2) -> "GridConfig":
        return GridConfig(*(factor * getattr(self, n) for n in STATE_NAMES),
                          max_cells=self.max_cells * factor**5)


@dataclass(frozen=True)
class SyntheticTruth:
    x: float
    v: float
    tp: float
    ts: float
    f: float
    b0: float
    b1: float
    a1: float
    a2: float
    b_inj: float
    vi: float
    s1_th: float
    s2_th: float


@dataclass(frozen=True)
class GridResult:
    mean_v: float
    mean_vi: float
    pn: float
    p_speeding: float
    v_star_kmh: float
    n_cells: int


def _axis(spec: PriorSpec, grid: GridConfig, name: str) -> np.ndarray:
    lo, hi = spec.range(name)
    if lo == hi:
        return np.array([lo])
    n = grid.resolution(name)
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5)


def _impact_speed(x, v, tp, f):
    decel = f * G
    travel = x - v * tp
    rem = v * v - 2.0 * decel * np.maximum(travel, 0.0)
    vi = np.sqrt(np.maximum(rem, 0.0))
    vi = np.where(rem <= 0.0, 0.0, vi)
    return np.where(travel < 0.0, v, vi)


def _lognormal(y, log_mean, var):
    z = np.log(y) - log_mean
    return -np.log(y) - 0.5 * (_LOG_2PI + np.log(var)) - 0.5 * z * z / var


def _loglik_cells(x, v, tp, ts, f, case: Case, spec: PriorSpec):
    b0, b1 = spec.b0[0], spec.b1[0]
    a1, a2, b = spec.a1[0], spec.a2[0], spec.b_inj[0]
    decel = f * G
    shape = np.broadcast(x, v, tp, ts, f).shape
    ll = np.zeros(shape)
    vi = _impact_speed(x, v, tp, f) * np.ones(shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        if case.s1_m is not None:
            s1 = np.where(v > decel * ts, v * v / (2.0 * decel) - v * ts + 0.5 * decel * ts * ts, 0.0)
            ll = ll + np.where(s1 > 0, _lognormal(case.s1_m, np.log(s1), spec.sigma2_s), -np.inf)
        if case.s2_m is not None:
            skidding = (x >= v * tp + v * ts - 0.5 * decel * ts * ts) & (vi > 0)
            s2 = np.where(skidding, vi * vi / (2.0 * decel), 0.0)
            ll = ll + np.where(s2 > 0, _lognormal(case.s2_m, np.log(s2), spec.sigma2_s), -np.inf)
        vk = vi * KMH_PER_MS
        if case.throw_m is not None:
            ll = ll + np.where(vi > 0, _lognormal(case.throw_m, b0 + b1 * np.log(vk), spec.sigma2_d),
                               -np.inf)
        if case.severity is not None:
            c1 = 1.0 / (1.0 + np.exp(-(a1 - b * vk)))
            c2 = 1.0 / (1.0 + np.exp(-(a2 - b * vk)))
            p = {"slight": c1, "serious": c2 - c1, "fatal": 1.0 - c2}[case.severity]
            ll = ll + np.where(vi > 0, np.log(p), -np.inf)
    return ll, vi


def grid_posterior(case: Case, spec: PriorSpec, grid: GridConfig = GridConfig(),
                   v_star_kmh: Optional[float] = None,
                   axis_order: tuple[str, ...] = ("tp", "ts", "x", "v", "f")) -> GridResult:
    """Posterior expectations by midpoint quadrature over the prior box.

    Parameters are pinned at their prior means, so the integral is over
    (x, v, tp, ts, f) only.  The first two names in ``axis_order`` are
    looped over; the remaining three are vectorised.  The result does not
    depend on the order beyond floating-point rounding.
    """
    if sorted(axis_order) != sorted(STATE_NAMES):
        raise ValueError("axis_order must be a permutation of the state names")
    if v_star_kmh is None:
        v_star_kmh = case.speed_limit_kmh
    v_star = v_star_kmh / KMH_PER_MS
    limit = case.speed_limit_kmh / KMH_PER_MS
    axes = {n: _axis(spec, grid, n) for n in STATE_NAMES}
    n_cells = int(np.prod([a.size for a in axes.values()]))
    if n_cells > grid.max_cells:
        raise ValueError(f"grid has {n_cells} cells, limit is {grid.max_cells}")

    outer, inner = axis_order[:2], axis_order[2:]
    mesh = np.meshgrid(*(axes[n] for n in inner), indexing="ij")
    inner_vals = dict(zip(inner, mesh))

    # running sums kept relative to the largest log-likelihood seen so far
    top = -np.inf
    sums = np.zeros(5)
    for idx in itertools.product(*(range(axes[n].size) for n in outer)):
        vals = dict(inner_vals)
        for n, i in zip(outer, idx):
            vals[n] = axes[n][i]
        x, v, tp, ts, f = (vals[n] for n in STATE_NAMES)
        ll, vi = _loglik_cells(x, v, tp, ts, f, case, spec)
        m = ll.max()
        if m == -np.inf:
            continue
        if m > top:
            sums *= np.exp(top - m)
            top = m
        w = np.exp(ll - top)
        vi_star = _impact_speed(x, v_star, tp, f) * np.ones(w.shape)
        v_full = v * np.ones(w.shape)
        sums += (
            w.sum(),
            (w * v_full).sum(),
            (w * vi).sum(),
            w[vi_star == 0].sum(),
            w[v_full > limit].sum(),
        )
    if sums[0] == 0:
        raise ZeroMassError(f"case {case.id!r}: all grid cells have zero likelihood")
    mass = sums[0]
    return GridResult(
        mean_v=sums[1] / mass,
        mean_vi=sums[2] / mass,
        pn=sums[3] / mass,
        p_speeding=sums[4] / mass,
        v_star_kmh=v_star_kmh,
        n_cells=n_cells,
    )


def simulate_case(rng: np.random.Generator, spec: PriorSpec, require_collision: bool = True,
                  case_id: str = "sim", speed_limit_kmh: float = 60.0
                  ) -> tuple[SyntheticTruth, Case]:
    """Draw a collision from the prior and generate its scene measurements.

    Skid lengths are emitted only when their theoretical value is positive;
    throw distance and injury severity only when the pedestrian was struck.
    """
    while True:
        state, tp_, ip = sample_prior(rng, spec)
        out = collision_outcome(state)
        if require_collision and out.vi <= 0:
            continue
        meas = {}
        if out.s1_th > 0:
            meas["s1_m"] = float(np.exp(rng.normal(np.log(out.s1_th), np.sqrt(spec.sigma2_s))))
        if out.s2_th > 0:
            meas["s2_m"] = float(np.exp(rng.normal(np.log(out.s2_th), np.sqrt(spec.sigma2_s))))
        if out.vi > 0:
            vi_kmh = out.vi * KMH_PER_MS
            mu = tp_.b0 + tp_.b1 * np.log(vi_kmh)
            meas["throw_m"] = float(np.exp(rng.normal(mu, np.sqrt(tp_.sigma2_d))))
            probs = severity_probs(vi_kmh, ip)
            meas["severity"] = SEVERITIES[int(rng.choice(3, p=np.clip(probs, 0, 1)))]
        if not meas:
            continue
        truth = SyntheticTruth(state.x, state.v, state.tp, state.ts, state.f,
                               tp_.b0, tp_.b1, ip.a1, ip.a2, ip.b_inj,
                               out.vi, out.s1_th, out.s2_th)
        return truth, Case(case_id, speed_limit_kmh, **meas)


@dataclass
class CoverageReport:
    n_cases: int
    covered: int
    coverage: float
    truths: np.ndarray
    intervals: np.ndarray
    failures: list[str] = field(default_factory=list)


def interval_coverage(truths, intervals) -> float:
    """Fraction of truths inside their closed [lower, upper] intervals."""
    truths = np.asarray(truths, dtype=float)
    intervals = np.asarray(intervals, dtype=float)
    inside = (intervals[:, 0] <= truths) & (truths <= intervals[:, 1])
    return float(inside.mean())


def calibration_experiment(n_cases: int, spec: PriorSpec, cfg, seed: int = 0,
                           quantity: str = "v") -> CoverageReport:
    """Coverage of posterior 95% intervals over cases simulated from the prior."""
    from .sampler import InitializationError, run_inference, summarize

    if n_cases < 100:
        raise ValueError("calibration needs at least 100 cases")
    rng = np.random.default_rng(seed)
    truths, intervals, failures = [], [], []
    for k in range(n_cases):
        truth, case = simulate_case(rng, spec, case_id=f"cal{k:04d}")
        case_cfg = type(cfg)(**{**cfg.__dict__, "seed": int(rng.integers(2**32))})
        try:
            post = run_inference(case, spec, case_cfg)
        except InitializationError:
            failures.append(case.id)
            continue
        s = summarize(post, quantity)
        truths.append(getattr(truth, quantity))
        intervals.append((s.q025, s.q975))
    truths = np.array(truths)
    intervals = np.array(intervals).reshape(-1, 2)
    cov = interval_coverage(truths, intervals)
    covered = int(round(cov * len(truths)))
    return CoverageReport(n_cases, covered, cov, truths, intervals, failures)
