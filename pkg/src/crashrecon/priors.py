"""Prior distributions for the background variables and model parameters."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .model import (
    InjuryParams,
    KinematicState,
    SKID_LOG_VAR,
    THROW_LOG_VAR,
    ThrowParams,
)

STATE_NAMES = ("x", "v", "tp", "ts", "f")
PARAM_NAMES = ("b0", "b1", "a1", "a2", "b_inj")
COORDS = STATE_NAMES + PARAM_NAMES

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PriorSpec:
    """Uniform ranges for the state and independent normals for the parameters.

    A range with ``lower == upper`` or a normal with ``sd == 0`` pins that
    coordinate to a single value; the sampler then leaves it fixed.
    """

    x_range: tuple[float, float] = (0.0, 200.0)
    v_range: tuple[float, float] = (5.0, 50.0)
    tp_range: tuple[float, float] = (0.5, 2.5)
    ts_range: tuple[float, float] = (0.1, 0.5)
    f_range: tuple[float, float] = (0.45, 1.0)
    b0: tuple[float, float] = (-3.43, 0.30)
    b1: tuple[float, float] = (1.61, 0.09)
    a1: tuple[float, float] = (4.07, 0.73)
    a2: tuple[float, float] = (7.21, 1.01)
    b_inj: tuple[float, float] = (0.095, 0.02)
    sigma2_d: float = THROW_LOG_VAR
    sigma2_s: float = SKID_LOG_VAR

    def __post_init__(self):
        for name in STATE_NAMES:
            lo, hi = self.range(name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name}_range must be a finite interval with lower <= upper")
        if self.x_range[0] < 0:
            raise ValueError("x_range must be nonnegative")
        for name in ("v", "tp", "ts", "f"):
            if self.range(name)[0] <= 0:
                raise ValueError(f"{name}_range must be strictly positive")
        for name in PARAM_NAMES:
            mean, sd = getattr(self, name)
            if not (math.isfinite(mean) and sd >= 0):
                raise ValueError(f"{name} needs a finite mean and nonnegative sd")
        if not (self.sigma2_d > 0 and self.sigma2_s > 0):
            raise ValueError("measurement variances must be positive")

    def range(self, name: str) -> tuple[float, float]:
        return tuple(getattr(self, f"{name}_range"))

    def midpoint(self, name: str) -> float:
        lo, hi = self.range(name)
        return 0.5 * (lo + hi)

    def pinned(self, name: str) -> bool:
        if name in STATE_NAMES:
            lo, hi = self.range(name)
            return lo == hi
        return getattr(self, name)[1] == 0

    def pinned_value(self, name: str) -> float:
        if name in STATE_NAMES:
            return self.range(name)[0]
        return getattr(self, name)[0]

    def mean_params(self) -> tuple[ThrowParams, InjuryParams]:
        return (
            ThrowParams(self.b0[0], self.b1[0], self.sigma2_d),
            InjuryParams(self.a1[0], self.a2[0], self.b_inj[0]),
        )

    def with_pinned_params(self) -> "PriorSpec":
        """Copy with every parameter node fixed at its mean."""
        return replace(self, **{n: (getattr(self, n)[0], 0.0) for n in PARAM_NAMES})

    def with_pinned_state(self, **values: float) -> "PriorSpec":
        """Copy with the named state variables fixed (``None`` means midpoint)."""
        kw = {}
        for name, val in values.items():
            if val is None:
                val = self.midpoint(name)
            kw[f"{name}_range"] = (float(val), float(val))
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict, base: "PriorSpec | None" = None) -> "PriorSpec":
        base = base or cls()
        known = set(asdict(base))
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown prior fields: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            if isinstance(v, dict):
                v = (float(v["mean"]), float(v["sd"]))
            elif isinstance(v, (list, tuple)):
                if len(v) != 2:
                    raise ValueError(f"{k} must have two entries")
                v = (float(v[0]), float(v[1]))
            else:
                v = float(v)
            kw[k] = v
        return replace(base, **kw)


def default_priors() -> PriorSpec:
    return PriorSpec()


def _uniform_logpdf(val, lo, hi):
    if lo == hi:
        return 0.0 if val == lo else -math.inf
    if lo <= val <= hi:
        return -math.log(hi - lo)
    return -math.inf


def _normal_logpdf(val, mean, sd):
    if sd == 0:
        return 0.0 if val == mean else -math.inf
    z = (val - mean) / sd
    return -0.5 * z * z - math.log(sd) - _HALF_LOG_2PI


def prior_log_density(state: KinematicState, tp_: ThrowParams, ip: InjuryParams,
                      spec: PriorSpec) -> float:
    """Joint log prior density; -inf outside the support.

    Pinned coordinates contribute zero at their value (point mass).
    Parameter vectors with a1 >= a2 are outside the support.
    """
    values = (state.x, state.v, state.tp, state.ts, state.f,
              tp_.b0, tp_.b1, ip.a1, ip.a2, ip.b_inj)
    return log_prior_(values, spec)


def log_prior_(values, spec: PriorSpec) -> float:
    lp = 0.0
    for name, val in zip(STATE_NAMES, values[:5]):
        lo, hi = spec.range(name)
        lp += _uniform_logpdf(val, lo, hi)
    if lp == -math.inf:
        return lp
    for name, val in zip(PARAM_NAMES, values[5:]):
        mean, sd = getattr(spec, name)
        lp += _normal_logpdf(val, mean, sd)
    a1, a2 = values[7], values[8]
    if not a1 < a2:
        return -math.inf
    return lp


def sample_prior_values(rng: np.random.Generator, spec: PriorSpec) -> list[float]:
    out = []
    for name in STATE_NAMES:
        lo, hi = spec.range(name)
        out.append(lo if lo == hi else float(rng.uniform(lo, hi)))
    while True:
        params = [float(getattr(spec, n)[0] + getattr(spec, n)[1] * rng.standard_normal())
                  for n in PARAM_NAMES]
        if params[2] < params[3]:
            return out + params


def sample_prior(rng: np.random.Generator, spec: PriorSpec
                 ) -> tuple[KinematicState, ThrowParams, InjuryParams]:
    """One independent draw of (state, throw params, injury params).

    Parameter vectors with ``a1 >= a2`` are redrawn.
    """
    vals = sample_prior_values(rng, spec)
    return unpack(vals, spec)


def unpack(vals, spec: PriorSpec) -> tuple[KinematicState, ThrowParams, InjuryParams]:
    return (
        KinematicState(*vals[:5]),
        ThrowParams(vals[5], vals[6], spec.sigma2_d),
        InjuryParams(vals[7], vals[8], vals[9]),
    )
