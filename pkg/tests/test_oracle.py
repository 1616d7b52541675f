import math

import numpy as np
import pytest
from scipy import stats

from crashrecon.casefile import load_bundled_fixtures
from crashrecon.model import (
    G,
    Case,
    InjuryParams,
    KinematicState,
    ThrowParams,
    case_log_likelihood,
    collision_outcome,
    severity_probs,
)
from crashrecon.oracle import (
    GridConfig,
    ZeroMassError,
    _loglik_cells,
    grid_posterior,
    interval_coverage,
    simulate_case,
)
from crashrecon.priors import PriorSpec, STATE_NAMES

PINNED = PriorSpec().with_pinned_params()


def _pinned_at(spec, **vals):
    return spec.with_pinned_state(**vals)


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridConfig(x=4)


def test_vectorised_loglik_matches_scalar():
    rng = np.random.default_rng(5)
    tp_, ip = PINNED.mean_params()
    cases = [Case("a", s1_m=25.0, s2_m=8.0, throw_m=14.0, severity="serious"),
             Case("b", s1_m=60.0, severity="fatal"), Case("c", throw_m=3.0, severity="slight")]
    for case in cases:
        for _ in range(300):
            s = KinematicState(rng.uniform(0, 200), rng.uniform(5, 50), rng.uniform(0.5, 2.5),
                               rng.uniform(0.1, 0.5), rng.uniform(0.45, 1.0))
            ref = case_log_likelihood(s, tp_, ip, case)
            got, vi = _loglik_cells(*(np.array([getattr(s, n)]) for n in STATE_NAMES), case, PINNED)
            if ref == -math.inf:
                assert got[0] == -np.inf
            else:
                assert got[0] == pytest.approx(ref, rel=1e-10)


def test_no_data_prior_mean():
    r = grid_posterior(Case("empty"), PINNED, GridConfig(8, 8, 8, 8, 8))
    assert r.mean_v == pytest.approx(27.5, abs=1e-9)


def test_pinned_skid_converges_to_root():
    spec = PINNED.with_pinned_state(tp=None, ts=None, f=None)
    root = 0.725 * G * 0.3 + math.sqrt(2 * 0.725 * G * 23.44)
    coarse = grid_posterior(Case("c", s1_m=23.44), spec, GridConfig(x=8, v=200))
    fine = grid_posterior(Case("c", s1_m=23.44), spec, GridConfig(x=8, v=20000))
    assert abs(fine.mean_v - coarse.mean_v) < 0.01
    # lognormal noise shifts the mean slightly off the root, by well under 1%
    assert fine.mean_v == pytest.approx(root, rel=0.01)


def test_zero_mass():
    spec = PriorSpec(v_range=(5.0, 6.0)).with_pinned_params().with_pinned_state(x=200.0)
    with pytest.raises(ZeroMassError):
        grid_posterior(Case("bad", throw_m=10.0), spec, GridConfig(8, 8, 8, 8, 8))


def test_axis_order_invariance():
    cases, _ = load_bundled_fixtures()
    g = GridConfig(40, 30, 8, 8, 10)
    a = grid_posterior(cases[1], PINNED, g)
    b = grid_posterior(cases[1], PINNED, g, axis_order=("x", "f", "v", "tp", "ts"))
    for k in ("mean_v", "mean_vi", "pn", "p_speeding"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), rel=1e-10)


@pytest.mark.slow
def test_grid_self_convergence():
    cases, _ = load_bundled_fixtures()
    base = GridConfig(64, 48, 8, 8, 12)
    for case in cases:
        a = grid_posterior(case, PINNED, base)
        b = grid_posterior(case, PINNED, base.refined(2))
        assert b.mean_v == pytest.approx(a.mean_v, rel=0.005), case.id
        assert b.mean_vi == pytest.approx(a.mean_vi, rel=0.005), case.id


def test_simulate_requires_collision():
    rng = np.random.default_rng(0)
    for k in range(10_000):
        truth, case = simulate_case(rng, PriorSpec())
        assert truth.vi > 0
        assert case.throw_m is not None and case.severity is not None
        assert (case.s2_m is not None) == (truth.s2_th > 0)


def test_simulate_without_collision_requirement():
    rng = np.random.default_rng(1)
    misses = 0
    for _ in range(500):
        truth, case = simulate_case(rng, PriorSpec(), require_collision=False)
        assert case.has_measurements
        if truth.vi == 0:
            misses += 1
            assert case.throw_m is None
    assert misses > 0


def _pinned_state_spec(x, v, tp, ts, f):
    return PINNED.with_pinned_state(x=x, v=v, tp=tp, ts=ts, f=f)


def test_simulated_measurement_marginals():
    # pinned vi = 40 km/h, struck during the steady skid
    v, tp, ts, f = 20.0, 1.0, 0.3, 0.7
    decel = f * G
    vi = 40 / 3.6
    x = v * tp + (v * v - vi * vi) / (2 * decel)
    spec = _pinned_state_spec(x, v, tp, ts, f)
    out = collision_outcome(KinematicState(x, v, tp, ts, f))
    assert out.vi == pytest.approx(vi)
    rng = np.random.default_rng(3)
    sims = [simulate_case(rng, spec)[1] for _ in range(10_000)]
    throw = np.array([c.throw_m for c in sims])
    s1 = np.array([c.s1_m for c in sims])
    s2 = np.array([c.s2_m for c in sims])
    assert np.median(throw) == pytest.approx(math.exp(-3.43 + 1.61 * math.log(40)), rel=0.02)
    assert math.exp(-3.43 + 1.61 * math.log(40)) == pytest.approx(12.3, abs=0.05)
    for data, median, var in ((throw, math.exp(-3.43 + 1.61 * math.log(40)), 0.06),
                              (s1, out.s1_th, 0.01), (s2, out.s2_th, 0.01)):
        p = stats.kstest(data, stats.lognorm(s=math.sqrt(var), scale=median).cdf).pvalue
        assert p > 0.01


def test_simulated_severity_frequencies():
    v, tp = 60 / 3.6, 2.0
    spec = _pinned_state_spec(1.0, v, tp, 0.3, 0.7)  # impact during reaction at 60 km/h
    rng = np.random.default_rng(4)
    sev = [simulate_case(rng, spec)[1].severity for _ in range(10_000)]
    freq = np.array([sev.count(s) for s in ("slight", "serious", "fatal")]) / len(sev)
    expected = severity_probs(60.0, InjuryParams(4.07, 7.21, 0.095))
    assert freq == pytest.approx(expected, abs=0.015)
    assert stats.chisquare(freq * len(sev), np.array(expected) * len(sev)).pvalue > 0.01


def test_interval_coverage_extremes():
    truths = np.linspace(6, 49, 50)
    assert interval_coverage(truths, np.tile([5.0, 50.0], (50, 1))) == 1.0
    assert interval_coverage(truths, np.column_stack([truths + 0.1, truths + 0.1])) == 0.0
    assert interval_coverage([1.0, 2.0], [[0.0, 1.5], [2.5, 3.0]]) == 0.5
