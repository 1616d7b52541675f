"""Metropolis-within-Gibbs posterior sampling for a single case.

Each sweep updates every free coordinate in turn with a Gaussian random
walk.  Bounded state variables are walked on the logit scale of their prior
range, parameters on their natural scale.  Proposal scales are tuned only
during burn-in.  After the coordinate updates a joint random-walk move is
attempted, using a covariance learned in the second half of burn-in; it
lets the chain travel along the narrow ridges that skid evidence carves
into (v, f, x, tp) space.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import G, Case, impact_speed_, log_likelihood_, severity_index
from .priors import COORDS, PriorSpec, STATE_NAMES, log_prior_, sample_prior_values

QUANTITIES = COORDS + ("vi",)

_ADAPT_BATCH = 50
_TARGET_ACCEPT = 0.44
_TARGET_ACCEPT_BLOCK = 0.234


class InitializationError(RuntimeError):
    """No state with finite posterior density was found (contradictory evidence)."""


class DegenerateVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class McmcConfig:
    n_chains: int = 3
    burn_in: int = 5000
    iterations: int = 50000
    thin: int = 10
    seed: int = 0
    block_moves: bool = True
    max_init_draws: int = 1_000_000

    def __post_init__(self):
        if self.n_chains < 1 or self.burn_in < 0 or self.iterations < 1 or self.thin < 1:
            raise ValueError("chain counts must be positive")
        if self.iterations % self.thin:
            raise ValueError("iterations must be a multiple of thin")

    @property
    def n_retained(self) -> int:
        return self.iterations // self.thin


@dataclass
class Posterior:
    """Retained draws, shape (n_chains, n_retained) per quantity."""

    case_id: str
    config: McmcConfig
    draws: dict[str, np.ndarray]
    acceptance: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return self.draws["v"].shape[0]

    def pooled(self, quantity: str) -> np.ndarray:
        return self.draws[quantity].reshape(-1)


@dataclass(frozen=True)
class Summary:
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float


def make_log_posterior(case: Case, spec: PriorSpec):
    """Return ``f(values) -> log prior + log likelihood`` over the 10 coordinates."""
    s1, s2, d = case.s1_m, case.s2_m, case.throw_m
    sev = severity_index(case.severity)
    sd2, ss2 = spec.sigma2_d, spec.sigma2_s

    def log_post(vals):
        lp = log_prior_(vals, spec)
        if lp == -math.inf:
            return lp
        return lp + log_likelihood_(*vals, s1, s2, d, sev, sd2, ss2)

    return log_post


def _initial_values(rng, spec, log_post, max_draws):
    for _ in range(max_draws):
        vals = sample_prior_values(rng, spec)
        # logit transform needs interior points
        if any(vals[i] in spec.range(n) and not spec.pinned(n)
               for i, n in enumerate(STATE_NAMES)):
            continue
        lp = log_post(vals)
        if lp > -math.inf:
            return vals, lp
    raise InitializationError(
        f"no state with finite posterior density in {max_draws} prior draws"
    )


class _Transform:
    """Logit map for a bounded coordinate, identity for a normal one."""

    def __init__(self, lo=None, hi=None):
        self.bounded = lo is not None
        self.lo, self.hi = lo, hi
        if self.bounded:
            self.width = hi - lo

    def to_u(self, t):
        if not self.bounded:
            return t
        return math.log((t - self.lo) / (self.hi - t))

    def to_theta(self, u):
        if not self.bounded:
            return u
        if u >= 0:
            return self.lo + self.width / (1.0 + math.exp(-u))
        e = math.exp(u)
        return self.lo + self.width * e / (1.0 + e)

    def log_jac(self, t):
        if not self.bounded:
            return 0.0
        if t <= self.lo or t >= self.hi:
            return -math.inf
        return math.log((t - self.lo) * (self.hi - t) / self.width)


class _LogTransform:
    """Log map for a positive coordinate."""

    def to_u(self, t):
        return math.log(t)

    def to_theta(self, u):
        return math.exp(u)

    def log_jac(self, t):
        return math.log(t) if t > 0 else -math.inf


def _stop_distance(v, tp, f):
    return v * tp + v * v / (2.0 * f * G)


def uses_gap_coordinate(case: Case, spec: PriorSpec) -> bool:
    """Whether the chain walks the impact-to-stop gap instead of x.

    Only when the evidence implies the pedestrian was struck (gap > 0) and
    x is free.  The gap r = v*tp + v**2/(2fg) - x equals the theoretical
    post-impact skid, so skid evidence constrains it directly while v, tp
    and f stay free to move.  The map from x to r is a unit shift for fixed
    (v, tp, f), so the target density is unchanged.
    """
    struck = case.s2_m is not None or case.throw_m is not None or case.severity is not None
    return struck and not spec.pinned("x")


def run_chain(case: Case, spec: PriorSpec, cfg: McmcConfig, chain_seed) -> dict:
    """Run one chain; returns retained draws (arrays) and acceptance rates."""
    rng = np.random.default_rng(chain_seed)
    log_post = make_log_posterior(case, spec)
    vals, lp = _initial_values(rng, spec, log_post, cfg.max_init_draws)
    gap = uses_gap_coordinate(case, spec)

    # work holds the sampled coordinates; slot 0 is the gap r when gap is set
    work = list(vals)
    if gap:
        work[0] = _stop_distance(vals[1], vals[2], vals[4]) - vals[0]

    def natural(w):
        if not gap:
            return w
        out = list(w)
        out[0] = _stop_distance(w[1], w[2], w[4]) - w[0]
        return out

    active = [i for i, n in enumerate(COORDS) if not spec.pinned(n)]
    transforms = {}
    for i in active:
        name = COORDS[i]
        if gap and i == 0:
            transforms[i] = _LogTransform()
        elif name in STATE_NAMES:
            transforms[i] = _Transform(*spec.range(name))
        else:
            transforms[i] = _Transform()
    n_act = len(active)

    # initial scales: a fifth of the prior sd for normals, unit for the rest
    scales = {}
    for i in active:
        name = COORDS[i]
        scales[i] = 1.0 if name in STATE_NAMES else 0.2 * getattr(spec, name)[1]

    u = {i: transforms[i].to_u(work[i]) for i in active}
    ljac = {i: transforms[i].log_jac(work[i]) for i in active}
    target = lp + sum(ljac.values())

    n_keep = cfg.n_retained
    out = np.empty((len(QUANTITIES), n_keep))
    acc = {i: 0 for i in active}
    acc_batch = {i: 0 for i in active}
    block_acc = 0
    block_tries = 0
    block_batch_acc = 0
    block_batch_tries = 0
    log_block_scale = math.log(2.38 / math.sqrt(max(n_act, 1)))
    chol = None
    history = []
    use_block = cfg.block_moves and n_act > 1 and cfg.burn_in >= 400
    hist_start = cfg.burn_in // 2
    block_start = (3 * cfg.burn_in) // 4

    total = cfg.burn_in + cfg.iterations
    chunk = 1000
    k = 0
    it = 0
    while it < total:
        m = min(chunk, total - it)
        z_all = rng.standard_normal((m, n_act)).tolist()
        lu_all = np.log(rng.random((m, n_act + 1))).tolist()
        zb_all = rng.standard_normal((m, n_act)) if use_block else None
        for j in range(m):
            z = z_all[j]
            lu = lu_all[j]
            for a, i in enumerate(active):
                tr = transforms[i]
                u_new = u[i] + scales[i] * z[a]
                t_new = tr.to_theta(u_new)
                lj_new = tr.log_jac(t_new)
                if lj_new == -math.inf:
                    continue
                old = work[i]
                work[i] = t_new
                lp_new = log_post(natural(work))
                t_prop = target - ljac[i] - lp + lj_new + lp_new
                if lu[a] < t_prop - target:
                    u[i] = u_new
                    ljac[i] = lj_new
                    lp = lp_new
                    target = t_prop
                    acc_batch[i] += 1
                    if it >= cfg.burn_in:
                        acc[i] += 1
                else:
                    work[i] = old

            if use_block and chol is not None:
                step = (math.exp(log_block_scale) * (chol @ zb_all[j])).tolist()
                u_new = [u[i] + step[a] for a, i in enumerate(active)]
                new_work = list(work)
                lj_new = {}
                for a, i in enumerate(active):
                    new_work[i] = transforms[i].to_theta(u_new[a])
                    lj_new[i] = transforms[i].log_jac(new_work[i])
                lj_sum = sum(lj_new.values())
                block_batch_tries += 1
                if it >= cfg.burn_in:
                    block_tries += 1
                if lj_sum > -math.inf:
                    lp_new = log_post(natural(new_work))
                    t_prop = lp_new + lj_sum
                    if lu[n_act] < t_prop - target:
                        work = new_work
                        for a, i in enumerate(active):
                            u[i] = u_new[a]
                        ljac = lj_new
                        lp = lp_new
                        target = t_prop
                        block_batch_acc += 1
                        if it >= cfg.burn_in:
                            block_acc += 1

            if it < cfg.burn_in:
                if use_block and it >= hist_start:
                    history.append([u[i] for i in active])
                if (it + 1) % _ADAPT_BATCH == 0:
                    delta = min(0.1, 1.0 / math.sqrt((it + 1) / _ADAPT_BATCH))
                    for i in active:
                        rate = acc_batch[i] / _ADAPT_BATCH
                        scales[i] *= math.exp(delta if rate > _TARGET_ACCEPT else -delta)
                        acc_batch[i] = 0
                    if block_batch_tries:
                        rate = block_batch_acc / block_batch_tries
                        log_block_scale += delta if rate > _TARGET_ACCEPT_BLOCK else -delta
                        block_batch_acc = block_batch_tries = 0
                if use_block and (it + 1 == block_start or it + 1 == cfg.burn_in):
                    chol = _chol_from_history(history)
            else:
                if (it - cfg.burn_in + 1) % cfg.thin == 0:
                    vals = natural(work)
                    out[:10, k] = vals
                    out[10, k] = impact_speed_(vals[0], vals[1], vals[2], vals[4])
                    k += 1
            it += 1

    draws = {q: out[n] for n, q in enumerate(QUANTITIES)}
    names = {i: ("gap" if gap and i == 0 else COORDS[i]) for i in active}
    rates = {names[i]: acc[i] / cfg.iterations for i in active}
    if use_block:
        rates["block"] = block_acc / max(block_tries, 1)
    return {"draws": draws, "acceptance": rates}


def _chol_from_history(history):
    h = np.asarray(history)
    if len(h) < 2 * h.shape[1] + 2:
        return None
    cov = np.cov(h, rowvar=False) + 1e-10 * np.eye(h.shape[1])
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return None


def chain_seeds(seed: int, n_chains: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n_chains)


def run_inference(case: Case, spec: PriorSpec, cfg: McmcConfig = McmcConfig(),
                  n_jobs: int = 1) -> Posterior:
    """Run ``cfg.n_chains`` independently seeded chains for one case.

    Results depend only on ``(cfg.seed, case, spec)``; ``n_jobs > 1`` runs
    the chains in worker processes and yields identical output.
    """
    seeds = chain_seeds(cfg.seed, cfg.n_chains)
    if n_jobs > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            chains = list(ex.map(run_chain, [case] * cfg.n_chains,
                                 [spec] * cfg.n_chains, [cfg] * cfg.n_chains, seeds))
    else:
        chains = [run_chain(case, spec, cfg, s) for s in seeds]
    draws = {q: np.stack([c["draws"][q] for c in chains]) for q in QUANTITIES}
    keys = chains[0]["acceptance"].keys()
    acceptance = {k: np.array([c["acceptance"][k] for c in chains]) for k in keys}
    return Posterior(case_id=case.id, config=cfg, draws=draws, acceptance=acceptance)


def psrf(posterior: Posterior | np.ndarray, quantity: str = "v") -> float:
    """Gelman-Rubin potential scale reduction factor.

    sqrt(((n-1)/n * W + B/n) / W) with W the mean within-chain variance and
    B = n * variance of the chain means.  Accepts a Posterior or an array
    of shape (n_chains, n).
    """
    chains = posterior.draws[quantity] if isinstance(posterior, Posterior) else np.asarray(posterior)
    m, n = chains.shape
    if m < 2 or n < 10:
        raise ValueError("need at least 2 chains with 10 draws each")
    w = chains.var(axis=1, ddof=1).mean()
    if w == 0:
        raise DegenerateVarianceError(f"within-chain variance of {quantity!r} is zero")
    b = n * chains.mean(axis=1).var(ddof=1)
    return float(math.sqrt(((n - 1) / n * w + b / n) / w))


def summarize(posterior: Posterior | np.ndarray, quantity: str = "v") -> Summary:
    x = posterior.pooled(quantity) if isinstance(posterior, Posterior) else np.ravel(posterior)
    if x.size == 0:
        raise ValueError("no draws to summarize")
    q = np.quantile(x, [0.025, 0.5, 0.975])
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return Summary(float(x.mean()), sd, float(q[0]), float(q[1]), float(q[2]))
