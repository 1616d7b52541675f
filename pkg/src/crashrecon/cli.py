"""Batch command line: ``crashrecon {reconstruct,simulate,method1,diagnose}``.

Exit status is 0 on success, 1 if any case failed and 2 on configuration
or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .casefile import CaseFileError, dump_cases, load_cases, write_report
from .counterfactual import (
    CounterfactualReport,
    NoRealRootError,
    NoSkidEvidenceError,
    build_report,
    deterministic_method1,
)
from .oracle import GridConfig, ZeroMassError, grid_posterior, simulate_case
from .priors import PriorSpec
from .sampler import (
    DegenerateVarianceError,
    InitializationError,
    McmcConfig,
    Summary,
    psrf,
    run_inference,
)

log = logging.getLogger("crashrecon")

EXIT_OK, EXIT_CASE_FAILED, EXIT_CONFIG = 0, 1, 2


@dataclass
class RunConfig:
    mode: str = "mcmc"
    cases: Optional[Path] = None
    out: Path = Path(".")
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    priors: PriorSpec = field(default_factory=PriorSpec)
    limit_kmh: Optional[float] = None
    grid: GridConfig = field(default_factory=GridConfig)
    n_sim: int = 8
    require_collision: bool = True

    def __post_init__(self):
        if self.mode not in ("mcmc", "grid", "simulate", "method1"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.cases is not None and not Path(self.cases).exists():
            raise FileNotFoundError(f"cases file {self.cases} does not exist")
        if self.limit_kmh is not None and not self.limit_kmh > 0:
            raise ValueError("--limit-kmh must be positive")


def _grid_report(case, spec, grid, limit_kmh) -> CounterfactualReport:
    res = grid_posterior(case, spec, grid, v_star_kmh=limit_kmh)
    nan = float("nan")
    try:
        m1 = deterministic_method1(case, spec, res.v_star_kmh)
    except (NoSkidEvidenceError, NoRealRootError):
        m1 = None
    return CounterfactualReport(
        case_id=case.id,
        p_speeding=res.p_speeding,
        pn=res.pn,
        v_kmh=Summary(res.mean_v * 3.6, nan, nan, nan, nan),
        vi_kmh=Summary(res.mean_vi * 3.6, nan, nan, nan, nan),
        method1_v_kmh=None if m1 is None else m1.v_kmh,
        method1_vistar_kmh=None if m1 is None else m1.vi_star_kmh,
        n_chains=0,
    )


def cmd_reconstruct(config: RunConfig) -> int:
    """Reconstruct every case and write ``report.csv`` into the output dir."""
    cases = load_cases(config.cases)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, failures = [], {}
    for case in cases:
        log.info("case %s", case.id)
        try:
            if config.mode == "grid":
                reports.append(_grid_report(case, config.priors, config.grid, config.limit_kmh))
            else:
                post = run_inference(case, config.priors, config.mcmc)
                reports.append(build_report(post, case, config.priors, config.limit_kmh))
        except (InitializationError, ZeroMassError) as exc:
            failures[case.id] = str(exc)
            log.warning("case %s failed: %s", case.id, exc)
    write_report(out / "report.csv", reports, failures, order=[c.id for c in cases])
    return EXIT_CASE_FAILED if failures else EXIT_OK


def cmd_simulate(config: RunConfig, seed: int = 0) -> int:
    """Write ``fixtures.json`` with simulated cases and their generating truth."""
    rng = np.random.default_rng(seed)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    cases, truths = [], {}
    limit = config.limit_kmh or 60.0
    for k in range(config.n_sim):
        truth, case = simulate_case(rng, config.priors, config.require_collision,
                                    case_id=f"sim{k:03d}", speed_limit_kmh=limit)
        cases.append(case)
        truths[case.id] = truth
    dump_cases(out / "fixtures.json", cases, truths)
    return EXIT_OK


def cmd_method1(config: RunConfig) -> int:
    cases = load_cases(config.cases)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    with open(out / "method1.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "method1_v_kmh", "method1_x_m", "method1_vistar_kmh", "status"])
        for case in cases:
            try:
                r = deterministic_method1(case, config.priors, config.limit_kmh)
            except (NoSkidEvidenceError, NoRealRootError) as exc:
                w.writerow([case.id, "", "", "", f"failed: {exc}"])
                status = EXIT_CASE_FAILED
                continue
            fmt = lambda v: "" if v is None else f"{v:.6f}"  # noqa: E731
            w.writerow([case.id, fmt(r.v_kmh), fmt(r.x_m), fmt(r.vi_star_kmh), "ok"])
    return status


def cmd_diagnose(config: RunConfig) -> int:
    """Per-case PSRF and acceptance rates for every sampled coordinate."""
    cases = load_cases(config.cases)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "quantity", "psrf", "acceptance_mean"])
        for case in cases:
            try:
                post = run_inference(case, config.priors, config.mcmc)
            except InitializationError as exc:
                w.writerow([case.id, "", "", f"failed: {exc}"])
                status = EXIT_CASE_FAILED
                continue
            # x may be sampled through the gap coordinate, and pinned
            # coordinates have draws but no acceptance rate
            names = list(post.draws) + [k for k in post.acceptance if k not in post.draws]
            for q in names:
                try:
                    r = f"{psrf(post, q):.6f}" if q in post.draws else ""
                except (DegenerateVarianceError, ValueError):
                    r = ""
                acc = post.acceptance.get(q)
                w.writerow([case.id, q, r, "" if acc is None else f"{acc.mean():.6f}"])
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crashrecon", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("reconstruct", "simulate", "method1", "diagnose"):
        s = sub.add_parser(verb)
        s.add_argument("--cases", type=Path, help="case file (JSON)")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--seed", type=int, default=0, help="master seed for all chains")
        s.add_argument("--chains", type=int, default=3, help="number of chains")
        s.add_argument("--iters", type=int, default=50000,
                       help="post-burn-in iterations per chain")
        s.add_argument("--burnin", type=int, default=5000, help="burn-in iterations")
        s.add_argument("--thin", type=int, default=10, help="keep every n-th draw")
        s.add_argument("--limit-kmh", type=float,
                       help="counterfactual speed; defaults to each case's limit")
        s.add_argument("--grid", action="store_true", help="use the grid oracle instead of MCMC")
        s.add_argument("--priors", type=Path, help="JSON file overriding prior fields")
        s.add_argument("-v", "--verbose", action="store_true")
        if verb == "simulate":
            s.add_argument("--n", type=int, default=8, help="number of cases to simulate")
            s.add_argument("--allow-no-collision", action="store_true",
                           help="keep draws where the car stops in time")
            s.add_argument("--pin-params", action="store_true",
                           help="fix throw/injury parameters at their means")
    return p


def config_from_args(args) -> RunConfig:
    spec = PriorSpec()
    if args.priors is not None:
        spec = PriorSpec.from_dict(json.loads(Path(args.priors).read_text()))
    if getattr(args, "pin_params", False):
        spec = spec.with_pinned_params()
    if args.verb == "simulate":
        mode = "simulate"
    elif args.verb == "method1":
        mode = "method1"
    else:
        mode = "grid" if args.grid else "mcmc"
    if args.verb != "simulate" and args.cases is None:
        raise ValueError("--cases is required")
    return RunConfig(
        mode=mode,
        cases=args.cases,
        out=args.out,
        mcmc=McmcConfig(n_chains=args.chains, burn_in=args.burnin,
                        iterations=args.iters, thin=args.thin, seed=args.seed),
        priors=spec,
        limit_kmh=args.limit_kmh,
        n_sim=getattr(args, "n", 8),
        require_collision=not getattr(args, "allow_no_collision", False),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        if args.verb == "simulate":
            return cmd_simulate(config, seed=args.seed)
        if args.verb == "method1":
            return cmd_method1(config)
        if args.verb == "diagnose":
            return cmd_diagnose(config)
        return cmd_reconstruct(config)
    except (CaseFileError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"crashrecon: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
