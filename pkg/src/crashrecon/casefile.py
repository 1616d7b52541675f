"""JSON case files and CSV reports.

Case file layout::

    {
      "cases": [
        {"id": "c1", "speed_limit_kmh": 60,
         "measurements": {"s1_m": 23.44, "throw_m": 14.2, "severity": "serious"}}
      ],
      "truth": {"c1": {"x": 41.0, "v": 20.1, ...}}     # optional sidecar
    }

Unknown keys are rejected so that typos surface as errors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Optional

from .counterfactual import CounterfactualReport, accident_reduction
from .model import Case, SEVERITIES
from .oracle import SyntheticTruth

MEASUREMENT_KEYS = ("s1_m", "s2_m", "throw_m", "severity")
CASE_KEYS = {"id", "speed_limit_kmh", "measurements"}
TOP_KEYS = {"cases", "truth"}

REPORT_COLUMNS = (
    "case_id", "n_chains", "psrf_max", "p_speeding", "pn",
    "v_mean_kmh", "v_q025_kmh", "v_q975_kmh", "vi_mean_kmh",
    "method1_v_kmh", "method1_vistar_kmh", "status",
)


class CaseFileError(ValueError):
    """Malformed case file: bad JSON or a case violating its invariants."""


def _case_from_dict(d, where: str) -> Case:
    if not isinstance(d, dict):
        raise CaseFileError(f"{where}: expected an object")
    if "id" not in d:
        raise CaseFileError(f"{where}: missing 'id'")
    cid = str(d["id"])
    unknown = set(d) - CASE_KEYS
    if unknown:
        raise CaseFileError(f"case {cid!r} ({where}): unknown fields {sorted(unknown)}")
    meas = d.get("measurements", {})
    if not isinstance(meas, dict):
        raise CaseFileError(f"case {cid!r}: 'measurements' must be an object")
    unknown = set(meas) - set(MEASUREMENT_KEYS)
    if unknown:
        raise CaseFileError(f"case {cid!r}: unknown measurements {sorted(unknown)}")
    if not any(meas.get(k) is not None for k in MEASUREMENT_KEYS):
        raise CaseFileError(f"case {cid!r}: at least one measurement is required")
    sev = meas.get("severity")
    if sev is not None and sev not in SEVERITIES:
        raise CaseFileError(f"case {cid!r}: severity must be one of {SEVERITIES}, got {sev!r}")
    try:
        kw = {k: (float(meas[k]) if k != "severity" else meas[k])
              for k in MEASUREMENT_KEYS if meas.get(k) is not None}
        return Case(id=cid, speed_limit_kmh=float(d.get("speed_limit_kmh", 60.0)), **kw)
    except (TypeError, ValueError) as exc:
        raise CaseFileError(f"case {cid!r}: {exc}") from None


def _read_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_cases(doc) -> list[Case]:
    if not isinstance(doc, dict) or "cases" not in doc:
        raise CaseFileError("case file must be an object with a 'cases' list")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise CaseFileError(f"unknown top-level fields {sorted(unknown)}")
    if not isinstance(doc["cases"], list):
        raise CaseFileError("'cases' must be a list")
    cases = [_case_from_dict(c, f"cases[{i}]") for i, c in enumerate(doc["cases"])]
    ids = [c.id for c in cases]
    if len(set(ids)) != len(ids):
        raise CaseFileError("case ids must be unique")
    return cases


def load_cases(path) -> list[Case]:
    return parse_cases(_read_json(path))


def load_truths(path) -> dict[str, SyntheticTruth]:
    doc = _read_json(path)
    return {cid: SyntheticTruth(**t) for cid, t in doc.get("truth", {}).items()}


def case_to_dict(case: Case) -> dict:
    meas = {k: getattr(case, k) for k in MEASUREMENT_KEYS if getattr(case, k) is not None}
    return {"id": case.id, "speed_limit_kmh": case.speed_limit_kmh, "measurements": meas}


def dump_cases(path, cases: Iterable[Case],
               truths: Optional[dict[str, SyntheticTruth]] = None) -> None:
    doc = {"cases": [case_to_dict(c) for c in cases]}
    if truths:
        doc["truth"] = {cid: asdict(t) for cid, t in truths.items()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _fmt(val) -> str:
    if val is None:
        return ""
    if isinstance(val, int):
        return str(val)
    if isinstance(val, float) and math.isnan(val):
        return ""
    return f"{val:.6f}"


def report_row(r: CounterfactualReport, status: Optional[str] = None) -> list[str]:
    if status is None:
        status = "ok" if r.converged else "nonconverged"
    return [
        r.case_id, _fmt(r.n_chains), _fmt(r.psrf_max), _fmt(r.p_speeding), _fmt(r.pn),
        _fmt(r.v_kmh.mean), _fmt(r.v_kmh.q025), _fmt(r.v_kmh.q975), _fmt(r.vi_kmh.mean),
        _fmt(r.method1_v_kmh), _fmt(r.method1_vistar_kmh), status,
    ]


def write_report(path, rows: list, failures: Optional[dict[str, str]] = None,
                 order: Optional[list[str]] = None) -> None:
    """Write per-case rows in ``order`` then a TOTAL line with the PN sum.

    ``rows`` holds CounterfactualReport objects; ``failures`` maps case id
    to an error message and is reported as a failed row.
    """
    failures = failures or {}
    by_id = {r.case_id: r for r in rows}
    order = order or [r.case_id for r in rows] + list(failures)
    est = accident_reduction(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for cid in order:
            if cid in by_id:
                w.writerow(report_row(by_id[cid]))
            else:
                w.writerow([cid] + [""] * (len(REPORT_COLUMNS) - 2)
                           + [f"failed: {failures.get(cid, 'unknown error')}"])
        w.writerow(["TOTAL", _fmt(est.n_cases), "", "", _fmt(est.total)]
                   + [""] * (len(REPORT_COLUMNS) - 5))


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))



def bundled_fixtures_path() -> Path:
    """Synthetic cases (parameters pinned at prior means) shipped with the package."""
    return Path(__file__).parent / "data" / "fixtures.json"


def load_bundled_fixtures() -> tuple[list[Case], dict[str, SyntheticTruth]]:
    path = bundled_fixtures_path()
    return load_cases(path), load_truths(path)
