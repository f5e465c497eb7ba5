"""
Experiment harness: run a simulator, audit its trace, certify against an oracle, write reports
"""
import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from config import settings
from models.instance import Instance
from models.oracle import OracleCertificate, OracleError
from models.report import AuditReport, RunReport
from services.auditor import TraceAuditor, audit_trace
from services.instance_io import parse_instance, render_instance
from services.kserver import KServerSimulator, RunState
from services.kserver_tw import TimeWindowSimulator
from services.oracle import opt_kserver, opt_tw_bruteforce, verify_root_constraints

logger = logging.getLogger(__name__)

ALGORITHMS = {
    "kserver": KServerSimulator,
    "tw": TimeWindowSimulator,
}


class RunOutcome:
    """Simulator state plus the audit and run reports derived from its trace"""

    def __init__(self, state: RunState, audit: AuditReport, report: RunReport):
        self.state = state
        self.audit = audit
        self.report = report


def instance_digest(instance: Instance) -> str:
    return hashlib.sha256(render_instance(instance).encode("utf-8")).hexdigest()


def default_algorithm(instance: Instance) -> str:
    return "tw" if instance.is_time_windows else "kserver"


def build_report(
    instance: Instance,
    audit: AuditReport,
    wall_time: Optional[float] = None,
) -> RunReport:
    """RunReport from an audit; oracle fields are filled by certify()"""
    return RunReport(
        schema_version=settings.REPORT_SCHEMA,
        instance_digest=instance_digest(instance),
        algorithm=audit.algorithm,
        requests=len(instance.requests),
        movement_cost=audit.movement_cost,
        piggyback_cost=audit.piggyback_cost,
        root_dual=audit.root_dual,
        beta_measured=audit.beta_measured,
        invariants={result.name: result.passed for result in audit.invariants},
        wall_time=wall_time,
    )


def run_instance(
    instance: Instance,
    algorithm: Optional[str] = None,
    audit_mode: Optional[str] = None,
    out_dir: Optional[Union[str, Path]] = None,
    timing: bool = False,
) -> RunOutcome:
    """
    Simulate, audit and optionally persist trace and reports

    The trace is written even when the run aborts, so a breach can be inspected.

    Args:
        instance: Validated instance
        algorithm: kserver or tw (default picked from the windows)
        audit_mode: inline, post or off
        out_dir: Directory for trace.jsonl, report.json and report.csv
        timing: Record wall time in the report

    Returns:
        RunOutcome

    Raises:
        RunError / LpError: On an invariant breach during the run
    """
    algorithm = algorithm or default_algorithm(instance)
    audit_mode = audit_mode or settings.DEFAULT_AUDIT_MODE
    if algorithm not in ALGORITHMS:
        raise ValueError(f"Unknown algorithm {algorithm!r}")

    auditor = TraceAuditor(instance, strict=True) if audit_mode == "inline" else None
    simulator = ALGORITHMS[algorithm](instance, auditor)
    started = time.perf_counter()
    try:
        state = simulator.run()
    finally:
        if out_dir is not None:
            simulator.trace.write(Path(out_dir) / settings.TRACE_FILENAME)
    elapsed = time.perf_counter() - started

    if auditor is not None:
        audit = auditor.report()
    else:
        audit = audit_trace(instance, simulator.trace.events, checks=audit_mode != "off")
    report = build_report(instance, audit, elapsed if timing else None)
    if out_dir is not None:
        write_reports(out_dir, report, audit)
    return RunOutcome(state, audit, report)


def certify(
    instance: Instance,
    report: RunReport,
    root_constraints,
    oracle: str = "flow",
) -> RunReport:
    """
    Attach the offline optimum, check every root constraint against the solution that
    starts by visiting the dummy leaves, and compute the certified ratio

    Oracle caps only omit the ratio; the note says why.
    """
    return _certify(instance, report, root_constraints, oracle)[0]


def _certify(
    instance: Instance,
    report: RunReport,
    root_constraints,
    oracle: str,
) -> Tuple[RunReport, Optional[OracleCertificate]]:
    """certify() plus the plain optimum's certificate when an oracle ran"""
    if oracle == "none":
        return report.model_copy(update={"note": "no oracle requested"}), None
    try:
        if oracle == "flow":
            if instance.is_time_windows:
                raise OracleError("the flow oracle needs unit windows")
            plain = opt_kserver(instance)
            started = opt_kserver(instance, with_start=True)
        elif oracle == "brute":
            plain = opt_tw_bruteforce(instance)
            started = opt_tw_bruteforce(instance, with_start=True)
        else:
            raise ValueError(f"Unknown oracle {oracle!r}")
    except OracleError as e:
        logger.warning(f"⚠️ Oracle skipped: {e}")
        return report.model_copy(update={"oracle": oracle, "note": f"ratio omitted: {e}"}), None

    check = verify_root_constraints(started.movements, root_constraints)
    invariants = dict(report.invariants)
    invariants["root validity"] = check.ok
    invariants["weak duality"] = _weak_duality(report, started)

    update: Dict[str, object] = {
        "oracle": oracle,
        "opt_cost": plain.opt_cost,
        "root_violations": len(check.violations),
        "invariants": invariants,
    }
    total = report.movement_cost + report.piggyback_cost
    if plain.opt_cost > settings.tolerance(0.0):
        update["certified_ratio"] = total / plain.opt_cost
    else:
        update["note"] = (
            f"opt is zero; movement {total!r} and root dual {report.root_dual!r} reported instead"
        )
    return report.model_copy(update=update), plain


def _weak_duality(report: RunReport, started: OracleCertificate) -> bool:
    """root dual ≤ β·OPT′, the scaled dual being feasible"""
    bound = report.beta_measured * started.opt_cost
    return report.root_dual <= bound + settings.tolerance(bound) or report.beta_measured == 0


def compare_instance(
    instance: Instance,
    algorithm: Optional[str] = None,
    oracle: str = "flow",
    audit_mode: Optional[str] = None,
    out_dir: Optional[Union[str, Path]] = None,
    timing: bool = False,
) -> RunReport:
    outcome = run_instance(instance, algorithm, audit_mode, None, timing)
    auditor = TraceAuditor(instance, checks=False)
    for index, event in enumerate(outcome.state.trace.events):
        auditor.feed(index, event)
    report, certificate = _certify(instance, outcome.report, auditor.root_constraints(), oracle)
    if out_dir is not None:
        outcome.state.trace.write(Path(out_dir) / settings.TRACE_FILENAME)
        write_reports(out_dir, report, outcome.audit, certificate)
    return report


def _compare_path(
    path: str,
    algorithm: Optional[str],
    oracle: str,
    audit_mode: Optional[str],
    out_dir: Optional[str],
) -> RunReport:
    with open(path, encoding="utf-8") as handle:
        instance = parse_instance(handle.read())
    return compare_instance(instance, algorithm, oracle, audit_mode, out_dir)


def instance_out_dir(out_dir: Union[str, Path], idx: int, path: str) -> str:
    """Per-instance subdirectory of a compare run, prefixed by position so stems may repeat"""
    return str(Path(out_dir) / f"{idx:03d}_{Path(path).stem}")


def compare_many(
    paths: Sequence[str],
    algorithm: Optional[str] = None,
    oracle: str = "flow",
    audit_mode: Optional[str] = None,
    jobs: int = 1,
    out_dir: Optional[Union[str, Path]] = None,
) -> List[RunReport]:
    """
    Compare several instance files, fanning out over a process pool; order follows paths

    With out_dir, each instance gets its own subdirectory holding trace, reports and the
    optimum's certificate.
    """
    targets = [instance_out_dir(out_dir, idx, path) if out_dir is not None else None for idx, path in enumerate(paths)]
    if jobs <= 1:
        return [
            _compare_path(path, algorithm, oracle, audit_mode, target)
            for path, target in zip(paths, targets)
        ]
    results: Dict[int, RunReport] = {}
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        fut_to_idx = {
            executor.submit(_compare_path, path, algorithm, oracle, audit_mode, targets[idx]): idx
            for idx, path in enumerate(paths)
        }
        for fut in as_completed(fut_to_idx):
            results[fut_to_idx[fut]] = fut.result()
    return [results[idx] for idx in range(len(paths))]


def request_table(audit: AuditReport) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in audit.requests], columns=list(_REQUEST_COLUMNS))


_REQUEST_COLUMNS = (
    "rid",
    "leaf",
    "b",
    "e",
    "timesteps",
    "movement_cost",
    "piggyback_cost",
    "dual_gained",
    "critical",
    "piggybacked",
    "peak_mass",
)


def write_reports(
    out_dir: Union[str, Path],
    report: RunReport,
    audit: AuditReport,
    certificate: Optional[OracleCertificate] = None,
) -> None:
    """report.json (RunReport), report.csv (one row per request, schema header first) and,
    after a comparison, opt_certificate.json (optimal cost and movement list)"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / settings.REPORT_JSON_FILENAME).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    csv_body = request_table(audit).to_csv(index=False, lineterminator="\n")
    (out / settings.REPORT_CSV_FILENAME).write_text(f"# {settings.REPORT_SCHEMA}\n{csv_body}", encoding="utf-8")
    if certificate is not None:
        (out / settings.CERTIFICATE_FILENAME).write_text(
            certificate.model_dump_json(indent=2) + "\n", encoding="utf-8"
        )
    logger.info(f"Reports written to {out}")
