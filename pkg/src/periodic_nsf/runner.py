"""Single-run and sweep drivers.

Exit codes of a run: 0 success, 1 invalid configuration, 2 no admissible
Bogovskii exponent, 3 solver did not converge, 4 an audit invariant failed.
A sweep exits 0 when at least one run succeeded and 5 otherwise.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import persistence as io_
from .admissibility import AdmissibilityError, Case, a_window, estimate_chain_report
from .auditors import apriori_report, balance_audit, pressure_estimate_test
from .config import ConfigError, RunConfig, validate
from .constitutive import DVariant
from .solvers import Scheme, SolverError, fixed_point

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_ADMISSIBILITY, EXIT_NONCONVERGED, EXIT_AUDIT, EXIT_SWEEP_FAILED = range(6)
OUTPUT_ROOT_ENV = "PNSF_OUTPUT_ROOT"
DEFAULT_SWEEP_CAP = 64


@dataclass
class RunResult:
    exit_code: int
    run_dir: Path | None
    message: str = ""
    metrics: dict = field(default_factory=dict)
    run_id: str = ""


def case_of(cfg: RunConfig) -> Case:
    return Case.RADIATION if cfg.constitutive.d_variant is DVariant.TEMP_DEPENDENT else Case.NO_RADIATION


def resolve_run_dir(cfg: RunConfig, run_dir=None) -> Path:
    if run_dir is not None:
        return Path(run_dir)
    base = Path(cfg.outputs.directory)
    if not base.is_absolute():
        base = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / base
    return base / (cfg.outputs.run_id or cfg.hash()[:12])


def audit_state(state, scheme: Scheme, cfg: RunConfig):
    """Run every audit; returns (records, metrics, violations)."""
    rep = balance_audit(state, scheme)
    norms, chain = apriori_report(state, scheme, cfg.audit.a_bog,
                                  include_regularized_energy=cfg.audit.regularized_energy,
                                  theta_ref=cfg.audit.theta_ref)
    rep.norms, rep.chain = norms, chain
    records = rep.to_records()
    metrics = rep.metrics()
    violations = []
    M0 = scheme.basis.domain.M0
    if rep.mass_err > cfg.audit.mass_tol * M0:
        violations.append(f"mass error {rep.mass_err:.3e}")
    if rep.entropy_sign_min < -cfg.audit.entropy_tol * rep.entropy_sign_scale:
        violations.append(f"negative entropy production {rep.entropy_sign_min:.3e}")
    if rep.energy_identity_rel > cfg.audit.energy_tol:
        violations.append(f"energy identity relative residual {rep.energy_identity_rel:.3e}")
    if not rep.direction_ok:
        violations.append("dissipation exceeds boundary entropy source")
    if not all(math.isfinite(v) for v in norms.values()):
        violations.append("non-finite norm")
    if cfg.audit.pressure_test:
        try:
            led = pressure_estimate_test(state, scheme, cfg.audit.a_bog)
            records.append(led.to_record())
            metrics["pressure.identity_residual"] = led.identity_residual
            metrics["pressure.residual_bound"] = led.residual_bound
            metrics["pressure.lhs_density"] = led.lhs_density
            metrics["pressure.rhs_abs_sum"] = led.rhs_abs_sum
            allowed = max(1e-6 * led.scale, led.residual_bound)
            if abs(led.identity_residual) > allowed * (1 + 1e-12) + 1e-300:
                violations.append(f"pressure identity residual {led.identity_residual:.3e}")
        except AdmissibilityError as exc:
            records.append({"record": "pressure_estimate", "skipped": str(exc)})
    if not state.converged:
        records.append({"record": "status", "flag": "UNRELIABLE"})
    return records, metrics, violations


def _write_reports(run_dir: Path, cfg: RunConfig, run_id: str, name: str, records, metrics):
    if "jsonl" in cfg.outputs.formats:
        io_.write_jsonl(run_dir / f"{name}.jsonl", records)
    if "csv" in cfg.outputs.formats:
        io_.write_metrics_csv(run_dir / f"{name}.csv",
                              [(run_id, k, v) for k, v in sorted(metrics.items())])


def _manifest(run_dir: Path, cfg: RunConfig, run_id: str, exit_code: int, message: str,
              wall: float, files):
    man = {"run_id": run_id, "config_hash": cfg.hash(), "exit_code": exit_code,
           "message": message, "wall_time_s": wall, "versions": io_.versions(),
           "files": {f: io_.file_digest(run_dir / f) for f in sorted(files)
                     if (run_dir / f).exists()}}
    (run_dir / "manifest.json").write_text(io_.dumps(man) + "\n")


def run_single(cfg: RunConfig, run_dir=None) -> RunResult:
    """Admissibility check, solve and audits, with every artifact written to ``run_dir``."""
    t0 = time.perf_counter()
    try:
        validate(cfg)
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, None, f"invalid configuration: {exc}")
    run_id = cfg.outputs.run_id or cfg.hash()[:12]
    rd = resolve_run_dir(cfg, run_dir)
    rd.mkdir(parents=True, exist_ok=True)
    (rd / "config.txt").write_text(cfg.to_text())
    limiter = threadpool_limits(limits=1) if cfg.outputs.single_thread else nullcontext()
    files = ["config.txt"]
    with limiter:
        code, msg, metrics = _run_body(cfg, rd, run_id, files)
    _manifest(rd, cfg, run_id, code, msg, time.perf_counter() - t0, files)
    logger.info("run %s finished with exit code %d %s", run_id, code, msg)
    return RunResult(code, rd, msg, metrics, run_id)


def _run_body(cfg: RunConfig, rd: Path, run_id: str, files: list):
    cp = cfg.constitutive
    case = case_of(cfg)
    win = a_window(cp.gamma, case)
    chain = estimate_chain_report(cp.gamma, cfg.audit.a_bog, case) if not win.empty else \
        estimate_chain_report(cp.gamma, None, case)
    io_.write_jsonl(rd / "chain.jsonl", [{"record": "window", **win.to_record()}] + chain.to_records())
    files.append("chain.jsonl")
    if win.empty:
        return EXIT_ADMISSIBILITY, f"empty exponent window for gamma={cp.gamma} ({case.value})", {}

    try:
        scheme = Scheme.build(cfg.domain.build(), cp, cfg.approx)
        state = fixed_point(scheme, cfg.controls)
    except SolverError as exc:
        return EXIT_NONCONVERGED, f"solver failure: {exc}", {}
    io_.write_checkpoint(rd / "checkpoint", state)
    io_.write_jsonl(rd / "trace.jsonl", state.trace)
    files += [f"checkpoint/{n}.pnf" for n in io_.FIELD_NAMES] + ["checkpoint/state.json", "trace.jsonl"]

    records, metrics, violations = audit_state(state, scheme, cfg)
    _write_reports(rd, cfg, run_id, "report", records, metrics)
    files += ["report.jsonl", "report.csv"]
    if not state.converged:
        return EXIT_NONCONVERGED, f"no convergence after {len(state.trace)} iterations", metrics
    if violations:
        return EXIT_AUDIT, "; ".join(violations), metrics
    return EXIT_OK, "ok", metrics


def reaudit(run_dir, cfg: RunConfig | None = None) -> RunResult:
    """Audit a stored checkpoint again, writing ``audit.jsonl`` / ``audit.csv``."""
    from .config import load_config
    rd = Path(run_dir)
    cfg = cfg or load_config(rd / "config.txt")
    run_id = cfg.outputs.run_id or cfg.hash()[:12]
    scheme = Scheme.build(cfg.domain.build(), cfg.constitutive, cfg.approx)
    state = io_.read_checkpoint(rd / "checkpoint", scheme.basis)
    limiter = threadpool_limits(limits=1) if cfg.outputs.single_thread else nullcontext()
    with limiter:
        records, metrics, violations = audit_state(state, scheme, cfg)
    _write_reports(rd, cfg, run_id, "audit", records, metrics)
    if violations:
        return RunResult(EXIT_AUDIT, rd, "; ".join(violations), metrics, run_id)
    return RunResult(EXIT_OK, rd, "ok", metrics, run_id)


# ----------------------------------------------------------------------------
# sweeps

def expand_sweep(cfg: RunConfig, sweep: list, cap: int = DEFAULT_SWEEP_CAP):
    """Cartesian product of ``[(key, values), ...]`` in lexicographic order."""
    keys = [k for k, _ in sweep]
    value_lists = [list(v) for _, v in sweep]
    size = math.prod(len(v) for v in value_lists) if value_lists else 1
    if size > cap:
        raise ConfigError(f"sweep has {size} runs, above the cap of {cap}")
    out = []
    for combo in itertools.product(*value_lists):
        overrides = {k: str(v) for k, v in zip(keys, combo)}
        out.append(overrides)
    return out


def _sweep_worker(args):
    index, base_text, overrides, run_dir = args
    from .config import from_flat, parse_text
    try:
        cfg = from_flat(parse_text(base_text)).with_overrides(overrides)
    except ConfigError as exc:
        return index, EXIT_CONFIG, str(run_dir), f"invalid configuration: {exc}", {}, ""
    res = run_single(cfg, run_dir)
    return index, res.exit_code, str(res.run_dir), res.message, res.metrics, cfg.hash()


def run_sweep(cfg: RunConfig, sweep: list, sweep_dir=None, cap: int = DEFAULT_SWEEP_CAP,
              workers: int = 1) -> tuple[int, Path]:
    """Execute every run of the sweep; returns (exit code, sweep directory)."""
    combos = expand_sweep(cfg, sweep, cap)
    sd = Path(sweep_dir) if sweep_dir is not None else resolve_run_dir(cfg).with_name(
        "sweep_" + cfg.hash()[:12])
    sd.mkdir(parents=True, exist_ok=True)
    base_text = cfg.to_text()
    jobs = [(i, base_text, ov, sd / f"run_{i:04d}") for i, ov in enumerate(combos)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    rows, runs = [], []
    for (index, code, rdir, msg, metrics, chash), ov in zip(results, combos):
        run_id = f"run_{index:04d}"
        runs.append({"run_id": run_id, "overrides": ov, "exit_code": code, "message": msg,
                     "directory": os.path.relpath(rdir, sd), "config_hash": chash})
        rows.append((run_id, "exit_code", float(code)))
        rows += [(run_id, k, v) for k, v in sorted(metrics.items())]
    io_.write_metrics_csv(sd / "sweep.csv", rows)
    io_.write_jsonl(sd / "sweep_manifest.jsonl", runs)
    ok = any(r["exit_code"] == EXIT_OK for r in runs)
    return (EXIT_OK if ok else EXIT_SWEEP_FAILED), sd
