"""Sequential suite runner: report.json, CSV tables, JSON documents and SVG plots."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

from . import plotting
from .config import ExperimentConfig
from .errors import BudgetError
from .report import to_json, write_csv, write_json
from .suites import SUITES, Context, SuiteResult

log = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    report: dict
    results: list
    exit_code: int
    out_dir: Path


def _emit(res: SuiteResult, out: Path) -> list[str]:
    files = []
    for name, (header, rows) in res.tables.items():
        write_csv(out / f"{name}.csv", header, rows)
        files.append(f"{name}.csv")
    for name, doc in res.documents.items():
        write_json(out / f"{name}.json", doc)
        files.append(f"{name}.json")
    for kind, src in res.plots:
        path = out / (f"{src}.csv" if src in res.tables else f"{src}.json")
        svg = f"{src}_{kind}.svg"
        plotting.plot(path, kind, out / svg)
        files.append(svg)
    return files


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunOutcome:
    """Run the configured suites in dependency order.

    report.json holds no timings, so two runs with the same config are
    byte-identical.  Wall-clock times go to timings.json.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg)
    start = time.perf_counter()
    entries, results, timings, artifacts = [], [], {}, []
    budget_hit = None
    for name in cfg.ordered_suites():
        t0 = time.perf_counter()
        log.info("suite %s", name)
        res = SUITES[name](ctx)
        files = _emit(res, out)
        timings[name] = time.perf_counter() - t0
        results.append(res)
        artifacts += files
        entries.append({"name": res.name, "anchor": res.anchor, "passed": bool(res.passed),
                        "failing_invariant": res.failing, "stats": res.stats, "artifacts": files})
        log.info("suite %s %s (%.1f s)", name, "PASS" if res.passed else "FAIL", timings[name])
        if cfg.time_budget_s is not None and time.perf_counter() - start > cfg.time_budget_s:
            budget_hit = name
            break
    passed = all(e["passed"] for e in entries)
    report = {
        "schema_version": cfg.schema_version,
        "config": cfg.model_dump(mode="json"),
        "suites": entries,
        "passed": passed,
        "budget_exceeded_after": budget_hit,
        "artifacts": sorted(artifacts + ["report.json"]),
    }
    (out / "report.json").write_text(to_json(report), encoding="utf-8")
    write_json(out / "timings.json", {"suites": timings,
                                      "total": time.perf_counter() - start})
    code = 3 if budget_hit else (0 if passed else 1)
    return RunOutcome(report, results, code, out)


def check_budget(outcome: RunOutcome) -> None:
    if outcome.exit_code == 3:
        raise BudgetError(f"time budget exceeded after suite {outcome.report['budget_exceeded_after']}")
