"""Execution entry points shared by the CLI and the test suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .engine import Simulation, run_scenario
from .report import RunReport
from .scenario import ScenarioConfig, load_scenario

logger = logging.getLogger(__name__)

RUN_LOG = "run.log"
REPORT = "report"
RESOLVER_DUMP = "resolver.dump"


def execute(scenario: Union[str, Path, ScenarioConfig], seed: Optional[int] = None,
            out_dir: Optional[Union[str, Path]] = None) -> tuple[RunReport, Simulation]:
    """Run a scenario (file path or parsed config); optionally write the
    run artifacts (run.log, report, resolver.dump) into out_dir."""
    if isinstance(scenario, (str, Path)):
        config = load_scenario(scenario)
    else:
        config = scenario
    report, sim = run_scenario(config, seed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sim.net.log.write(out / RUN_LOG)
        (out / REPORT).write_text(report.to_json())
        (out / RESOLVER_DUMP).write_text(
            "".join(line + "\n" for line in sim.resolver.dump_lines()))
    return report, sim


@dataclass
class LogDivergence:
    line_no: int  # 1-based
    left: Optional[str]
    right: Optional[str]

    def render(self) -> str:
        left = self.left if self.left is not None else "<absent>"
        right = self.right if self.right is not None else "<absent>"
        return f"line {self.line_no}:\n- {left}\n+ {right}"


def replay_diff(path_a: Union[str, Path], path_b: Union[str, Path]) -> Optional[LogDivergence]:
    """First divergence between two event logs, or None when they are
    byte-identical."""
    lines_a = Path(path_a).read_text().splitlines()
    lines_b = Path(path_b).read_text().splitlines()
    for i in range(max(len(lines_a), len(lines_b))):
        left = lines_a[i] if i < len(lines_a) else None
        right = lines_b[i] if i < len(lines_b) else None
        if left != right:
            return LogDivergence(i + 1, left, right)
    return None
