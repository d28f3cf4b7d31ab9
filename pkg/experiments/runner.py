import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import yaml

from ensemble_service.pool import map_tasks
from experiments.recipes import schedule_order
from experiments.serializers import ExperimentConfigSerializer
from experiments.tasks import execute_exact, execute_run, run_label

logger = logging.getLogger(__name__)


@dataclass
class ExperimentReport:
    output_dir: Path
    runs: List[dict] = field(default_factory=list)

    @property
    def failed(self) -> List[dict]:
        return [summary for summary in self.runs if summary["status"] != "ok"]

    @property
    def ok(self) -> bool:
        return not self.failed


def plan_runs(config: dict, output_dir: Path) -> List[dict]:
    """One payload per (N, state, schedule) in deterministic order."""
    filter_attrs = config["filter"]
    schedules = filter_attrs["schedules"] or [None]
    payloads = []
    for num_sites in config["sizes"]:
        for state in config["initial_states"]:
            for schedule in schedules:
                order = schedule_order(schedule, num_sites) if schedule else filter_attrs["M"]
                payloads.append(
                    {
                        "config": config,
                        "N": num_sites,
                        "state": state,
                        "M": order,
                        "schedule": schedule,
                        "run_dir": str(output_dir / run_label(num_sites, state, order, schedule)),
                    }
                )
    return payloads


def run(config: dict, workers=None) -> ExperimentReport:
    serializer = ExperimentConfigSerializer(data=config)
    serializer.is_valid(raise_exception=True)
    config = serializer.validated_data

    output_dir = Path(config["output_dir"]) / config["name"]
    output_dir.mkdir(parents=True, exist_ok=True)
    payloads = plan_runs(config, output_dir)
    task = execute_exact if config["mode"] == "exact" else execute_run
    logger.info(f"Experiment {config['name']}: {len(payloads)} runs into {output_dir}")

    summaries = map_tasks(task, payloads, workers=workers if workers is not None else config["workers"])
    report = ExperimentReport(output_dir=output_dir, runs=summaries)

    with open(output_dir / "manifest.yaml", "w") as stream:
        yaml.safe_dump(
            {"config": config, "runs": summaries, "failed": len(report.failed)},
            stream,
            sort_keys=True,
        )
    logger.info(f"Experiment {config['name']} finished: {len(summaries)} runs, {len(report.failed)} failed")
    return report
