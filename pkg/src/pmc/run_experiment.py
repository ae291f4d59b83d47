import json
import logging
import os
from typing import Tuple

from pmc.orchestration.build_seed_flow import build_seed_flows
from pmc.orchestration.generate_conf import ExperimentConfig
from pmc.orchestration.generate_scheduler import scheduler
from pmc.scripts import final_results
from pmc.utils import atomic_write_text

logger = logging.getLogger(__name__)


def run_experiment(experiment: ExperimentConfig) -> Tuple[str, str]:
    """Train every seed (and alpha) of ``experiment`` and aggregate the results.

    Returns the paths of the aggregated and per-seed result tables.
    """
    out_path = os.path.abspath(experiment.output_dir)
    os.makedirs(out_path, exist_ok=True)
    atomic_write_text(os.path.join(out_path, "run_conf.json"), json.dumps(experiment.to_dict(), indent=4))

    logger.info("Prepare: %d seed run(s) under %s", len(experiment.seeds) * len(experiment.alpha_values), out_path)
    runs = build_seed_flows(experiment)

    logger.info("Do: baseline %s", experiment.baseline)
    summaries = scheduler(out_dir_path=out_path, n_workers=experiment.workers).schedule_run(runs)
    for run, summary in zip(runs, summaries):
        logger.info("%s: fused target accuracy %s", run.run_dir, summary.get("tgt_fused", "-"))

    return final_results.get_final_results(in_root_dir=out_path, out_dir=out_path)
