import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Sequence

from pmc.orchestration.build_seed_flow import SeedRun, execute_run

logger = logging.getLogger(__name__)


class scheduler():
    """Runs seed directories one after the other or in a pool of worker processes.

    Workers share nothing; each reads its own ``run_conf.json``.
    """

    def __init__(self, out_dir_path: str, n_workers: int = 1) -> None:
        self.out_dir_path = out_dir_path
        self.n_workers = n_workers

    def schedule_run(self, runs: Sequence[SeedRun]) -> List[dict]:
        conf_paths = [run.conf_path for run in runs]
        if self.n_workers == 1 or len(conf_paths) == 1:
            return [execute_run(path) for path in conf_paths]
        logger.info("running %d seeds on %d workers", len(conf_paths), self.n_workers)
        with ProcessPoolExecutor(max_workers=self.n_workers) as pool:
            return list(pool.map(execute_run, conf_paths))
