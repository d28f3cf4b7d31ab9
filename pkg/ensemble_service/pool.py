import logging
import os

from billiard import Pool

from ensemble_service import settings

logger = logging.getLogger(__name__)


def resolve_workers(workers=None):
    if workers is None:
        workers = int(os.environ.get("ENSEMBLE_WORKERS", settings.WORKERS))
    return max(int(workers), 1)


def map_tasks(task, payloads, workers=None):
    """Run ``task`` over ``payloads`` keeping submission order in the results."""
    workers = resolve_workers(workers)
    payloads = list(payloads)
    if workers == 1 or len(payloads) <= 1:
        return [task(payload) for payload in payloads]

    logger.info(f"Dispatching {len(payloads)} runs to {workers} workers")
    with Pool(
        processes=min(workers, len(payloads)),
        maxtasksperchild=settings.WORKER_MAX_TASKS_PER_CHILD,
    ) as pool:
        return pool.map(task, payloads, chunksize=1)
