# Import libraries
import logging
import os

from joblib import Parallel, delayed
from tqdm import tqdm

from fracpme.exceptions import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = "FRACPME_THREADS"


# ======================
# === WORKER FAN-OUT ===
# ======================
def resolve_n_jobs(n_jobs=None):
    """
    Number of joblib workers for a sweep.
    :param n_jobs: int, default=None
        Explicit request. If None, FRACPME_THREADS is read (default 1).
    :return: int
        A positive worker count.
    """
    if n_jobs is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            n_jobs = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n_jobs < 1:
        raise ConfigError(f"worker count must be >= 1, got {n_jobs}")
    return n_jobs


def run_jobs(fn, items, n_jobs=None, desc=None, progress=True):
    """
    Apply ``fn`` to every item, in order, possibly on several workers.
    :param fn: callable
        Picklable function of one argument.
    :param items: iterable
        Independent job descriptions.
    :param n_jobs: int, default=None
        See :func:`resolve_n_jobs`.
    :param desc: str, default=None
        Label of the progress bar.
    :param progress: bool, default=True
        Show a tqdm progress bar.
    :return: list
        Results in the order of ``items``.
    """
    items = list(items)
    n_jobs = resolve_n_jobs(n_jobs)
    logger.debug("running %d jobs on %d worker(s)", len(items), n_jobs)
    bar = tqdm(items, desc=desc, disable=not progress)
    if n_jobs == 1:
        return [fn(item) for item in bar]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(item) for item in bar)
