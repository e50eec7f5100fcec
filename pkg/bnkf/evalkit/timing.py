import logging
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .benchmark import FoldModels, BenchmarkConfig, SequenceData, run_method


__all__ = (
    "TimingResult",
    "time_method",
    "time_methods",
)


LOGGER = logging.getLogger(__name__)


@dataclass
class TimingResult:
    """
    Wall time of repeated full-trajectory inference, warm-up excluded.

    Attributes
    ----------
    method : str
    repeats : List[float]
        seconds per repetition
    """
    method: str
    repeats: List[float]

    @property
    def median(self) -> float:
        return float(np.median(self.repeats))

    @property
    def minimum(self) -> float:
        return float(np.min(self.repeats))

    @property
    def maximum(self) -> float:
        return float(np.max(self.repeats))


def time_method(run: Callable[[], object], repeats: int = 5, warmup: int = 1, method: str = "") -> TimingResult:
    '''
    Times a zero-argument callable.

    ``warmup`` runs are executed and discarded first; then ``repeats``
    (at least 5) runs are timed one after another on the calling thread.
    '''
    repeats = max(5, int(repeats))
    for _ in range(warmup):
        run()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        run()
        samples.append(time.perf_counter() - start)
    result = TimingResult(method, samples)
    LOGGER.info("Timed <%s>: median %.4gs (min %.4gs, max %.4gs)",
                method, result.median, result.minimum, result.maximum)
    return result


def time_methods(methods, seq: SequenceData, models: FoldModels, config: BenchmarkConfig,
                 repeats: int = 5, warmup: int = 1) -> List[TimingResult]:
    """Times every method on the same sequence arrays."""
    return [
        time_method(lambda m=method: run_method(m, seq, models, config), repeats, warmup, method)
        for method in methods
    ]
