'''
Mergeable mean/variance accumulators and the ordered chunk map for Monte Carlo reductions
'''

import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Callable, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class RunningMoments:
    '''
    Count, mean and sum of squared deviations of a real sample.

    Chunks are summarized with a stable two-pass formula and combined with the
    pairwise update of Chan, Golub and LeVeque, so the result depends only on the
    order in which chunks are merged, never on how they were computed.
    '''

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_samples(cls, values) -> "RunningMoments":
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return cls()
        mean = float(np.mean(values))
        return cls(count=int(values.size), mean=mean, m2=float(np.sum((values - mean) ** 2)))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return RunningMoments(count=count, mean=mean, m2=m2)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return math.nan
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.inf
        return math.sqrt(self.variance / self.count)


@dataclass(frozen=True)
class ComplexMoments:
    '''
    Componentwise RunningMoments of a complex sample.

    The joint standard error is the larger of the real and imaginary ones.
    '''

    real: RunningMoments = field(default_factory=RunningMoments)
    imag: RunningMoments = field(default_factory=RunningMoments)

    @classmethod
    def from_samples(cls, values) -> "ComplexMoments":
        values = np.asarray(values, dtype=complex).ravel()
        return cls(real=RunningMoments.from_samples(values.real), imag=RunningMoments.from_samples(values.imag))

    def merge(self, other: "ComplexMoments") -> "ComplexMoments":
        return ComplexMoments(real=self.real.merge(other.real), imag=self.imag.merge(other.imag))

    @property
    def count(self) -> int:
        return self.real.count

    @property
    def mean(self) -> complex:
        return complex(self.real.mean, self.imag.mean)

    @property
    def stderr(self) -> float:
        return max(self.real.stderr, self.imag.stderr)


def merge_all(chunks):
    """
    Merges accumulators left to right in the order given.
    """
    total = None
    for chunk in chunks:
        total = chunk if total is None else total.merge(chunk)
    return total


def chunk_ranges(n: int, chunk_size: int) -> List[Tuple[int, int]]:
    """
    Splits sample indices 0..n-1 into consecutive [start, stop) blocks of chunk_size.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be at least 1")
    return [(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]


def map_ordered(func: Callable, tasks: Sequence, workers: int = 1) -> list:
    """
    Applies func to every task, in a process pool when workers > 1, returning results in task order.

    func and the tasks must be picklable when a pool is used.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(func, tasks)
