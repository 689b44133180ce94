"""
Partitioned dataset module for the brainmatch pipeline.

An immutable, ordered, partitioned in-memory collection with data-parallel
combinators: the single-node analogue of a resilient distributed dataset.
Combinators evaluate eagerly; partitions are dispatched to a fixed pool of
worker lanes and results are reassembled by partition index, so scheduling
never changes what collect() returns.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Generic, Iterable, List, Optional, Sequence, Tuple, TypeVar

# Configure logging
logger = logging.getLogger(__name__)

T = TypeVar("T")
U = TypeVar("U")

Partition = Tuple[Any, ...]


class PardataError(Exception):
    """Base class for partitioned dataset failures."""

    pass


class InvalidPartitionCount(PardataError):
    """Raised when a partition count below 1 is requested."""

    pass


class LengthMismatch(PardataError):
    """Raised when zipping datasets of different lengths."""

    pass


@dataclass(frozen=True)
class ExecutionConfig:
    """
    Number of parallel evaluation lanes.

    workers == 1 evaluates inline on the calling thread.
    """

    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got: {self.workers}")


def split_blocks(items: Sequence[Any], partition_count: int) -> Tuple[Partition, ...]:
    """
    Splits items into contiguous blocks whose sizes differ by at most one.

    Earlier blocks take the remainder, so ([1, 2, 3], 2) gives ((1, 2), (3,)).
    """
    if partition_count < 1:
        raise InvalidPartitionCount(f"partition_count must be >= 1, got: {partition_count}")
    base, extra = divmod(len(items), partition_count)
    blocks = []
    start = 0
    for index in range(partition_count):
        size = base + (1 if index < extra else 0)
        blocks.append(tuple(items[start:start + size]))
        start += size
    return tuple(blocks)


class _ElementFailure:
    __slots__ = ("index", "error")

    def __init__(self, index: int, error: BaseException):
        self.index = index
        self.error = error


class PartitionedDataset(Generic[T]):
    """
    Immutable ordered collection split into contiguous partitions.

    Combinators return new datasets and never touch the source. Element
    functions must be pure: they may run concurrently on different lanes.
    """

    __slots__ = ("_partitions", "_config")

    def __init__(self, partitions: Iterable[Partition], config: Optional[ExecutionConfig] = None):
        self._partitions: Tuple[Partition, ...] = tuple(tuple(p) for p in partitions)
        if not self._partitions:
            raise InvalidPartitionCount("a dataset needs at least one partition")
        self._config = config or ExecutionConfig()

    @classmethod
    def from_items(
        cls,
        items: Sequence[T],
        partition_count: int,
        config: Optional[ExecutionConfig] = None,
    ) -> "PartitionedDataset[T]":
        """
        Builds a dataset with contiguous block partitioning.

        Excess partitions (partition_count > len(items)) are empty.

        Raises:
            InvalidPartitionCount: If partition_count < 1
        """
        return cls(split_blocks(list(items), partition_count), config)

    @property
    def partitions(self) -> Tuple[Partition, ...]:
        return self._partitions

    @property
    def partition_count(self) -> int:
        return len(self._partitions)

    @property
    def element_count(self) -> int:
        return sum(len(p) for p in self._partitions)

    @property
    def config(self) -> ExecutionConfig:
        return self._config

    def __len__(self) -> int:
        return self.element_count

    def __eq__(self, other: object) -> bool:
        # Lane count is an evaluation detail, not part of the value
        if not isinstance(other, PartitionedDataset):
            return NotImplemented
        return self._partitions == other._partitions

    __hash__ = None

    def __repr__(self) -> str:
        sizes = [len(p) for p in self._partitions]
        return f"PartitionedDataset(elements={self.element_count}, partitions={sizes})"

    def _offsets(self) -> List[int]:
        offsets, start = [], 0
        for p in self._partitions:
            offsets.append(start)
            start += len(p)
        return offsets

    def _run(self, task: Callable[[int, Partition], Any]) -> List[Any]:
        """
        Evaluates task(partition_index, partition) for every partition.

        Results come back in partition order. An element failure is re-raised
        for the smallest logical index, whatever order the lanes finished in.
        """
        indexed = list(enumerate(self._partitions))
        workers = min(self._config.workers, len(indexed))
        if workers <= 1:
            results = [task(i, p) for i, p in indexed]
        else:
            with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="pardata") as pool:
                results = list(pool.map(lambda args: task(*args), indexed))

        failures = [r for r in results if isinstance(r, _ElementFailure)]
        if failures:
            first = min(failures, key=lambda f: f.index)
            first.error.add_note(f"raised while evaluating dataset element {first.index}")
            raise first.error
        return results

    def _apply(self, fn: Callable[[Any], Any]) -> List[Any]:
        offsets = self._offsets()

        def task(index: int, partition: Partition):
            out = []
            for position, element in enumerate(partition):
                try:
                    out.append(fn(element))
                except Exception as e:
                    # Later elements of this partition cannot hold a smaller index
                    return _ElementFailure(offsets[index] + position, e)
            return out

        return self._run(task)

    def _derive(self, partitions: Iterable[Partition]) -> "PartitionedDataset":
        return PartitionedDataset(partitions, self._config)

    def map(self, f: Callable[[T], U]) -> "PartitionedDataset[U]":
        """Applies f to every element; partitioning is preserved."""
        logger.debug(f"map over {self!r}")
        return self._derive(self._apply(f))

    def flat_map(self, f: Callable[[T], Iterable[U]]) -> "PartitionedDataset[U]":
        """
        Concatenates f(e) over elements in order.

        The result is repartitioned to this dataset's partition count.
        """
        logger.debug(f"flat_map over {self!r}")
        segments = self._apply(lambda e: tuple(f(e)))
        flat = [x for part in segments for seg in part for x in seg]
        return self._derive(split_blocks(flat, self.partition_count))

    def zip(self, other: "PartitionedDataset[U]") -> "PartitionedDataset[Tuple[T, U]]":
        """
        Pairs element i of this dataset with element i of other.

        Partitioning follows this dataset.

        Raises:
            LengthMismatch: If the element counts differ
        """
        if self.element_count != other.element_count:
            raise LengthMismatch(
                f"Cannot zip datasets of {self.element_count} and {other.element_count} elements"
            )
        right = other.collect()
        pairs = []
        for offset, partition in zip(self._offsets(), self._partitions):
            pairs.append(tuple(zip(partition, right[offset:offset + len(partition)])))
        return self._derive(pairs)

    def reduce(self, op: Callable[[T, T], T], identity: T) -> T:
        """
        Folds the dataset with an associative, commutative op.

        Each partition is folded left to right from identity, then partial
        results are folded in partition order. An empty dataset gives identity.
        """
        def task(index: int, partition: Partition):
            acc = identity
            for element in partition:
                acc = op(acc, element)
            return acc

        partials = self._run(task)
        result = identity
        for partial in partials:
            result = op(result, partial)
        return result

    def collect(self) -> List[T]:
        """Returns the elements in logical order."""
        return [x for p in self._partitions for x in p]

    def repartition(self, k: int) -> "PartitionedDataset[T]":
        """
        Same elements in k contiguous partitions.

        Raises:
            InvalidPartitionCount: If k < 1
        """
        return self._derive(split_blocks(self.collect(), k))

    def with_config(self, config: ExecutionConfig) -> "PartitionedDataset[T]":
        """Same partitions, evaluated with a different lane count."""
        return PartitionedDataset(self._partitions, config)


def from_items(
    items: Sequence[T], partition_count: int, config: Optional[ExecutionConfig] = None
) -> PartitionedDataset[T]:
    """Module-level alias of PartitionedDataset.from_items."""
    return PartitionedDataset.from_items(items, partition_count, config)
