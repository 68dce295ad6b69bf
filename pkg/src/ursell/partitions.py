"""Set partitions, bipartitions and the integer coefficients built on them.

Partitions of ``{0, ..., n-1}`` are streamed in lexicographic order of their
restricted-growth strings: element ``i`` carries the label of its block and
each label is at most one more than the largest label to its left.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass
from functools import lru_cache

from .config import PARTITION_LIMIT, ResourceLimitError

MOEBIUS_LIMIT = 20
STIRLING_LIMIT = 30


@dataclass(frozen=True)
class SetPartition:
    """Disjoint nonempty blocks covering ``{0, ..., n-1}``, in canonical order."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        previous_min = -1
        for block in self.blocks:
            if not block:
                raise ValueError("empty block in set partition")
            if list(block) != sorted(set(block)):
                raise ValueError(f"block {block} is not strictly ascending")
            if block[0] <= previous_min:
                raise ValueError("blocks must be sorted by their minimum element")
            previous_min = block[0]
            if seen.intersection(block):
                raise ValueError("blocks overlap")
            seen.update(block)
        if seen != set(range(len(seen))):
            raise ValueError("blocks do not cover {0, ..., n-1}")

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << i for i in block) for block in self.blocks)

    @classmethod
    def from_rgs(cls, labels) -> SetPartition:
        groups: dict[int, list[int]] = {}
        for i, label in enumerate(labels):
            groups.setdefault(label, []).append(i)
        return cls(tuple(tuple(groups[k]) for k in sorted(groups)))


@dataclass(frozen=True)
class Bipartition:
    """Unordered split into two nonempty parts; ``first`` always holds 0."""

    first: tuple[int, ...]
    second: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.first or not self.second:
            raise ValueError("both sides of a bipartition must be nonempty")
        if set(self.first) & set(self.second):
            raise ValueError("bipartition sides overlap")
        if 0 not in self.first:
            raise ValueError("canonical bipartition keeps index 0 in the first part")
        if set(self.first) | set(self.second) != set(range(len(self.first) + len(self.second))):
            raise ValueError("bipartition does not cover {0, ..., n-1}")


def _check_n(n: int, limit: int) -> None:
    if isinstance(n, bool) or not isinstance(n, int):
        raise TypeError(f"n must be an int, got {type(n).__name__}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > limit:
        raise ResourceLimitError(f"n={n} exceeds the partition limit {limit}")


def iter_block_masks(n: int, limit: int = PARTITION_LIMIT) -> Iterator[list[int]]:
    """Yield each partition of ``{0..n-1}`` as a list of block bitmasks.

    The same list object is mutated between yields; copy it to keep it.
    Order is lexicographic in the restricted-growth string.
    """
    _check_n(n, limit)
    labels = [0] * n
    # bound[j] = 1 + max(labels[:j]); labels[j] may range over 0..bound[j]
    bound = [1] * n
    bound[0] = 0
    masks = [(1 << n) - 1]
    last = n - 1
    top = 1 << last
    while True:
        yield masks
        if last > 0 and labels[last] < bound[last]:
            lab = labels[last]
            masks[lab] ^= top
            lab += 1
            labels[last] = lab
            if lab == len(masks):
                masks.append(top)
            else:
                masks[lab] |= top
            continue
        j = last - 1
        while j > 0 and labels[j] == bound[j]:
            j -= 1
        if j <= 0:
            return
        labels[j] += 1
        for k in range(j + 1, n):
            labels[k] = 0
            bound[k] = max(bound[k - 1], labels[k - 1] + 1)
        masks = [0] * (max(labels) + 1)
        for i, lab in enumerate(labels):
            masks[lab] |= 1 << i


def enumerate_partitions(n: int, limit: int = PARTITION_LIMIT) -> Iterator[SetPartition]:
    """Stream every set partition of ``{0, ..., n-1}`` exactly once.

    >>> [p.blocks for p in enumerate_partitions(2)]
    [((0, 1),), ((0,), (1,))]
    """
    for masks in iter_block_masks(n, limit):
        yield SetPartition(tuple(_mask_to_tuple(m) for m in masks))


def _mask_to_tuple(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def enumerate_bipartitions(n: int) -> Iterator[Bipartition]:
    """Yield the ``2**(n-1) - 1`` unordered proper bipartitions of ``{0..n-1}``.

    Bipartition ``k`` (1-based) puts element ``i >= 1`` in the second part when
    bit ``i-1`` of ``k`` is set, so the order is deterministic.
    """
    if isinstance(n, bool) or not isinstance(n, int):
        raise TypeError(f"n must be an int, got {type(n).__name__}")
    if n < 2:
        raise ValueError(f"bipartitions need n >= 2, got {n}")
    for code in range(1, 1 << (n - 1)):
        second = tuple(i for i in range(1, n) if code >> (i - 1) & 1)
        first = tuple(i for i in range(n) if i == 0 or not code >> (i - 1) & 1)
        yield Bipartition(first, second)


def moebius_g(k: int) -> int:
    """Return ``(-1)**(k-1) * (k-1)!``, the weight of a ``k``-block partition."""
    if k < 1:
        raise ValueError(f"moebius_g needs k >= 1, got {k}")
    if k > MOEBIUS_LIMIT:
        raise ResourceLimitError(f"moebius_g limited to k <= {MOEBIUS_LIMIT}, got {k}")
    return (-1) ** (k - 1) * math.factorial(k - 1)


@lru_cache(maxsize=None)
def _stirling2(v: int, a: int) -> int:
    if v == a:
        return 1
    if a == 0 or a > v:
        return 0
    return a * _stirling2(v - 1, a) + _stirling2(v - 1, a - 1)


def stirling2(v: int, a: int) -> int:
    """Stirling number of the second kind S(v, a), exact."""
    if v < 0 or a < 0:
        raise ValueError(f"stirling2 arguments must be non-negative, got ({v}, {a})")
    if v > STIRLING_LIMIT or a > STIRLING_LIMIT:
        raise ResourceLimitError(f"stirling2 limited to arguments <= {STIRLING_LIMIT}")
    return _stirling2(v, a)


def bell_number(n: int) -> int:
    """Bell number via the Bell triangle (independent of the enumerator)."""
    if n < 0:
        raise ValueError(f"bell_number needs n >= 0, got {n}")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[0]
