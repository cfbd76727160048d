"""Overlap potential of study subsets.

For one characteristic the potential of a subset is the number of bins every
member covers divided by the number of bins at least one member covers; the
overall potential is the minimum over characteristics. Values are exact
``Fraction`` objects so that tests for 0 and 1 are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from .exceptions import ValidationError
from .model import EncodedSynthesis
from .rational import as_decimal_str, as_fraction_str

ZERO = Fraction(0)


@dataclass(frozen=True, order=False)
class StudySubset:
    """A set of study indices held as a bit mask (bit ``i`` = study ``i``)."""

    mask: int

    def __post_init__(self):
        if self.mask < 0:
            raise ValueError("mask must be non-negative")

    @classmethod
    def of(cls, members: Iterable[int]) -> StudySubset:
        mask = 0
        for i in members:
            if i < 0:
                raise ValueError(f"negative study index {i}")
            mask |= 1 << i
        return cls(mask)

    @property
    def members(self) -> tuple[int, ...]:
        out, m, i = [], self.mask, 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return tuple(out)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __contains__(self, i: int) -> bool:
        return bool(self.mask >> i & 1)

    def __iter__(self):
        return iter(self.members)

    def issubset(self, other: StudySubset) -> bool:
        return self.mask & ~other.mask == 0

    def labels(self, encoded: EncodedSynthesis) -> tuple[str, ...]:
        return tuple(encoded.study_ids[i] for i in self.members)

    def sort_key(self):
        """Size first, then lexicographic order of member indices."""
        return (len(self), self.members)


SubsetLike = Union[StudySubset, Iterable[int]]


def as_subset(subset: SubsetLike, n: int | None = None) -> StudySubset:
    s = subset if isinstance(subset, StudySubset) else StudySubset.of(subset)
    if n is not None and s.mask >> n:
        raise ValidationError(f"subset {s.members} refers to studies beyond index {n - 1}")
    return s


def bin_counts(encoded: EncodedSynthesis, mask: int, k: int) -> tuple[int, int]:
    """(bins covered by all members, bins covered by any member) on characteristic ``k``."""
    row = encoded.coverage[k]
    shared = -1
    union = 0
    i = 0
    m = mask
    while m:
        if m & 1:
            shared &= row[i]
            union |= row[i]
        m >>= 1
        i += 1
    if shared == -1:
        return 0, 0
    return shared.bit_count(), union.bit_count()


def per_characteristic_potential(encoded: EncodedSynthesis, subset: SubsetLike, k: int) -> Fraction:
    s = as_subset(subset, encoded.n_studies)
    if len(s) < 2:
        return ZERO
    shared, union = bin_counts(encoded, s.mask, k)
    return Fraction(shared, union)


@dataclass(frozen=True)
class CombinationReport:
    subset: StudySubset
    per_characteristic: tuple[Fraction, ...]
    overall: Fraction
    pooled_size_naive: int

    @property
    def members(self) -> tuple[int, ...]:
        return self.subset.members

    def sort_key(self):
        """Decreasing potential, then size, then lexicographic members."""
        return (-self.overall, len(self.subset), self.subset.members)

    def to_dict(self, encoded: EncodedSynthesis) -> dict:
        return {
            "studies": list(self.subset.labels(encoded)),
            "potential": as_fraction_str(self.overall),
            "potential_decimal": as_decimal_str(self.overall),
            "per_characteristic": {
                k: as_fraction_str(v) for k, v in zip(encoded.characteristics, self.per_characteristic)
            },
            "pooled_size_naive": self.pooled_size_naive,
        }


def potential(encoded: EncodedSynthesis, subset: SubsetLike) -> CombinationReport:
    """Per-characteristic and overall potential of one subset."""
    if not encoded.characteristics:
        raise ValidationError("at least one characteristic is required")
    s = as_subset(subset, encoded.n_studies)
    per = tuple(
        per_characteristic_potential(encoded, s, k) for k in range(len(encoded.characteristics))
    )
    pooled = sum(encoded.sample_sizes[i] for i in s.members)
    return CombinationReport(s, per, min(per), pooled)


def pairwise_matrix(encoded: EncodedSynthesis) -> list[list[Fraction]]:
    """Symmetric matrix of pair potentials with a zero diagonal."""
    n = encoded.n_studies
    if n < 2:
        raise ValidationError("need >= 2 studies")
    out = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            v = potential(encoded, StudySubset((1 << i) | (1 << j))).overall
            out[i][j] = out[j][i] = v
    return out
