"""Naive pooled size and the pairwise lower-bound proxy.

The proxy subtracts, for every pair of studies, an estimated shared count
``p / (1 + p) * (n_i + n_j)`` capped at ``min(n_i, n_j)``, where ``p`` is the
pair's potential. With the true proportion of overlap in place of ``p`` (and
no cap needed) this is the inclusion-exclusion sum truncated after the pair
terms, which is a guaranteed lower bound on the union size. With the
potential it is only a proxy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .model import EncodedSynthesis, StudyEnvelope
from .potential import StudySubset, potential
from .rational import as_decimal_str, as_fraction_str


class ProxyBelowOverlapFreeWarning(UserWarning):
    """The proxy fell below the best overlap-free pooled size."""


@dataclass(frozen=True)
class PairDeduction:
    pair: tuple[int, int]
    value: Fraction
    raw: Fraction
    deduction: Fraction
    capped: bool


@dataclass(frozen=True)
class BoundReport:
    naive_total: int
    pairwise_deductions: tuple[PairDeduction, ...]
    lower_bound_proxy: Fraction
    below_overlap_free: bool = False

    @property
    def total_deduction(self) -> Fraction:
        return sum((d.deduction for d in self.pairwise_deductions), Fraction(0))

    def display(self) -> str:
        return as_decimal_str(self.lower_bound_proxy, 2)

    def to_dict(self, study_ids: Sequence[str]) -> dict:
        return {
            "naive_total": self.naive_total,
            "lower_bound_proxy": as_fraction_str(self.lower_bound_proxy),
            "lower_bound_proxy_decimal": self.display(),
            "below_overlap_free": self.below_overlap_free,
            "pairwise_deductions": [
                {
                    "pair": [study_ids[d.pair[0]], study_ids[d.pair[1]]],
                    "potential": as_fraction_str(d.value),
                    "deduction": as_fraction_str(d.deduction),
                    "deduction_decimal": as_decimal_str(d.deduction, 2),
                    "capped": d.capped,
                }
                for d in self.pairwise_deductions
            ],
        }


def naive_pooled_size(envelopes: Sequence[StudyEnvelope] | Sequence[int]) -> int:
    return sum(e if isinstance(e, int) else e.sample_size for e in envelopes)


def pairwise_bound(
    sizes: Sequence[int],
    pair_value: Callable[[int, int], Fraction],
    *,
    cap: bool = True,
) -> BoundReport:
    """Generic truncated bound for any pairwise proportion ``pair_value(i, j)``.

    Pairs are visited in (i, j) order with i < j so the exact sum is built in
    the same order every time.
    """
    items = []
    total = Fraction(0)
    n = len(sizes)
    for i in range(n):
        for j in range(i + 1, n):
            p = Fraction(pair_value(i, j))
            raw = p / (1 + p) * (sizes[i] + sizes[j])
            limit = min(sizes[i], sizes[j])
            capped = cap and raw > limit
            d = Fraction(limit) if capped else raw
            items.append(PairDeduction((i, j), p, raw, d, capped))
            total += d
    naive = sum(sizes)
    return BoundReport(naive, tuple(items), naive - total)


def lower_bound_proxy(
    encoded: EncodedSynthesis,
    envelopes: Sequence[StudyEnvelope] | None = None,
    *,
    best_overlap_free: int | None = None,
) -> BoundReport:
    """Proxy of the lower bound on the deduplicated pooled sample size.

    Sample sizes come from ``envelopes`` when given, else from ``encoded``.
    If ``best_overlap_free`` is supplied and the proxy is smaller, a
    :class:`ProxyBelowOverlapFreeWarning` is emitted and flagged in the report;
    the raw value is never clamped.
    """
    sizes = (
        [e.sample_size for e in envelopes] if envelopes is not None else list(encoded.sample_sizes)
    )
    if len(sizes) != encoded.n_studies:
        raise ValueError("envelopes and encoding disagree on the number of studies")

    def value(i, j):
        return potential(encoded, StudySubset((1 << i) | (1 << j))).overall

    report = pairwise_bound(sizes, value)
    if best_overlap_free is not None and report.lower_bound_proxy < best_overlap_free:
        warnings.warn(
            f"lower-bound proxy {report.display()} is below the best overlap-free pooled size"
            f" {best_overlap_free}; the overlap-free combination is the stronger statement",
            ProxyBelowOverlapFreeWarning,
            stacklevel=2,
        )
        report = BoundReport(
            report.naive_total, report.pairwise_deductions, report.lower_bound_proxy, True
        )
    return report
