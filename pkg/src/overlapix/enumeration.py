"""Combination enumeration, overlap-free families and selection.

Zero shared bins on any characteristic rules out overlap for a subset and for
every superset of it, and the potential never increases as studies are added.
Both facts make depth-first extension with pruning exact. The overlap-free
family is computed on the exclusion graph (an edge joins two studies whose
pair potential is zero): a subset all of whose sub-combinations have zero
potential is exactly a clique there, and the maximal ones are found by
Bron-Kerbosch with pivoting.
"""

from __future__ import annotations

import heapq
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .budget import Budget
from .exceptions import CapacityError, ConfigError, CriterionUnavailableError, ValidationError
from .model import EncodedSynthesis, StudyEnvelope
from .potential import CombinationReport, StudySubset

MAX_STUDIES = 4096


@dataclass(frozen=True)
class EnumerationConfig:
    min_potential: Fraction = Fraction(0)
    top_k: int | None = None
    max_subset_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "min_potential", Fraction(self.min_potential))
        if not 0 <= self.min_potential <= 1:
            raise ConfigError("min_potential must lie in [0, 1]")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError("top_k must be at least 1")
        if self.max_subset_size is not None and self.max_subset_size < 2:
            raise ConfigError("max_subset_size must be at least 2")


@dataclass(frozen=True)
class Ranking:
    """Combinations ordered by decreasing potential, with a truncation flag."""

    reports: tuple[CombinationReport, ...]
    truncated: bool = False

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]


def _check_capacity(n: int) -> None:
    if n > MAX_STUDIES:
        raise CapacityError(f"{n} studies exceed the supported maximum of {MAX_STUDIES}")


def _report(encoded: EncodedSynthesis, mask: int, counts) -> CombinationReport:
    per = tuple(Fraction(s, u) for s, u in counts)
    subset = StudySubset(mask)
    pooled = sum(encoded.sample_sizes[i] for i in subset.members)
    return CombinationReport(subset, per, min(per), pooled)


def _extend(rows, ands, ors, j, thr_num, thr_den):
    """Add study ``j`` to a running AND/OR state; None if the result prunes.

    Returns (ands, ors, counts, value_num, value_den).
    """
    new_and = []
    new_or = []
    counts = []
    best_num, best_den = 1, 1
    for k, row in enumerate(rows):
        a = ands[k] & row[j]
        if not a:
            return None
        o = ors[k] | row[j]
        s, u = a.bit_count(), o.bit_count()
        if s * best_den < best_num * u:
            best_num, best_den = s, u
        new_and.append(a)
        new_or.append(o)
        counts.append((s, u))
    if best_num * thr_den <= thr_num * best_den:
        return None
    return new_and, new_or, counts, best_num, best_den


def _dfs_branch(encoded, root, thr_num, thr_den, max_size, budget):
    rows = encoded.coverage
    n = encoded.n_studies
    found = []
    ands0 = [row[root] for row in rows]
    # stack entries: (mask, last index, size, ands, ors)
    stack = [(1 << root, root, 1, ands0, list(ands0))]
    while stack:
        mask, last, size, ands, ors = stack.pop()
        if max_size is not None and size >= max_size:
            continue
        children = []
        for j in range(last + 1, n):
            budget.tick()
            ext = _extend(rows, ands, ors, j, thr_num, thr_den)
            if ext is None:
                continue
            a, o, counts, _, _ = ext
            cmask = mask | (1 << j)
            found.append((cmask, counts))
            children.append((cmask, j, size + 1, a, o))
        stack.extend(reversed(children))
    return found


def _best_first(encoded, config, thr_num, thr_den, budget):
    rows = encoded.coverage
    n = encoded.n_studies
    max_size = config.max_subset_size
    heap = []

    def push(mask, last, size, ands, ors, counts, vn, vd):
        members = StudySubset(mask).members
        heapq.heappush(heap, ((-Fraction(vn, vd), size, members), mask, last, ands, ors, counts))

    for i in range(n):
        base = [row[i] for row in rows]
        for j in range(i + 1, n):
            budget.tick()
            ext = _extend(rows, base, base, j, thr_num, thr_den)
            if ext is not None:
                a, o, counts, vn, vd = ext
                push((1 << i) | (1 << j), j, 2, a, o, counts, vn, vd)
    out = []
    while heap and len(out) < config.top_k:
        (_, size, _), mask, last, ands, ors, counts = heapq.heappop(heap)
        out.append(_report(encoded, mask, counts))
        if max_size is not None and size >= max_size:
            continue
        for j in range(last + 1, n):
            budget.tick()
            ext = _extend(rows, ands, ors, j, thr_num, thr_den)
            if ext is not None:
                a, o, c, vn, vd = ext
                push(mask | (1 << j), j, size + 1, a, o, c, vn, vd)
    return out, bool(heap)


def enumerate_potentials(
    encoded: EncodedSynthesis,
    config: EnumerationConfig | None = None,
    *,
    n_jobs: int = 1,
    budget=None,
) -> Ranking:
    """All subsets of size >= 2 whose potential exceeds ``min_potential``.

    Sorted by decreasing potential, then size, then member indices. With
    ``top_k`` a best-first search returns only the leading ``top_k`` entries
    and sets ``truncated`` when more exist; its cost grows with ``top_k``
    rather than with the number of qualifying subsets.
    """
    config = config or EnumerationConfig()
    n = encoded.n_studies
    if n < 2:
        raise ValidationError("need >= 2 studies")
    _check_capacity(n)
    budget = Budget.coerce(budget, "enumerate_potentials")
    thr_num, thr_den = config.min_potential.numerator, config.min_potential.denominator
    if config.top_k is not None:
        out, truncated = _best_first(encoded, config, thr_num, thr_den, budget)
        return Ranking(tuple(out), truncated)

    def branch(root):
        return _dfs_branch(encoded, root, thr_num, thr_den, config.max_subset_size, budget)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(branch, range(n)))
    else:
        parts = [branch(r) for r in range(n)]
    budget.check()
    reports = [_report(encoded, mask, counts) for part in parts for mask, counts in part]
    reports.sort(key=CombinationReport.sort_key)
    return Ranking(tuple(reports), False)


# ---------------------------------------------------------------------------
# exclusion graph and the overlap-free family


@dataclass(frozen=True)
class ExclusionGraph:
    """Undirected graph; ``adjacency[i]`` is a bit mask of i's neighbours."""

    n: int
    adjacency: tuple[int, ...]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i] >> j & 1)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n) if self.has_edge(i, j)]

    def is_clique(self, subset: StudySubset) -> bool:
        mask = subset.mask
        return all(mask & ~(self.adjacency[i] | (1 << i)) == 0 for i in subset.members)


def exclusion_graph(encoded: EncodedSynthesis) -> ExclusionGraph:
    """Join two studies when some characteristic leaves them no shared bin."""
    n = encoded.n_studies
    _check_capacity(n)
    adj = [0] * n
    for row in encoded.coverage:
        for i in range(n):
            ri = row[i]
            for j in range(i + 1, n):
                if not ri & row[j]:
                    adj[i] |= 1 << j
                    adj[j] |= 1 << i
    return ExclusionGraph(n, tuple(adj))


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _maximal_clique_masks(adj: Sequence[int], n: int, budget: Budget) -> list[int]:
    """Bron-Kerbosch with Tomita pivoting, iterative, over bit masks."""
    if n == 0:
        return []
    out: list[int] = []

    def frame(r, p, x):
        pivot = max(_bits(p | x), key=lambda u: (adj[u] & p).bit_count())
        return [r, p, x, p & ~adj[pivot]]

    stack = [frame(0, (1 << n) - 1, 0)]
    while stack:
        top = stack[-1]
        r, p, x, cand = top
        if not cand:
            stack.pop()
            continue
        budget.tick()
        low = cand & -cand
        v = low.bit_length() - 1
        top[1], top[2], top[3] = p & ~low, x | low, cand & ~low
        cp, cx = p & adj[v], x & adj[v]
        if not cp:
            if not cx:
                out.append(r | low)
            continue
        stack.append(frame(r | low, cp, cx))
    return out


def maximal_cliques(graph: ExclusionGraph, budget=None) -> list[StudySubset]:
    """All maximal cliques, ordered by (size, members)."""
    budget = Budget.coerce(budget, "maximal_cliques")
    out = [StudySubset(m) for m in _maximal_clique_masks(graph.adjacency, graph.n, budget)]
    out.sort(key=StudySubset.sort_key)
    return out


def twin_classes(encoded: EncodedSynthesis) -> tuple[StudySubset, ...]:
    """Studies grouped by identical coverage on every characteristic.

    Twins have pair potential one with each other and the same pair
    potential with everybody else, so they are interchangeable in the
    exclusion graph and never sit in the same overlap-free combination.
    Classes are ordered by their smallest member.
    """
    groups: dict[tuple[int, ...], int] = {}
    for i in range(encoded.n_studies):
        key = tuple(row[i] for row in encoded.coverage)
        groups[key] = groups.get(key, 0) | (1 << i)
    return tuple(sorted((StudySubset(m) for m in groups.values()), key=lambda s: s.members[0]))


@dataclass(frozen=True)
class OverlapFreeFamily:
    """Maximal overlap-free combinations (every pair has zero potential).

    Stored compactly: ``compact`` lists maximal cliques of the graph whose
    vertices are the twin classes, each as a tuple of classes. Every
    combination in the family picks exactly one study from each class of
    one compact entry, so the family can be far larger than its compact form
    when many studies report identical envelopes. ``members`` expands it.
    """

    compact: tuple[tuple[StudySubset, ...], ...]
    note: str = "maximal cliques of the exclusion graph"
    graph: ExclusionGraph | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_members(cls, members: Sequence[StudySubset], note: str = "given combinations"):
        compact = tuple(tuple(StudySubset.of([i]) for i in s.members) for s in members)
        return cls(compact, note)

    @property
    def count(self) -> int:
        """Number of combinations in the expanded family."""
        return sum(math.prod(len(c) for c in entry) for entry in self.compact)

    def iter_expanded(self):
        """Expanded combinations, compact entry by compact entry (not globally sorted)."""
        for entry in self.compact:
            for pick in itertools.product(*(c.members for c in entry)):
                yield StudySubset.of(pick)

    @property
    def members(self) -> tuple[StudySubset, ...]:
        cached = self.__dict__.get("_members")
        if cached is None:
            cached = tuple(sorted(self.iter_expanded(), key=StudySubset.sort_key))
            object.__setattr__(self, "_members", cached)
        return cached

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return self.count


def overlap_free_b2(encoded: EncodedSynthesis, budget=None) -> OverlapFreeFamily:
    """B2 via maximal cliques of the twin-class quotient of the exclusion graph."""
    budget = Budget.coerce(budget, "overlap_free_b2")
    graph = exclusion_graph(encoded)
    classes = twin_classes(encoded)
    reps = [c.members[0] for c in classes]
    m = len(classes)
    adj = [
        sum(1 << b for b in range(m) if graph.has_edge(reps[a], reps[b]))
        for a in range(m)
    ]
    compact = []
    for mask in _maximal_clique_masks(adj, m, budget):
        entry = tuple(classes[a] for a in _bits(mask))
        compact.append(tuple(sorted(entry, key=lambda c: c.members[0])))
    compact.sort(key=lambda e: (len(e), tuple(sorted(c.members[0] for c in e))))
    return OverlapFreeFamily(tuple(compact), graph=graph)


# ---------------------------------------------------------------------------
# selection

CRITERIA = {
    "max-pooled-sample-size": "pooled-size",
    "pooled-size": "pooled-size",
    "max-study-count": "study-count",
    "study-count": "study-count",
    "max-total-inverse-variance-weight": "inverse-variance",
    "inverse-variance": "inverse-variance",
}


def parse_criterion(criterion: str | Sequence[str]) -> tuple[str, ...]:
    """Normalise a criterion or a comma-separated lexicographic chain."""
    parts = criterion.split(",") if isinstance(criterion, str) else list(criterion)
    chain = []
    for p in parts:
        key = CRITERIA.get(p.strip())
        if key is None:
            raise ConfigError(
                f"unknown criterion {p.strip()!r}; choose from {', '.join(sorted(set(CRITERIA)))}"
            )
        if key not in chain:
            chain.append(key)
    if not chain:
        raise ConfigError("empty criterion")
    return tuple(chain)


MAX_LISTED_TIES = 1000


@dataclass(frozen=True)
class Selection:
    """The chosen combination and every combination tying with it.

    ``scores`` follow ``criterion``; the inverse-variance weight is an exact
    rational. At most ``MAX_LISTED_TIES`` ties are listed, ``n_ties`` counts
    them all.
    """

    subset: StudySubset
    criterion: tuple[str, ...]
    scores: tuple
    pooled_size: int
    ties: tuple[StudySubset, ...] = ()
    n_ties: int = 1

    @property
    def tied(self) -> bool:
        return self.n_ties > 1


def _study_scores(envelopes: Sequence[StudyEnvelope], chain: tuple[str, ...]):
    def one(env: StudyEnvelope):
        vals = []
        for c in chain:
            if c == "pooled-size":
                vals.append(env.sample_size)
            elif c == "study-count":
                vals.append(1)
            else:
                vals.append(1 / Fraction(env.se) ** 2)
        return tuple(vals)

    return [one(e) for e in envelopes]


def select_best(
    family: OverlapFreeFamily | Sequence[StudySubset],
    envelopes: Sequence[StudyEnvelope],
    criterion="max-pooled-sample-size",
    *,
    min_studies: int = 1,
) -> Selection:
    """Pick one overlap-free combination by a lexicographic criterion chain.

    Pooled size is a plain sum: members of an overlap-free combination share no
    observations. Every criterion is a sum over members, so on a compact
    family the best pick inside each twin class can be made independently.
    Ties on the whole chain go to the lexicographically smallest member list;
    all tied candidates are reported.
    """
    chain = parse_criterion(criterion)
    if not isinstance(family, OverlapFreeFamily):
        family = OverlapFreeFamily.from_members(list(family))
    entries = [e for e in family.compact if len(e) >= min_studies]
    if not entries:
        raise ValidationError(f"no overlap-free combination has at least {min_studies} studies")
    if "inverse-variance" in chain:
        used = sorted({i for e in entries for c in e for i in c.members})
        missing = [envelopes[i].study_id for i in used if envelopes[i].se is None]
        if missing:
            raise CriterionUnavailableError("max-total-inverse-variance-weight", missing)
    per_study = _study_scores(envelopes, chain)

    best_score, best_entries = None, []
    for entry in entries:
        total = [0] * len(chain)
        picks = []
        for c in entry:
            top = max(per_study[i] for i in c.members)
            picks.append(tuple(i for i in c.members if per_study[i] == top))
            total = [a + b for a, b in zip(total, top)]
        total = tuple(total)
        if best_score is None or total > best_score:
            best_score, best_entries = total, [picks]
        elif total == best_score:
            best_entries.append(picks)

    n_ties = sum(math.prod(len(p) for p in picks) for picks in best_entries)
    listed = []
    for picks in best_entries:
        for combo in itertools.product(*picks):
            listed.append(StudySubset.of(combo))
            if len(listed) >= MAX_LISTED_TIES:
                break
        if len(listed) >= MAX_LISTED_TIES:
            break
    # The smallest member list takes the smallest tied study in every class.
    chosen = min(
        (StudySubset.of(p[0] for p in picks) for picks in best_entries), key=lambda s: s.members
    )
    listed = sorted(set(listed) | {chosen}, key=lambda s: s.members)[:MAX_LISTED_TIES]
    pooled = sum(envelopes[i].sample_size for i in chosen.members)
    return Selection(chosen, chain, best_score, pooled, tuple(listed), n_ties)
