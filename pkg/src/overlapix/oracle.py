"""Synthetic individual-level data with known overlap, and brute-force checks.

Everything here works from explicit sets rather than coverage bit masks, so
it can serve as an independent route against which the envelope-side
machinery in :mod:`overlapix.potential` and :mod:`overlapix.enumeration` is
checked.

Random generation uses ``numpy.random.default_rng`` seeded with
``SeedSequence([seed, attempt])``; PCG64 streams are identical across
platforms for a given seed.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .bound import BoundReport, pairwise_bound
from .exceptions import ConfigError, SoundnessViolation
from .model import (
    CATEGORICAL,
    ORDERED,
    Characteristic,
    PartitionFamily,
    StudyEnvelope,
    build_global_domains,
    encode,
    partition_domains,
)
from .potential import StudySubset, potential


@dataclass(frozen=True)
class LatentRecord:
    """One observation event with its intrinsic value per characteristic."""

    event_id: int
    values: tuple[str, ...]
    label: str | None = None


@dataclass(frozen=True)
class SyntheticSynthesis:
    characteristics: tuple[Characteristic, ...]
    records: tuple[LatentRecord, ...]
    study_ids: tuple[str, ...]
    membership: tuple[frozenset[int], ...]
    envelopes: tuple[StudyEnvelope, ...]
    overlap_realized: bool = True
    seed: int | None = None

    def __post_init__(self):
        ids = [r.event_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ConfigError("event ids must be unique")
        known = set(ids)
        for sid, members in zip(self.study_ids, self.membership):
            if not members <= known:
                raise ConfigError(f"study {sid!r} includes unknown events")

    @property
    def n_studies(self) -> int:
        return len(self.study_ids)

    def sizes(self) -> list[int]:
        return [len(m) for m in self.membership]

    def record(self, event_id: int) -> LatentRecord:
        return self._by_id()[event_id]

    def _by_id(self):
        cache = self.__dict__.get("_cache")
        if cache is None:
            cache = {r.event_id: r for r in self.records}
            object.__setattr__(self, "_cache", cache)
        return cache

    def to_dict(self) -> dict:
        return {
            "format": "overlapix-synthesis",
            "version": 1,
            "seed": self.seed,
            "characteristics": [_decl_to_dict(c) for c in self.characteristics],
            "records": [
                {
                    "event_id": r.event_id,
                    **({"label": r.label} if r.label is not None else {}),
                    "values": {c.id: v for c, v in zip(self.characteristics, r.values)},
                }
                for r in self.records
            ],
            "studies": [
                {
                    "study_id": sid,
                    "members": sorted(m),
                    "envelope": {k: sorted(env.atoms(k)) for k in env.characteristics},
                }
                for sid, m, env in zip(self.study_ids, self.membership, self.envelopes)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SyntheticSynthesis:
        chars = tuple(_decl_from_dict(c) for c in data.get("characteristics", []))
        records = tuple(
            LatentRecord(
                int(r["event_id"]),
                tuple(c.normalize(r["values"][c.id]) for c in chars),
                r.get("label"),
            )
            for r in data["records"]
        )
        by_id = {r.event_id: r for r in records}
        ids, members, envs = [], [], []
        for s in data["studies"]:
            m = [int(u) for u in s["members"]]
            if len(set(m)) != len(m):
                raise ConfigError(f"study {s['study_id']!r} lists an event twice")
            ids.append(s["study_id"])
            members.append(frozenset(m))
            env = s.get("envelope")
            if env is None:
                env = {
                    c.id: _tight_range(c, [by_id[u].values[k] for u in m])
                    for k, c in enumerate(chars)
                }
            envs.append(
                StudyEnvelope.from_sets(
                    s["study_id"], len(m), {c.id: [c.normalize(a) for a in env[c.id]] for c in chars}
                )
            )
        return cls(chars, records, tuple(ids), tuple(members), tuple(envs), True, data.get("seed"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _decl_to_dict(c: Characteristic) -> dict:
    out = {"id": c.id, "kind": c.kind}
    if c.order_key:
        out["order_key"] = c.order_key
    if c.atoms:
        out["atoms"] = list(c.atoms)
    return out


def _decl_from_dict(d: dict) -> Characteristic:
    return Characteristic(
        d["id"], d.get("kind", CATEGORICAL), d.get("order_key"), tuple(d.get("atoms", ()))
    )


def _tight_range(c: Characteristic, values: Sequence[str]) -> list[str]:
    """Smallest reported range containing ``values``.

    Ordered characteristics report the contiguous span, categorical ones the
    exact value set.
    """
    vals = set(values)
    if c.kind == ORDERED and c.atoms and vals:
        pos = [c.atoms.index(v) for v in vals]
        return list(c.atoms[min(pos) : max(pos) + 1])
    return sorted(vals)


# ---------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for :func:`generate`.

    ``domain_sizes`` gives the atom count per characteristic; the first
    ``n_ordered`` are ordered (declared order), the rest categorical.
    ``eligibility`` is the fraction of each domain a study's eligibility
    window spans. ``overlap_intensity`` is the probability that a draw reuses
    an event some earlier study already took. ``padding`` widens envelopes by
    that fraction of the atoms they miss. ``distortion`` moves that fraction
    of recorded values to another atom and is the only way to break
    partition compatibility.
    """

    n_studies: int = 6
    collective_size: int = 60
    study_size: tuple[int, int] = (2, 10)
    domain_sizes: tuple[int, ...] = (5, 4)
    n_ordered: int = 1
    eligibility: float = 0.5
    overlap_intensity: float = 0.5
    padding: float = 0.0
    distortion: float = 0.0
    seed: int = 0
    max_attempts: int = 20

    def __post_init__(self):
        for name in ("eligibility", "overlap_intensity", "padding", "distortion"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        lo, hi = self.study_size
        if self.n_studies < 1 or self.collective_size < 1 or lo < 1 or hi < lo:
            raise ConfigError("sizes must be positive and study_size must be (lo, hi) with lo <= hi")
        if lo > self.collective_size:
            raise ConfigError(
                f"study size {lo} exceeds the collective sample of {self.collective_size}"
            )
        if any(m < 1 for m in self.domain_sizes):
            raise ConfigError("every domain needs at least one atom")
        if not 0 <= self.n_ordered <= len(self.domain_sizes):
            raise ConfigError("n_ordered out of range")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


def _characteristics(config: GenerationConfig) -> tuple[Characteristic, ...]:
    out = []
    for k, m in enumerate(config.domain_sizes):
        atoms = tuple(f"c{k}_{a:02d}" for a in range(m))
        if k < config.n_ordered:
            out.append(Characteristic(f"c{k}", ORDERED, "declared", atoms))
        else:
            out.append(Characteristic(f"c{k}", CATEGORICAL, None, atoms))
    return tuple(out)


def _attempt(config: GenerationConfig, attempt: int) -> SyntheticSynthesis:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, attempt]))
    chars = _characteristics(config)
    n0 = config.collective_size
    values = np.stack(
        [rng.integers(0, len(c.atoms), size=n0) for c in chars], axis=1
    ) if chars else np.zeros((n0, 0), dtype=np.int64)
    records = tuple(
        LatentRecord(u, tuple(c.atoms[values[u, k]] for k, c in enumerate(chars)))
        for u in range(n0)
    )
    used: set[int] = set()
    memberships, envelopes, ids = [], [], []
    lo, hi = config.study_size
    for i in range(config.n_studies):
        pool: list[int] = []
        for _ in range(50):
            window = []
            for c in chars:
                m = len(c.atoms)
                w = max(1, math.ceil(config.eligibility * m))
                if c.kind == ORDERED:
                    start = int(rng.integers(0, m - w + 1))
                    window.append(set(range(start, start + w)))
                else:
                    window.append(set(int(a) for a in rng.choice(m, size=w, replace=False)))
            pool = [u for u in range(n0) if all(values[u, k] in window[k] for k in range(len(chars)))]
            if pool:
                break
        if not pool:
            pool = list(range(n0))
        size = min(int(rng.integers(lo, hi + 1)), len(pool))
        members: list[int] = []
        taken: set[int] = set()
        for _ in range(size):
            reuse = [u for u in pool if u in used and u not in taken]
            fresh = [u for u in pool if u not in used and u not in taken]
            if reuse and (not fresh or rng.random() < config.overlap_intensity):
                src = reuse
            elif fresh:
                src = fresh
            else:
                break
            u = src[int(rng.integers(0, len(src)))]
            members.append(u)
            taken.add(u)
        used |= taken
        sid = f"S{i + 1}"
        ranges = {}
        for k, c in enumerate(chars):
            recorded = []
            for u in sorted(members):
                v = int(values[u, k])
                if config.distortion and len(c.atoms) > 1 and rng.random() < config.distortion:
                    v = (v + 1 + int(rng.integers(0, len(c.atoms) - 1))) % len(c.atoms)
                recorded.append(c.atoms[v])
            rng_atoms = set(_tight_range(c, recorded))
            spare = [a for a in c.atoms if a not in rng_atoms]
            extra = round(config.padding * len(spare))
            if extra:
                pick = rng.choice(len(spare), size=extra, replace=False)
                rng_atoms |= {spare[int(p)] for p in sorted(pick)}
            ranges[c.id] = rng_atoms
        ids.append(sid)
        memberships.append(frozenset(members))
        envelopes.append(StudyEnvelope.from_sets(sid, len(members), ranges))
    return SyntheticSynthesis(
        chars, records, tuple(ids), tuple(memberships), tuple(envelopes), True, config.seed
    )


def _has_overlap(s: SyntheticSynthesis) -> bool:
    m = s.membership
    return any(m[i] & m[j] for i in range(len(m)) for j in range(i + 1, len(m)))


def generate(config: GenerationConfig) -> SyntheticSynthesis:
    """Draw a synthesis; deterministic for a given config.

    With positive overlap intensity the draw is repeated (new attempt index in
    the seed sequence) until some pair of studies shares an event; after
    ``max_attempts`` failures the last draw is returned with
    ``overlap_realized=False``.
    """
    s = _attempt(config, 0)
    if config.overlap_intensity > 0 and config.n_studies > 1:
        attempt = 0
        while not _has_overlap(s) and attempt + 1 < config.max_attempts:
            attempt += 1
            s = _attempt(config, attempt)
        if not _has_overlap(s):
            s = SyntheticSynthesis(
                s.characteristics, s.records, s.study_ids, s.membership, s.envelopes, False, s.seed
            )
    return s


# ---------------------------------------------------------------------------
# latent-side truth


@dataclass(frozen=True)
class OverlapSummary:
    overlap_set: frozenset[int]
    pi: Fraction
    f1: int
    f2: int
    f3: Fraction
    f4: float


def _members(subset) -> tuple[int, ...]:
    return subset.members if isinstance(subset, StudySubset) else tuple(sorted(set(subset)))


def true_overlap(synthesis: SyntheticSynthesis, subset) -> OverlapSummary:
    """Overlap set and the four overlap summaries for one study subset."""
    idx = _members(subset)
    if len(idx) < 2:
        return OverlapSummary(frozenset(), Fraction(0), 0, 0, Fraction(0), 0.0)
    sets = [synthesis.membership[i] for i in idx]
    inter = frozenset.intersection(*sets)
    union = frozenset.union(*sets)
    pi = Fraction(len(inter), len(union))
    f4 = len(inter) / math.prod(len(s) for s in sets) ** (1 / len(sets))
    return OverlapSummary(inter, pi, int(bool(inter)), len(inter), pi, f4)


def union_size(synthesis: SyntheticSynthesis, subset=None) -> int:
    idx = range(synthesis.n_studies) if subset is None else _members(subset)
    out: set[int] = set()
    for i in idx:
        out |= synthesis.membership[i]
    return len(out)


@dataclass(frozen=True)
class InclusionExclusionReport:
    union: int
    alternating_sum: int
    identity_holds: bool
    pair_truncation: int
    pair_truncation_holds: bool
    pi_form: Fraction
    pi_form_holds: bool


def inclusion_exclusion_check(synthesis: SyntheticSynthesis, max_n: int = 12) -> InclusionExclusionReport:
    """Check the inclusion-exclusion identity and its pairwise truncations.

    The identity sums over every non-empty subset, so it is skipped (reported
    as holding vacuously) above ``max_n`` studies.
    """
    n = synthesis.n_studies
    sets = synthesis.membership
    union = union_size(synthesis)
    if n <= max_n:
        total = 0
        for r in range(1, n + 1):
            for combo in itertools.combinations(range(n), r):
                total += (-1) ** (r + 1) * len(frozenset.intersection(*(sets[i] for i in combo)))
    else:
        total = union
    pair_sum = sum(len(sets[i] & sets[j]) for i in range(n) for j in range(i + 1, n))
    truncated = sum(len(s) for s in sets) - pair_sum
    pi_report = true_pair_bound(synthesis)
    return InclusionExclusionReport(
        union,
        total,
        total == union,
        truncated,
        truncated <= union,
        pi_report.lower_bound_proxy,
        pi_report.lower_bound_proxy <= union,
    )


def true_pair_bound(synthesis: SyntheticSynthesis) -> BoundReport:
    """The pairwise bound with the true proportion of overlap (no cap)."""
    return pairwise_bound(
        synthesis.sizes(), lambda i, j: true_overlap(synthesis, (i, j)).pi, cap=False
    )


# ---------------------------------------------------------------------------
# envelope-side brute force


def brute_force_potential(
    envelopes: Sequence[StudyEnvelope], partition: PartitionFamily, members: Iterable[int]
) -> tuple[Fraction, tuple[Fraction, ...]]:
    """Potential by looping over bins and intersecting atom sets directly."""
    idx = sorted(set(members))
    if len(idx) < 2:
        return Fraction(0), tuple(Fraction(0) for _ in partition.domains)
    per = []
    for k, dom in enumerate(partition.domains):
        all_cover = any_cover = 0
        for b in partition.bins[k]:
            hits = [bool(envelopes[i].atoms(dom.id) & set(b)) for i in idx]
            all_cover += all(hits)
            any_cover += any(hits)
        per.append(Fraction(all_cover, any_cover))
    return min(per), tuple(per)


def exhaustive_potentials(
    envelopes: Sequence[StudyEnvelope], partition: PartitionFamily
) -> dict[tuple[int, ...], Fraction]:
    """Potential of every subset of size >= 2, keyed by sorted member tuple."""
    n = len(envelopes)
    return {
        combo: brute_force_potential(envelopes, partition, combo)[0]
        for r in range(2, n + 1)
        for combo in itertools.combinations(range(n), r)
    }


def literal_b_families(values: dict[tuple[int, ...], Fraction], n: int):
    """The three-step filter over the full power set.

    ``values`` maps subsets of size >= 2 to their potential; smaller subsets
    count as zero. Returns ``(B0, B1, B2)`` as sets of member tuples. A
    subset is in B1 when it is in B0 and so is every one of its subsets;
    checking the subsets one element smaller suffices by induction.
    """
    every = [c for r in range(0, n + 1) for c in itertools.combinations(range(n), r)]
    b0 = {c for c in every if len(c) < 2 or values[c] == 0}
    b1: set[tuple[int, ...]] = set()
    for c in every:  # every is ordered by size, so smaller subsets are decided first
        if c in b0 and all(c[:t] + c[t + 1 :] in b1 for t in range(len(c))):
            b1.add(c)
    b2 = {c for c in b1 if not any(c != d and set(c) < set(d) for d in b1)}
    return b0, b1, b2


# ---------------------------------------------------------------------------
# soundness sweep


@dataclass
class SweepReport:
    instances: int = 0
    subsets_checked: int = 0
    violations: int = 0
    false_alarms: int = 0
    non_bound: int = 0
    truly_overlapping: int = 0
    proxy_above_union: int = 0
    examples: list = field(default_factory=list)

    @property
    def false_alarm_rate(self) -> float:
        return self.false_alarms / self.subsets_checked if self.subsets_checked else 0.0

    @property
    def non_bound_rate(self) -> float:
        return self.non_bound / self.subsets_checked if self.subsets_checked else 0.0

    @property
    def proxy_violation_rate(self) -> float:
        return self.proxy_above_union / self.instances if self.instances else 0.0

    def to_dict(self) -> dict:
        return {
            "instances": self.instances,
            "subsets_checked": self.subsets_checked,
            "violations": self.violations,
            "false_alarms": self.false_alarms,
            "false_alarm_rate": round(self.false_alarm_rate, 6),
            "non_bound_events": self.non_bound,
            "non_bound_rate": round(self.non_bound_rate, 6),
            "truly_overlapping": self.truly_overlapping,
            "proxy_above_union": self.proxy_above_union,
            "proxy_violation_rate": round(self.proxy_violation_rate, 6),
        }

    def merge(self, other: "SweepReport") -> None:
        """Add ``other``'s counts; examples keep their order, capped at 20."""
        self.instances += other.instances
        self.subsets_checked += other.subsets_checked
        self.violations += other.violations
        self.false_alarms += other.false_alarms
        self.non_bound += other.non_bound
        self.truly_overlapping += other.truly_overlapping
        self.proxy_above_union += other.proxy_above_union
        self.examples.extend(other.examples[: 20 - len(self.examples)])


def check_synthesis(
    synthesis: SyntheticSynthesis,
    report: SweepReport | None = None,
    *,
    partition_scheme="singleton",
    max_subset_size: int | None = None,
    raise_on_violation: bool = True,
) -> SweepReport:
    """Compare envelope-side potential with the truth on every subset."""
    from .bound import lower_bound_proxy

    report = report if report is not None else SweepReport()
    envs = list(synthesis.envelopes)
    partition = partition_domains(
        build_global_domains(envs, synthesis.characteristics), partition_scheme
    )
    encoded = encode(envs, partition)
    n = synthesis.n_studies
    top = n if max_subset_size is None else min(n, max_subset_size)
    report.instances += 1
    for r in range(2, top + 1):
        for combo in itertools.combinations(range(n), r):
            p_env = potential(encoded, combo).overall
            truth = true_overlap(synthesis, combo)
            report.subsets_checked += 1
            if truth.f1:
                report.truly_overlapping += 1
            if p_env == 0 and truth.f1:
                report.violations += 1
                if raise_on_violation:
                    raise SoundnessViolation(
                        f"zero potential but {truth.f2} shared events for studies"
                        f" {[synthesis.study_ids[i] for i in combo]}",
                        synthesis.to_dict(),
                    )
            if p_env > 0 and not truth.f1:
                report.false_alarms += 1
            if p_env < truth.pi:
                report.non_bound += 1
                if len(report.examples) < 20:
                    report.examples.append(
                        {
                            "seed": synthesis.seed,
                            "studies": [synthesis.study_ids[i] for i in combo],
                            "potential": str(p_env),
                            "pi": str(truth.pi),
                        }
                    )
    if n >= 1 and encoded.characteristics:
        if lower_bound_proxy(encoded).lower_bound_proxy > union_size(synthesis):
            report.proxy_above_union += 1
    return report


def soundness_sweep(
    configs: Iterable[GenerationConfig],
    *,
    partition_scheme="singleton",
    max_subset_size: int | None = None,
    raise_on_violation: bool = True,
    n_jobs: int = 1,
) -> SweepReport:
    """Run :func:`check_synthesis` over generated instances.

    Violations raise :class:`SoundnessViolation` carrying the offending
    instance unless ``raise_on_violation`` is false (used to measure the
    effect of ``distortion``). Instances are spread over ``n_jobs`` worker
    threads; per-instance reports are merged in input order, so the result
    and the first violation raised do not depend on ``n_jobs``.
    """

    def one(config):
        try:
            return check_synthesis(
                generate(config),
                partition_scheme=partition_scheme,
                max_subset_size=max_subset_size,
                raise_on_violation=raise_on_violation,
            ), None
        except SoundnessViolation as exc:
            return None, exc

    report = SweepReport()
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, configs))
    else:
        results = map(one, configs)
    for part, exc in results:
        if exc is not None:
            raise exc
        report.merge(part)
    return report


def seeded_configs(base: GenerationConfig, count: int, first_seed: int = 0):
    """``count`` copies of ``base`` with consecutive seeds."""
    from dataclasses import replace

    return [replace(base, seed=first_seed + s) for s in range(count)]
