"""Envelopes, partitions and the binary coverage encoding.

A study reports, for every key characteristic, the set of atoms its sample
may occupy. Intervals on ordered characteristics are expanded to atoms before
they reach this module, so every downstream step is plain set arithmetic.
Coverage vectors are stored as Python ints: bit ``l`` of ``coverage[k][i]``
is set iff study ``i``'s range on characteristic ``k`` meets bin ``l``.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .exceptions import FormatError, PartitionError, SchemaError, ValidationError

ORDERED = "ordered"
CATEGORICAL = "categorical"
KINDS = (ORDERED, CATEGORICAL)
ORDER_KEYS = ("integer", "month", "date", "declared")


# ---------------------------------------------------------------------------
# atom ordering


def _parse_month(label: str) -> tuple[int, int]:
    try:
        d = _dt.datetime.strptime(label, "%Y-%m")
    except ValueError:
        raise FormatError(f"not a YYYY-MM month: {label!r}") from None
    return d.year, d.month


def _parse_date(label: str) -> _dt.date:
    try:
        return _dt.date.fromisoformat(label)
    except ValueError:
        raise FormatError(f"not an ISO YYYY-MM-DD date: {label!r}") from None


def _parse_integer(label: str) -> int:
    try:
        return int(label)
    except ValueError:
        raise FormatError(f"not an integer: {label!r}") from None


@dataclass(frozen=True)
class Characteristic:
    """Declaration of one key characteristic.

    ``order_key`` is required for ordered kinds and selects how atom labels
    are compared: ``integer``, ``month`` (``YYYY-MM``), ``date``
    (``YYYY-MM-DD``) or ``declared`` (position in ``atoms``). ``atoms`` may
    also be given for categorical kinds to fix the display order.
    """

    id: str
    kind: str = CATEGORICAL
    order_key: str | None = None
    atoms: tuple[str, ...] = ()
    resolution: str | None = None

    def __post_init__(self):
        if not self.id:
            raise FormatError("characteristic id must be a non-empty string")
        if self.kind not in KINDS:
            raise FormatError(f"characteristic {self.id!r}: unknown kind {self.kind!r}")
        if self.kind == ORDERED:
            if self.order_key not in ORDER_KEYS:
                raise FormatError(
                    f"characteristic {self.id!r}: unknown order key {self.order_key!r}"
                    f" (expected one of {', '.join(ORDER_KEYS)})"
                )
            if self.order_key == "declared" and not self.atoms:
                raise FormatError(
                    f"characteristic {self.id!r}: order key 'declared' needs an atom list"
                )
        if len(set(self.atoms)) != len(self.atoms):
            raise FormatError(f"characteristic {self.id!r}: duplicate declared atoms")

    def normalize(self, raw) -> str:
        """Canonical label for one atom (``2021`` and ``"2021"`` coincide)."""
        if isinstance(raw, bool):
            raise FormatError(f"characteristic {self.id!r}: boolean is not an atom")
        label = str(raw).strip()
        if not label:
            raise FormatError(f"characteristic {self.id!r}: empty atom label")
        if self.kind == ORDERED:
            if self.order_key == "integer":
                return str(_parse_integer(label))
            if self.order_key == "month":
                y, m = _parse_month(label)
                return f"{y:04d}-{m:02d}"
            if self.order_key == "date":
                return _parse_date(label).isoformat()
        if self.atoms and label not in self.atoms:
            raise FormatError(f"characteristic {self.id!r}: atom {label!r} is not declared")
        return label

    def sort_key(self, label: str):
        if self.kind == ORDERED:
            if self.order_key == "integer":
                return _parse_integer(label)
            if self.order_key == "month":
                return _parse_month(label)
            if self.order_key == "date":
                return _parse_date(label)
            return self.atoms.index(label)
        if self.atoms:
            return self.atoms.index(label)
        return label

    def expand(self, start, end) -> frozenset[str]:
        """Atoms covered by the inclusive interval ``start..end``."""
        if self.kind != ORDERED:
            raise FormatError(f"characteristic {self.id!r}: intervals need an ordered kind")
        lo, hi = self.normalize(start), self.normalize(end)
        if self.sort_key(lo) > self.sort_key(hi):
            raise FormatError(f"characteristic {self.id!r}: empty interval {lo}..{hi}")
        if self.order_key == "integer":
            return frozenset(str(v) for v in range(int(lo), int(hi) + 1))
        if self.order_key == "month":
            (y, m), end_ym = _parse_month(lo), _parse_month(hi)
            out = []
            while (y, m) <= end_ym:
                out.append(f"{y:04d}-{m:02d}")
                y, m = (y + 1, 1) if m == 12 else (y, m + 1)
            return frozenset(out)
        if self.order_key == "date":
            d, last = _parse_date(lo), _parse_date(hi)
            out = []
            while d <= last:
                out.append(d.isoformat())
                d += _dt.timedelta(days=1)
            return frozenset(out)
        i, j = self.atoms.index(lo), self.atoms.index(hi)
        return frozenset(self.atoms[i : j + 1])


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class CharacteristicDomain:
    """The global union of one characteristic's atoms, in canonical order."""

    id: str
    kind: str
    atoms: tuple[str, ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValidationError(f"domain {self.id!r} has no atoms")
        if len(set(self.atoms)) != len(self.atoms):
            raise ValidationError(f"domain {self.id!r} has duplicate atoms")

    @property
    def ordered(self) -> bool:
        return self.kind == ORDERED


@dataclass(frozen=True)
class ReportedRange:
    characteristic: str
    atoms: frozenset[str]

    def __post_init__(self):
        if not self.atoms:
            raise ValidationError(f"range for {self.characteristic!r} is empty")


@dataclass(frozen=True)
class StudyEnvelope:
    """One study as a meta-analyst sees it: a size and a range per characteristic.

    ``effect``, ``se`` and ``arms`` are carried for selection criteria only.
    """

    study_id: str
    sample_size: int
    ranges: tuple[ReportedRange, ...]
    effect: float | None = None
    se: float | None = None
    arms: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if not isinstance(self.study_id, str) or not self.study_id:
            raise ValidationError("study_id must be a non-empty string")
        if (
            isinstance(self.sample_size, bool)
            or not isinstance(self.sample_size, int)
            or self.sample_size < 1
        ):
            raise ValidationError(
                f"study {self.study_id!r}: sample_size must be a positive integer,"
                f" got {self.sample_size!r}"
            )
        ids = [r.characteristic for r in self.ranges]
        if len(set(ids)) != len(ids):
            raise SchemaError(f"study {self.study_id!r}: a characteristic is reported twice")
        if self.se is not None and not self.se > 0:
            raise ValidationError(f"study {self.study_id!r}: standard error must be positive")

    @classmethod
    def from_sets(cls, study_id: str, sample_size: int, ranges: Mapping[str, Iterable[str]], **extra):
        """Convenience constructor from ``{characteristic: atoms}``."""
        return cls(
            study_id,
            sample_size,
            tuple(ReportedRange(k, frozenset(v)) for k, v in ranges.items()),
            **extra,
        )

    @property
    def characteristics(self) -> tuple[str, ...]:
        return tuple(r.characteristic for r in self.ranges)

    def atoms(self, characteristic: str) -> frozenset[str]:
        for r in self.ranges:
            if r.characteristic == characteristic:
                return r.atoms
        raise KeyError(characteristic)


def _default_declarations(envelopes: Sequence[StudyEnvelope]) -> list[Characteristic]:
    return [Characteristic(k) for k in envelopes[0].characteristics] if envelopes else []


def check_envelopes(
    envelopes: Sequence[StudyEnvelope],
    characteristics: Sequence[Characteristic] | None = None,
) -> list[Characteristic]:
    """Validate a study list against the declared characteristics.

    Returns the declarations (inferred as categorical when not given).
    """
    decls = list(characteristics) if characteristics is not None else _default_declarations(envelopes)
    wanted = [c.id for c in decls]
    if len(set(wanted)) != len(wanted):
        raise SchemaError("duplicate characteristic declaration")
    seen = set()
    for env in envelopes:
        if env.study_id in seen:
            raise ValidationError(f"duplicate study_id {env.study_id!r}")
        seen.add(env.study_id)
        have = set(env.characteristics)
        missing = [k for k in wanted if k not in have]
        extra = sorted(have - set(wanted))
        if missing:
            raise SchemaError(
                f"study {env.study_id!r} does not report characteristic {missing[0]!r}"
            )
        if extra:
            raise SchemaError(
                f"study {env.study_id!r} reports undeclared characteristic {extra[0]!r}"
            )
    return decls


def fill_missing_ranges(
    envelopes: Sequence[StudyEnvelope], characteristics: Sequence[Characteristic]
) -> list[StudyEnvelope]:
    """Give every study lacking a characteristic the union of everyone else's atoms.

    This is the permissive ``--missing=full-range`` behaviour; it inflates
    potentials and is off by default.
    """
    out = []
    union = {c.id: set() for c in characteristics}
    for env in envelopes:
        for r in env.ranges:
            if r.characteristic in union:
                union[r.characteristic] |= r.atoms
    for c in characteristics:
        if not union[c.id]:
            raise SchemaError(f"no study reports characteristic {c.id!r}")
    for env in envelopes:
        have = {r.characteristic: r for r in env.ranges}
        ranges = tuple(
            have.get(c.id) or ReportedRange(c.id, frozenset(union[c.id])) for c in characteristics
        )
        out.append(
            StudyEnvelope(env.study_id, env.sample_size, ranges, env.effect, env.se, env.arms)
        )
    return out


def build_global_domains(
    envelopes: Sequence[StudyEnvelope],
    characteristics: Sequence[Characteristic] | None = None,
) -> list[CharacteristicDomain]:
    """Union every study's atoms per characteristic.

    Ordered domains are sorted by their order key. Categorical domains use the
    declared atom order when there is one, otherwise first appearance over the
    studies in input order (atoms within one study taken lexicographically).
    """
    decls = check_envelopes(envelopes, characteristics)
    domains = []
    for c in decls:
        order: dict[str, None] = {}
        for env in envelopes:
            for atom in sorted(env.atoms(c.id)):
                order.setdefault(atom, None)
        atoms = list(order)
        if c.atoms:
            bad = [a for a in atoms if a not in c.atoms]
            if bad:
                raise FormatError(
                    f"characteristic {c.id!r}: atoms {bad} missing from the declared order"
                )
        if c.kind == ORDERED or c.atoms:
            atoms.sort(key=c.sort_key)
        if not atoms:
            raise SchemaError(f"characteristic {c.id!r} has no atoms")
        domains.append(CharacteristicDomain(c.id, c.kind, tuple(atoms)))
    return domains


# ---------------------------------------------------------------------------
# partitions


def _bin_label(bin_atoms: tuple[str, ...], ordered: bool) -> str:
    if len(bin_atoms) == 1:
        return bin_atoms[0]
    if ordered:
        return f"{bin_atoms[0]}..{bin_atoms[-1]}"
    return "|".join(bin_atoms)


@dataclass(frozen=True)
class PartitionFamily:
    """Ordered, pairwise disjoint bins covering each global domain."""

    domains: tuple[CharacteristicDomain, ...]
    bins: tuple[tuple[tuple[str, ...], ...], ...]
    _index: tuple[dict, ...] = field(default=(), repr=False, compare=False, hash=False)

    def __post_init__(self):
        if len(self.domains) != len(self.bins):
            raise PartitionError("one bin list per domain is required")
        index = []
        for dom, bins in zip(self.domains, self.bins):
            _validate_bins(dom, bins)
            index.append({a: l for l, b in enumerate(bins) for a in b})
        object.__setattr__(self, "_index", tuple(index))

    @property
    def characteristics(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.domains)

    def bin_counts(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.bins)

    def bin_of(self, k: int, atom: str) -> int | None:
        return self._index[k].get(atom)

    def labels(self, k: int) -> tuple[str, ...]:
        ordered = self.domains[k].ordered
        return tuple(_bin_label(b, ordered) for b in self.bins[k])

    def atoms_of_mask(self, k: int, mask: int) -> frozenset[str]:
        """Decode a coverage vector back to the union of its bins."""
        return frozenset(a for l, b in enumerate(self.bins[k]) if mask >> l & 1 for a in b)

    def to_dict(self) -> dict:
        return {
            d.id: {"kind": d.kind, "bins": [list(b) for b in bins]}
            for d, bins in zip(self.domains, self.bins)
        }


def _validate_bins(dom: CharacteristicDomain, bins) -> None:
    pos = {a: p for p, a in enumerate(dom.atoms)}
    owner: dict[str, int] = {}
    for l, b in enumerate(bins):
        if not b:
            raise PartitionError(f"{dom.id}: bin {l} is empty", characteristic=dom.id, bins=(l,))
        for a in b:
            if a not in pos:
                raise PartitionError(
                    f"{dom.id}: bin {l} contains {a!r}, which no study reports",
                    characteristic=dom.id,
                    bins=(l,),
                )
            if a in owner:
                raise PartitionError(
                    f"{dom.id}: bins {owner[a]} and {l} overlap on {a!r}",
                    characteristic=dom.id,
                    bins=(owner[a], l),
                )
            owner[a] = l
    uncovered = [a for a in dom.atoms if a not in owner]
    if uncovered:
        raise PartitionError(
            f"{dom.id}: bins do not cover {uncovered}", characteristic=dom.id
        )
    if dom.ordered:
        last = -1
        for l, b in enumerate(bins):
            ps = sorted(pos[a] for a in b)
            if ps != list(range(ps[0], ps[0] + len(ps))):
                raise PartitionError(
                    f"{dom.id}: bin {l} is not contiguous", characteristic=dom.id, bins=(l,)
                )
            if ps[0] < last:
                raise PartitionError(
                    f"{dom.id}: bin {l} is out of order", characteristic=dom.id, bins=(l - 1, l)
                )
            last = ps[-1]


def partition_domains(domains: Sequence[CharacteristicDomain], scheme="singleton") -> PartitionFamily:
    """Build bins for every domain.

    ``scheme`` is ``"singleton"`` (one bin per atom), an int ``w`` or
    ``"width=w"`` (runs of ``w`` consecutive atoms on ordered domains,
    singletons on categorical ones), or a mapping ``{characteristic: [[atom,
    ...], ...]}`` of explicit bins; characteristics absent from the mapping
    fall back to singletons.
    """
    domains = tuple(domains)
    width = None
    explicit: Mapping | None = None
    if isinstance(scheme, Mapping):
        explicit = scheme
        unknown = set(scheme) - {d.id for d in domains}
        if unknown:
            raise PartitionError(f"bins given for unknown characteristics {sorted(unknown)}")
    elif isinstance(scheme, int) and not isinstance(scheme, bool):
        width = scheme
    elif isinstance(scheme, str) and scheme.startswith("width="):
        try:
            width = int(scheme[len("width="):])
        except ValueError:
            raise PartitionError(f"bad partition scheme {scheme!r}") from None
    elif scheme != "singleton":
        raise PartitionError(f"unknown partition scheme {scheme!r}")
    if width is not None and width < 1:
        raise PartitionError("bin width must be at least 1")

    all_bins = []
    for dom in domains:
        if explicit is not None and dom.id in explicit:
            pos = {a: p for p, a in enumerate(dom.atoms)}
            bins = tuple(
                tuple(sorted((str(a) for a in b), key=lambda a: pos.get(a, -1)))
                for b in explicit[dom.id]
            )
        elif width is not None and dom.ordered:
            bins = tuple(dom.atoms[i : i + width] for i in range(0, len(dom.atoms), width))
        else:
            bins = tuple((a,) for a in dom.atoms)
        all_bins.append(bins)
    return PartitionFamily(domains, tuple(all_bins))


# ---------------------------------------------------------------------------
# encoding


@dataclass(frozen=True)
class EncodedSynthesis:
    """Coverage bits for all studies and characteristics.

    ``coverage[k][i]`` is an int whose bit ``l`` is set iff study ``i``
    covers bin ``l`` of characteristic ``k``.
    """

    study_ids: tuple[str, ...]
    sample_sizes: tuple[int, ...]
    characteristics: tuple[str, ...]
    bin_labels: tuple[tuple[str, ...], ...]
    coverage: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.study_ids)
        if len(self.sample_sizes) != n:
            raise ValidationError("one sample size per study is required")
        if len(self.bin_labels) != len(self.characteristics) or len(self.coverage) != len(
            self.characteristics
        ):
            raise ValidationError("one bin list and coverage row per characteristic is required")
        for k, row in enumerate(self.coverage):
            if len(row) != n:
                raise ValidationError("coverage must have one vector per study")
            full = (1 << len(self.bin_labels[k])) - 1
            for i, mask in enumerate(row):
                if mask <= 0 or mask & ~full:
                    raise ValidationError(
                        f"study {self.study_ids[i]!r} has an invalid coverage vector"
                        f" on {self.characteristics[k]!r}"
                    )

    @property
    def n_studies(self) -> int:
        return len(self.study_ids)

    def bin_counts(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.bin_labels)

    def vector(self, i: int, k: int) -> tuple[int, ...]:
        mask = self.coverage[k][i]
        return tuple(mask >> l & 1 for l in range(len(self.bin_labels[k])))

    def restrict(self, characteristics: Sequence[int]) -> EncodedSynthesis:
        """The same studies seen through a subset of characteristics."""
        ks = list(characteristics)
        return EncodedSynthesis(
            self.study_ids,
            self.sample_sizes,
            tuple(self.characteristics[k] for k in ks),
            tuple(self.bin_labels[k] for k in ks),
            tuple(self.coverage[k] for k in ks),
        )

    def to_dict(self) -> dict:
        return {
            "studies": [
                {"study_id": s, "sample_size": n} for s, n in zip(self.study_ids, self.sample_sizes)
            ],
            "characteristics": [
                {"id": k, "bins": list(labels)}
                for k, labels in zip(self.characteristics, self.bin_labels)
            ],
            "coverage": {
                s: {
                    k: "".join(map(str, self.vector(i, kk)))
                    for kk, k in enumerate(self.characteristics)
                }
                for i, s in enumerate(self.study_ids)
            },
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def encode(
    envelopes: Sequence[StudyEnvelope],
    partition: PartitionFamily,
    handle_unknown: str = "error",
) -> EncodedSynthesis:
    """Set bit ``l`` for every bin a study's range intersects.

    Atoms outside the partition raise unless ``handle_unknown="ignore"``; a
    study whose range then misses every bin is still an error.
    """
    if handle_unknown not in ("error", "ignore"):
        raise ValueError("handle_unknown must be 'error' or 'ignore'")
    chars = partition.characteristics
    coverage = []
    for k, cid in enumerate(chars):
        row = []
        for env in envelopes:
            try:
                atoms = env.atoms(cid)
            except KeyError:
                raise SchemaError(
                    f"study {env.study_id!r} does not report characteristic {cid!r}"
                ) from None
            mask = 0
            for a in atoms:
                l = partition.bin_of(k, a)
                if l is None:
                    if handle_unknown == "error":
                        raise ValidationError(
                            f"study {env.study_id!r}: atom {a!r} of {cid!r} is outside the partition"
                        )
                    continue
                mask |= 1 << l
            if not mask:
                raise ValidationError(
                    f"study {env.study_id!r}: range on {cid!r} misses every bin"
                )
            row.append(mask)
        coverage.append(tuple(row))
    return EncodedSynthesis(
        tuple(e.study_id for e in envelopes),
        tuple(e.sample_size for e in envelopes),
        chars,
        tuple(partition.labels(k) for k in range(len(chars))),
        tuple(coverage),
    )
