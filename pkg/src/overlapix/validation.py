"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .exceptions import ValidationError
from .model import Characteristic, StudyEnvelope


def check_declarations(characteristics) -> list[Characteristic] | None:
    if characteristics is None:
        return None
    out = []
    for c in characteristics:
        if isinstance(c, Characteristic):
            out.append(c)
        elif isinstance(c, str):
            out.append(Characteristic(c))
        elif isinstance(c, dict):
            out.append(
                Characteristic(
                    c["id"], c.get("kind", "categorical"), c.get("order_key"), tuple(c.get("atoms", ()))
                )
            )
        else:
            raise ValidationError(f"cannot interpret characteristic declaration {c!r}")
    return out


def check_envelopes_input(X, characteristics=None, *, allow_missing=False) -> list[StudyEnvelope]:
    """Accept a sequence of :class:`StudyEnvelope` or of JSON-style study dicts."""
    from .io import parse_study

    if isinstance(X, (str, bytes)) or not hasattr(X, "__iter__"):
        raise ValidationError(
            f"expected a sequence of study envelopes, got {type(X).__name__}"
        )
    items = list(X)
    if all(isinstance(x, StudyEnvelope) for x in items):
        return items
    decls = check_declarations(characteristics)
    if decls is None:
        ids: list[str] = []
        for x in items:
            if isinstance(x, dict):
                for k in x.get("ranges") or {}:
                    if k not in ids:
                        ids.append(k)
        decls = [Characteristic(k) for k in ids]
    out = []
    for x in items:
        if isinstance(x, StudyEnvelope):
            out.append(x)
        elif isinstance(x, dict):
            out.append(parse_study(x, decls, allow_missing=allow_missing))
        else:
            raise ValidationError(f"cannot interpret {type(x).__name__} as a study envelope")
    return out


def check_min_studies(n: int, minimum: int = 2) -> None:
    if n < minimum:
        raise ValidationError(f"need >= {minimum} studies, got {n}")


def check_unit_fraction(value, name: str) -> Fraction:
    try:
        v = Fraction(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number or 'num/den', got {value!r}") from None
    if not 0 <= v <= 1:
        raise ValidationError(f"{name} must lie in [0, 1]")
    return v


def resolve_members(members, study_ids: Sequence[str]) -> list[int]:
    """Study ids or indices to indices."""
    index = {s: i for i, s in enumerate(study_ids)}
    out = []
    for m in members:
        if isinstance(m, str):
            if m not in index:
                raise ValidationError(f"unknown study {m!r}")
            out.append(index[m])
        else:
            i = int(m)
            if not 0 <= i < len(study_ids):
                raise ValidationError(f"study index {i} out of range")
            out.append(i)
    return out
