"""Self-contained result bundle.

The bundle echoes the (normalised) input and the configuration, so running
``overlapix report`` on a bundle reproduces it byte for byte. It carries no
timestamp and nothing that depends on the worker count.
"""

from __future__ import annotations

from .estimators import OverlapAnalyzer
from .io import BUNDLE_FORMAT, content_hash, envelope_file_dict, tool_info
from .rational import as_decimal_str, as_fraction_str

# Expanded overlap-free combinations are listed up to this many.
MAX_LISTED = 10_000


def analysis_config(analyzer: OverlapAnalyzer) -> dict:
    partition = analyzer.partition
    if isinstance(partition, dict):
        partition = {k: [list(b) for b in v] for k, v in partition.items()}
    return {
        "partition": partition,
        "missing": analyzer.missing,
        "criterion": analyzer.criterion,
        "min_studies": analyzer.min_studies,
        "min_potential": as_fraction_str(analyzer.min_potential),
        "top_k": analyzer.top_k,
        "max_subset_size": analyzer.max_subset_size,
    }


def build_bundle(analyzer: OverlapAnalyzer) -> dict:
    enc = analyzer.encoded_
    ids = list(enc.study_ids)
    echo = envelope_file_dict(analyzer.envelopes_, analyzer.encoder_.characteristics_)
    config = analysis_config(analyzer)
    ranking = analyzer.ranking_
    return {
        "format": BUNDLE_FORMAT,
        "bundle_version": 1,
        "tool": tool_info(),
        "config": config,
        "config_hash": content_hash({"config": config, "input": echo}),
        "input": echo,
        "partition": analyzer.encoder_.partition_.to_dict(),
        "encoding": enc.to_dict(),
        "pairwise": {
            "studies": ids,
            "matrix": [[as_fraction_str(v) for v in row] for row in analyzer.pairwise_],
        },
        "top_combinations": None
        if ranking is None
        else {
            "truncated": ranking.truncated,
            "items": [r.to_dict(enc) for r in ranking],
        },
        "overlap_free": family_dict(analyzer),
        "selection": selection_dict(analyzer),
        "bound": analyzer.bound_.to_dict(ids),
        "naive_pooled_size": analyzer.bound_.naive_total,
    }


def family_dict(analyzer: OverlapAnalyzer, limit: int = MAX_LISTED) -> dict:
    """The overlap-free family in compact form, expanded when small enough."""
    enc = analyzer.encoded_
    fam = analyzer.overlap_free_
    sizes = enc.sample_sizes

    def ids(subset):
        return list(subset.labels(enc))

    out = {
        "count": fam.count,
        "compact": [
            {
                "classes": [ids(c) for c in entry],
                "max_pooled_size": sum(max(sizes[i] for i in c.members) for c in entry),
            }
            for entry in fam.compact
        ],
        "listed": fam.count <= limit,
    }
    if fam.count <= limit:
        out["members"] = [
            {"studies": ids(s), "pooled_size": sum(sizes[i] for i in s.members)} for s in fam
        ]
    return out


def selection_dict(analyzer: OverlapAnalyzer) -> dict:
    enc = analyzer.encoded_
    sel = analyzer.selection_
    scores = {}
    for name, value in zip(sel.criterion, sel.scores):
        scores[name] = value if isinstance(value, int) else float(value)
    return {
        "studies": list(sel.subset.labels(enc)),
        "criterion": ",".join(sel.criterion),
        "scores": scores,
        "pooled_size": sel.pooled_size,
        "tied": sel.tied,
        "n_ties": sel.n_ties,
        "ties": [list(t.labels(enc)) for t in sel.ties] if sel.tied else [],
    }


def overlap_free_dict(analyzer: OverlapAnalyzer) -> dict:
    enc = analyzer.encoded_
    return {
        "overlap_free": family_dict(analyzer),
        "selection": selection_dict(analyzer),
        "naive_pooled_size": sum(enc.sample_sizes),
    }


def bound_summary(analyzer: OverlapAnalyzer) -> str:
    b = analyzer.bound_
    return (
        f"naive pooled size {b.naive_total}, lower-bound proxy {b.display()}"
        f" ({as_fraction_str(b.lower_bound_proxy)}), deductions {as_decimal_str(b.total_deduction, 2)}"
    )
