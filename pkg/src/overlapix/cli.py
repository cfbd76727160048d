"""Command line interface.

Exit codes: 0 success, 1 invalid input or usage, 2 internal error, 3 time
budget exceeded (see ``OVERLAPIX_TIME_BUDGET_SECS``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .budget import budget_from_env
from .bundle import bound_summary, build_bundle, overlap_free_dict
from .enumeration import EnumerationConfig, enumerate_potentials
from .estimators import EnvelopeEncoder, OverlapAnalyzer
from .exceptions import OverlapixError, SoundnessViolation, TimeBudgetExceeded, ValidationError
from .io import BUNDLE_FORMAT, dumps, ingest, resolve_partition, write_text
from .oracle import (
    GenerationConfig,
    SyntheticSynthesis,
    check_synthesis,
    generate,
    inclusion_exclusion_check,
    seeded_configs,
    soundness_sweep,
)
from .plots import emit_gridplot, emit_heatmap
from .rational import as_fraction_str
from .validation import check_min_studies, check_unit_fraction

log = logging.getLogger("overlapix")

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL, EXIT_BUDGET = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, *, input_file=True) -> None:
    if input_file:
        p.add_argument("input", help="envelope file (JSON or CSV), or a result bundle")
        p.add_argument("--format", choices=("json", "csv"), help="input format (default: by extension)")
        p.add_argument("--partition", default="singleton", help="singleton | width=N | file=PATH")
        p.add_argument("--missing", choices=("error", "full-range"), default="error")
    p.add_argument("--out", type=Path, help="directory for output files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    p.add_argument("--time-budget", type=float, help="seconds; default from OVERLAPIX_TIME_BUDGET_SECS")
    p.add_argument("-v", "--verbose", action="store_true")


def _generation_args(p):
    p.add_argument("--n-studies", type=int, default=6)
    p.add_argument("--collective-size", type=int, default=60)
    p.add_argument("--study-size", type=int, nargs=2, default=(2, 10), metavar=("LO", "HI"))
    p.add_argument("--domain-sizes", default="5,4", help="atoms per characteristic, comma separated")
    p.add_argument("--n-ordered", type=int, default=1)
    p.add_argument("--eligibility", type=float, default=0.5)
    p.add_argument("--overlap", type=float, default=0.5, help="overlap intensity in [0, 1]")
    p.add_argument("--padding", type=float, default=0.0)
    p.add_argument("--distortion", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="overlapix", description="Sample-overlap potential in evidence synthesis.")
    parser.add_argument("--version", action="version", version=f"overlapix {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("validate", help="check an envelope file")
    _common(p)
    p = sub.add_parser("encode", help="binary coverage encoding")
    _common(p)
    p = sub.add_parser("pairs", help="pairwise potential matrix and heat map")
    _common(p)
    p = sub.add_parser("potentials", help="combinations by decreasing potential")
    _common(p)
    p.add_argument("--top-k", type=int)
    p.add_argument("--min-potential", default="0")
    p.add_argument("--max-size", type=int)
    p = sub.add_parser("overlap-free", help="maximal overlap-free combinations and the selected one")
    _common(p)
    p.add_argument("--criterion", default="max-pooled-sample-size")
    p.add_argument("--min-studies", type=int, default=1)
    p = sub.add_parser("bound", help="lower-bound proxy of the deduplicated sample size")
    _common(p)
    p = sub.add_parser("report", help="full result bundle")
    _common(p)
    p.add_argument("--top-k", type=int, default=50)
    p.add_argument("--min-potential", default="0")
    p.add_argument("--max-size", type=int)
    p.add_argument("--criterion", default="max-pooled-sample-size")
    p.add_argument("--min-studies", type=int, default=1)

    p = sub.add_parser("oracle", help="synthetic ground-truth tools")
    osub = p.add_subparsers(dest="oracle_command", parser_class=_Parser, required=True)
    g = osub.add_parser("generate", help="draw a synthetic synthesis")
    _common(g, input_file=False)
    _generation_args(g)
    c = osub.add_parser("check", help="compare envelope-side results with the truth")
    c.add_argument("input", help="synthesis JSON written by 'oracle generate'")
    _common(c, input_file=False)
    c.add_argument("--partition", default="singleton")
    s = osub.add_parser("sweep", help="soundness sweep over seeded instances")
    _common(s, input_file=False)
    _generation_args(s)
    s.add_argument("--count", type=int, default=500)
    s.add_argument("--max-size", type=int)
    return parser


def _emit(args, name: str, payload) -> None:
    text = dumps(payload)
    if args.out is not None:
        write_text(args.out / name, text)
    sys.stdout.write(text)


def _load(args):
    envelopes, characteristics = ingest(args.input, args.format, missing=args.missing)
    return envelopes, characteristics


def _budget(args):
    return args.time_budget if args.time_budget is not None else budget_from_env()


def _analyzer_from_args(args, characteristics, **kw) -> OverlapAnalyzer:
    return OverlapAnalyzer(
        characteristics=list(characteristics),
        partition=resolve_partition(args.partition),
        missing=args.missing,
        n_jobs=args.threads,
        time_budget=_budget(args),
        **kw,
    )


def _bundle_config(path, fmt):
    """Config stored in a result bundle, or None for a plain envelope file."""
    if (fmt or "json") != "json" or str(path).lower().endswith(".csv"):
        return None
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None
    if isinstance(data, dict) and data.get("format") == BUNDLE_FORMAT:
        return data.get("config")
    return None


def cmd_validate(args):
    envelopes, characteristics = _load(args)
    enc = EnvelopeEncoder(characteristics, resolve_partition(args.partition), args.missing)
    if envelopes:
        enc.fit(envelopes)
        bins = ", ".join(f"{d.id}: {m} bins" for d, m in zip(enc.domains_, enc.n_bins_))
    else:
        bins = "no characteristics"
    print(f"ok: {len(envelopes)} studies; {bins}")
    return EXIT_OK


def cmd_encode(args):
    envelopes, characteristics = _load(args)
    check_min_studies(len(envelopes), 1)
    enc = EnvelopeEncoder(characteristics, resolve_partition(args.partition), args.missing).fit(envelopes)
    encoded = enc.encode(envelopes)
    payload = {"partition": enc.partition_.to_dict(), "encoding": encoded.to_dict(), "digest": encoded.digest()}
    _emit(args, "encoding.json", payload)
    return EXIT_OK


def cmd_pairs(args):
    envelopes, characteristics = _load(args)
    check_min_studies(len(envelopes))
    a = _analyzer_from_args(args, characteristics, rank_combinations=False)
    a.encoder_ = EnvelopeEncoder(a.characteristics, a.partition, a.missing).fit(envelopes)
    from .potential import pairwise_matrix

    encoded = a.encoder_.encode(envelopes)
    matrix = pairwise_matrix(encoded)
    ids = list(encoded.study_ids)
    payload = {"studies": ids, "matrix": [[as_fraction_str(v) for v in row] for row in matrix]}
    if args.out is not None:
        emit_heatmap(matrix, ids, args.out / "heatmap.svg")
    _emit(args, "pairs.json", payload)
    return EXIT_OK


def cmd_potentials(args):
    envelopes, characteristics = _load(args)
    check_min_studies(len(envelopes))
    enc = EnvelopeEncoder(characteristics, resolve_partition(args.partition), args.missing).fit(envelopes)
    encoded = enc.encode(envelopes)
    config = EnumerationConfig(
        check_unit_fraction(args.min_potential, "--min-potential"), args.top_k, args.max_size
    )
    ranking = enumerate_potentials(encoded, config, n_jobs=args.threads, budget=_budget(args))
    payload = {"truncated": ranking.truncated, "items": [r.to_dict(encoded) for r in ranking]}
    if args.out is not None:
        emit_gridplot(list(ranking), encoded.study_ids, args.out / "grid.svg", args.top_k, ranking.truncated)
    _emit(args, "potentials.json", payload)
    return EXIT_OK


def cmd_overlap_free(args):
    envelopes, characteristics = _load(args)
    a = _analyzer_from_args(
        args, characteristics, criterion=args.criterion, min_studies=args.min_studies,
        rank_combinations=False,
    ).fit(envelopes)
    _emit(args, "overlap_free.json", overlap_free_dict(a))
    return EXIT_OK


def cmd_bound(args):
    envelopes, characteristics = _load(args)
    a = _analyzer_from_args(args, characteristics, rank_combinations=False).fit(envelopes)
    log.info(bound_summary(a))
    _emit(args, "bound.json", a.bound_.to_dict(list(a.study_ids_)))
    return EXIT_OK


def cmd_report(args):
    stored = _bundle_config(args.input, args.format)
    envelopes, characteristics = _load(args)
    kw = dict(
        criterion=args.criterion,
        min_studies=args.min_studies,
        min_potential=check_unit_fraction(args.min_potential, "--min-potential"),
        top_k=args.top_k,
        max_subset_size=args.max_size,
    )
    partition = resolve_partition(args.partition)
    if stored is not None:
        kw.update(
            criterion=stored["criterion"],
            min_studies=stored["min_studies"],
            min_potential=check_unit_fraction(stored["min_potential"], "min_potential"),
            top_k=stored["top_k"],
            max_subset_size=stored["max_subset_size"],
        )
        partition = stored["partition"]
    a = OverlapAnalyzer(
        characteristics=list(characteristics),
        partition=partition,
        missing=stored["missing"] if stored else args.missing,
        n_jobs=args.threads,
        time_budget=_budget(args),
        **kw,
    ).fit(envelopes)
    bundle = build_bundle(a)
    if args.out is not None:
        ids = list(a.study_ids_)
        emit_heatmap(a.pairwise_, ids, args.out / "heatmap.svg")
        emit_gridplot(list(a.ranking_), ids, args.out / "grid.svg", a.top_k, a.ranking_.truncated)
    _emit(args, "bundle.json", bundle)
    return EXIT_OK


def _generation_config(args, seed=None) -> GenerationConfig:
    try:
        sizes = tuple(int(x) for x in args.domain_sizes.split(",") if x.strip())
    except ValueError:
        raise ValidationError("--domain-sizes must be comma-separated integers") from None
    return GenerationConfig(
        n_studies=args.n_studies,
        collective_size=args.collective_size,
        study_size=tuple(args.study_size),
        domain_sizes=sizes,
        n_ordered=min(args.n_ordered, len(sizes)),
        eligibility=args.eligibility,
        overlap_intensity=args.overlap,
        padding=args.padding,
        distortion=args.distortion,
        seed=args.seed if seed is None else seed,
    )


def cmd_oracle(args):
    if args.oracle_command == "generate":
        synth = generate(_generation_config(args))
        if args.out is not None:
            from .io import envelope_file_dict

            write_text(
                args.out / "envelopes.json",
                dumps(envelope_file_dict(synth.envelopes, synth.characteristics)),
            )
        _emit(args, "synthesis.json", synth.to_dict())
        return EXIT_OK
    if args.oracle_command == "check":
        try:
            data = json.loads(Path(args.input).read_text(encoding="utf-8"))
            synth = SyntheticSynthesis.from_dict(data)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"cannot read synthesis {args.input}: {exc}") from None
        report = check_synthesis(synth, partition_scheme=resolve_partition(args.partition))
        ie = inclusion_exclusion_check(synth)
        _emit(
            args,
            "check.json",
            {
                "soundness": report.to_dict(),
                "inclusion_exclusion": {
                    "union": ie.union,
                    "identity_holds": ie.identity_holds,
                    "pair_truncation": ie.pair_truncation,
                    "pair_truncation_holds": ie.pair_truncation_holds,
                    "pi_form": as_fraction_str(ie.pi_form),
                    "pi_form_holds": ie.pi_form_holds,
                },
            },
        )
        return EXIT_OK
    base = _generation_config(args)
    report = soundness_sweep(
        seeded_configs(base, args.count, args.seed), max_subset_size=args.max_size, n_jobs=args.threads
    )
    _emit(args, "sweep.json", report.to_dict())
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "encode": cmd_encode,
    "pairs": cmd_pairs,
    "potentials": cmd_potentials,
    "overlap-free": cmd_overlap_free,
    "bound": cmd_bound,
    "report": cmd_report,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="overlapix: %(levelname)s: %(message)s",
    )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](args)
    except TimeBudgetExceeded as exc:
        print(f"overlapix: time budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SoundnessViolation as exc:
        print(f"overlapix: soundness violation: {exc}", file=sys.stderr)
        if exc.instance is not None:
            out = getattr(args, "out", None)
            if out is not None:
                write_text(out / "violation.json", dumps(exc.instance))
                print(f"overlapix: instance written to {out / 'violation.json'}", file=sys.stderr)
            else:
                sys.stderr.write(dumps(exc.instance))
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"overlapix: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OverlapixError as exc:
        print(f"overlapix: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"overlapix: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"overlapix: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
