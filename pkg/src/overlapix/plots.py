"""Heat map and grid plot as hand-written SVG.

Output is a pure function of the inputs (integer coordinates, colours from
exact rationals) so files can be compared byte for byte.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .io import write_text
from .potential import CombinationReport
from .rational import as_decimal_str, as_fraction_str

LOW = (247, 251, 255)
HIGH = (8, 48, 107)
FONT = 'font-family="Helvetica,Arial,sans-serif"'


def color(value: Fraction) -> str:
    """Linear blend from LOW (0) to HIGH (1)."""
    v = min(max(Fraction(value), Fraction(0)), Fraction(1))
    rgb = (round(lo + (hi - lo) * v) for lo, hi in zip(LOW, HIGH))
    return "#" + "".join(f"{c:02x}" for c in rgb)


def _text_color(value: Fraction) -> str:
    return "#ffffff" if value > Fraction(1, 2) else "#000000"


def _label(value: Fraction) -> str:
    value = Fraction(value)
    return str(value.numerator) if value.denominator == 1 else as_fraction_str(value)


def heatmap_svg(matrix: Sequence[Sequence[Fraction]], labels: Sequence[str], title: str | None = None) -> str:
    n = len(labels)
    cell = 56
    left = 16 + 7 * max((len(s) for s in labels), default=1)
    top = 40 + 7 * max((len(s) for s in labels), default=1)
    legend_w = 90
    width = left + n * cell + legend_w
    height = top + n * cell + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        f' viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{left}" y="20" {FONT} font-size="14">'
        f"{escape(title or 'Pairwise overlap potential')}</text>",
    ]
    for j, lab in enumerate(labels):
        x = left + j * cell + cell // 2
        out.append(
            f'<text x="{x}" y="{top - 6}" {FONT} font-size="12" text-anchor="start"'
            f' transform="rotate(-60 {x} {top - 6})">{escape(lab)}</text>'
        )
    for i, lab in enumerate(labels):
        y = top + i * cell + cell // 2 + 4
        out.append(
            f'<text x="{left - 6}" y="{y}" {FONT} font-size="12" text-anchor="end">{escape(lab)}</text>'
        )
        for j in range(n):
            v = Fraction(matrix[i][j])
            x0, y0 = left + j * cell, top + i * cell
            out.append(
                f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="{color(v)}"'
                f' stroke="#cccccc" stroke-width="1"><title>{escape(labels[i])} x {escape(labels[j])}:'
                f" {_label(v)}</title></rect>"
            )
            out.append(
                f'<text x="{x0 + cell // 2}" y="{y0 + cell // 2 + 4}" {FONT} font-size="12"'
                f' text-anchor="middle" fill="{_text_color(v)}">{_label(v)}</text>'
            )
    lx = left + n * cell + 24
    steps = 10
    bar_h = max(n * cell, 100)
    for s in range(steps):
        v = Fraction(steps - 1 - s, steps - 1)
        y0 = top + s * bar_h // steps
        y1 = top + (s + 1) * bar_h // steps
        out.append(f'<rect x="{lx}" y="{y0}" width="16" height="{y1 - y0}" fill="{color(v)}"/>')
    out.append(f'<text x="{lx + 22}" y="{top + 10}" {FONT} font-size="11">1</text>')
    out.append(f'<text x="{lx + 22}" y="{top + bar_h}" {FONT} font-size="11">0</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap_csv(matrix: Sequence[Sequence[Fraction]], labels: Sequence[str]) -> str:
    rows = ["study_i,study_j,num,den,decimal"]
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            v = Fraction(matrix[i][j])
            rows.append(
                f"{_csv_cell(a)},{_csv_cell(b)},{v.numerator},{v.denominator},{as_decimal_str(v)}"
            )
    return "\n".join(rows) + "\n"


def _csv_cell(s: str) -> str:
    if any(c in s for c in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def emit_heatmap(matrix, labels: Sequence[str], path) -> tuple[Path, Path]:
    """Write ``path`` (SVG) and a ``.csv`` sidecar next to it."""
    path = Path(path)
    sidecar = path.with_suffix(".csv")
    write_text(path, heatmap_svg(matrix, labels))
    write_text(sidecar, heatmap_csv(matrix, labels))
    return path, sidecar


def _visible(reports: Sequence[CombinationReport], top_k: int | None):
    shown = [r for r in reports if r.overall > 0]
    hidden = 0
    if top_k is not None and len(shown) > top_k:
        hidden = len(shown) - top_k
        shown = shown[:top_k]
    return shown, hidden


def _more_note(hidden: int, shown: int) -> str:
    if hidden:
        return f"{hidden} more combinations not shown"
    return f"more combinations exist beyond the first {shown}"


def gridplot_svg(
    reports: Sequence[CombinationReport],
    labels: Sequence[str],
    top_k: int | None = None,
    truncated: bool = False,
) -> str:
    shown, hidden = _visible(reports, top_k)
    more = hidden > 0 or truncated
    col = 40
    row = 26
    left = 16 + 7 * max((len(s) for s in labels), default=1)
    bar_top = 40
    bar_h = 120
    grid_top = bar_top + bar_h + 30
    width = max(left + len(shown) * col + 40, 360)
    height = grid_top + len(labels) * row + (40 if more else 16)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        f' viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{left}" y="20" {FONT} font-size="14">'
        "Study combinations by decreasing overlap potential</text>",
    ]
    if not shown:
        out.append(
            f'<text x="{left}" y="{bar_top + bar_h // 2}" {FONT} font-size="13" fill="#555555">'
            "No combination has a positive overlap potential.</text>"
        )
    for i, lab in enumerate(labels):
        y = grid_top + i * row + row // 2
        if i % 2 == 0:
            out.append(
                f'<rect x="{left}" y="{grid_top + i * row}" width="{max(len(shown) * col, 1)}"'
                f' height="{row}" fill="#f3f3f3"/>'
            )
        out.append(
            f'<text x="{left - 6}" y="{y + 4}" {FONT} font-size="12" text-anchor="end">{escape(lab)}</text>'
        )
    for c, rep in enumerate(shown):
        cx = left + c * col + col // 2
        h = round(bar_h * rep.overall)
        out.append(
            f'<rect x="{cx - 12}" y="{bar_top + bar_h - h}" width="24" height="{h}" fill="#3b6fb6">'
            f"<title>{escape(', '.join(labels[i] for i in rep.members))}: {_label(rep.overall)}</title></rect>"
        )
        out.append(
            f'<text x="{cx}" y="{bar_top + bar_h - h - 4}" {FONT} font-size="10"'
            f' text-anchor="middle">{_label(rep.overall)}</text>'
        )
        members = rep.members
        ys = [grid_top + i * row + row // 2 for i in members]
        if len(ys) > 1:
            out.append(
                f'<line x1="{cx}" y1="{min(ys)}" x2="{cx}" y2="{max(ys)}" stroke="#222222" stroke-width="3"/>'
            )
        for i in range(len(labels)):
            y = grid_top + i * row + row // 2
            fill = "#222222" if i in members else "#d0d0d0"
            out.append(f'<circle cx="{cx}" cy="{y}" r="7" fill="{fill}"/>')
    if more:
        note = _more_note(hidden, len(shown))
        out.append(
            f'<text x="{left}" y="{height - 14}" {FONT} font-size="12" fill="#aa0000">'
            f"... {escape(note)}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def gridplot_text(
    reports: Sequence[CombinationReport],
    labels: Sequence[str],
    top_k: int | None = None,
    truncated: bool = False,
) -> str:
    shown, hidden = _visible(reports, top_k)
    if not shown:
        return "No combination has a positive overlap potential.\n"
    width = max(len(s) for s in labels)
    values = [_label(r.overall) for r in shown]
    cw = max(len(v) for v in values) + 1
    lines = [" " * width + " " + "".join(v.rjust(cw) for v in values)]
    for i, lab in enumerate(labels):
        cells = "".join(("x" if i in r.members else ".").rjust(cw) for r in shown)
        lines.append(lab.ljust(width) + " " + cells)
    if hidden or truncated:
        lines.append(f"... {_more_note(hidden, len(shown))}")
    return "\n".join(lines) + "\n"


def emit_gridplot(
    reports: Sequence[CombinationReport],
    labels: Sequence[str],
    path,
    top_k: int | None = None,
    truncated: bool = False,
) -> tuple[Path, Path]:
    """Write ``path`` (SVG) and a ``.txt`` fallback next to it."""
    path = Path(path)
    fallback = path.with_suffix(".txt")
    write_text(path, gridplot_svg(reports, labels, top_k, truncated))
    write_text(fallback, gridplot_text(reports, labels, top_k, truncated))
    return path, fallback
