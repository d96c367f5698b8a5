"""Result statistics: box plots with a two-class outlier rule, grouped
aggregation, audiogram summaries, questionnaire tallies, and plot-geometry
export.

Quartiles use linear interpolation between order statistics at position
(n - 1) * p on the sorted sample.  Whiskers end at actual data points
within 1.5 IQR of the quartiles; values beyond that are outliers, split at
3 IQR into a near class (crosses) and a far class (circles).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .session import TrialResult

GROUPINGS = ("by-item", "by-listener", "by-de-method", "by-prod-type", "all")

Q0_OPTIONS = ("Excellent", "Good", "Average", "Moderate", "Poor")
Q5_OPTIONS = ("Every day", "At least once a week", "At least once a month", "Never")

RESULTS_HEADER = (
    "pid,item_number,item_label,de_method,prod_type,chosen_offset_lu,"
    "chosen_ld_lu,satisfaction_value,satisfaction_label,valid"
)
AUDIOGRAM_HEADER = "pid,frequency_hz,left_dbhl,right_dbhl"
QUESTIONNAIRE_HEADER = "pid,q0,q1,q2,q3,q4,q5,q6"


class EmptyInput(Exception):
    pass


class EmptyGroup(Exception):
    pass


class FrequencyMismatch(Exception):
    pass


class MalformedRow(Exception):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class BoxStats:
    n: int
    mean: float
    q1: float
    median: float
    q3: float
    iqr: float
    whisker_lo: float
    whisker_hi: float
    outliers_near: tuple[float, ...]
    outliers_far: tuple[float, ...]


def _quantile(sorted_values: Sequence[float], p: float) -> float:
    # position (n-1)*p, linear interpolation between the two order statistics
    pos = (len(sorted_values) - 1) * p
    lo = math.floor(pos)
    hi = math.ceil(pos)
    frac = pos - lo
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo])


def box_stats(values: Iterable[float]) -> BoxStats:
    data = [float(v) for v in values]
    if not data:
        raise EmptyInput("box_stats needs at least one value")
    s = sorted(data)
    q1 = _quantile(s, 0.25)
    median = _quantile(s, 0.50)
    q3 = _quantile(s, 0.75)
    iqr = q3 - q1
    within = [v for v in s if q1 - 1.5 * iqr <= v <= q3 + 1.5 * iqr]
    near = []
    far = []
    for v in s:
        d = q1 - v if v < q1 else v - q3 if v > q3 else 0.0
        if d > 3 * iqr:
            far.append(v)
        elif d > 1.5 * iqr:
            near.append(v)
    return BoxStats(
        n=len(s),
        mean=math.fsum(s) / len(s),
        q1=q1,
        median=median,
        q3=q3,
        iqr=iqr,
        whisker_lo=within[0],
        whisker_hi=within[-1],
        outliers_near=tuple(near),
        outliers_far=tuple(far),
    )


@dataclass(frozen=True)
class GroupStats:
    n: int
    ld: BoxStats
    satisfaction: BoxStats


@dataclass(frozen=True)
class AggregateResult:
    grouping: str
    groups: dict[str, GroupStats]
    # only for the "all" grouping: figure mean lines and the default-LD mean
    extras: dict | None = None


def _group_key(result: TrialResult, grouping: str) -> str:
    if grouping == "by-item":
        return f"{result.item_number:02d}-{result.item_label}-{result.de_method}"
    if grouping == "by-listener":
        return result.pid
    if grouping == "by-de-method":
        return result.de_method
    if grouping == "by-prod-type":
        return result.prod_type
    return "all"


def aggregate(
    results: Sequence[TrialResult],
    grouping: str,
    *,
    filter_validity: bool = True,
) -> AggregateResult:
    """Box stats over chosen LD and satisfaction per group.  Invalid trials
    (and over-threshold participants) are dropped first unless disabled."""
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}")
    kept = validity_filter(results)[0] if filter_validity else list(results)
    if not kept:
        raise EmptyGroup("no results left after validity filtering")
    buckets: dict[str, list[TrialResult]] = {}
    for r in kept:
        buckets.setdefault(_group_key(r, grouping), []).append(r)
    groups = {
        key: GroupStats(
            n=len(rs),
            ld=box_stats(r.chosen_ld for r in rs),
            satisfaction=box_stats(r.satisfaction_value for r in rs),
        )
        for key, rs in sorted(buckets.items())
    }
    extras = None
    if grouping == "all":
        stats = groups["all"]
        defaults: dict[str, list[float]] = {}
        for r in kept:
            defaults.setdefault(r.item_label, []).append(r.chosen_ld + r.chosen_offset)
        per_item = [math.fsum(v) / len(v) for _, v in sorted(defaults.items())]
        extras = {
            "mean_chosen_ld": stats.ld.mean,
            "mean_satisfaction": stats.satisfaction.mean,
            "mean_default_ld": math.fsum(per_item) / len(per_item),
        }
    return AggregateResult(grouping=grouping, groups=groups, extras=extras)


def validity_filter(
    results: Sequence[TrialResult],
    *,
    participant_threshold: float = 0.5,
) -> tuple[list[TrialResult], list[TrialResult]]:
    """Partition into (valid, discarded).  A participant whose invalid share
    exceeds the threshold is discarded wholesale, valid trials included."""
    per_pid: dict[str, list[bool]] = {}
    for r in results:
        per_pid.setdefault(r.pid, []).append(r.valid)
    dropped_pids = {
        pid for pid, flags in per_pid.items()
        if flags.count(False) / len(flags) > participant_threshold
    }
    valid = [r for r in results if r.valid and r.pid not in dropped_pids]
    discarded = [r for r in results if not r.valid or r.pid in dropped_pids]
    return valid, discarded


@dataclass(frozen=True)
class Audiogram:
    participant_id: str
    frequencies: tuple[float, ...]
    left: tuple[float, ...]
    right: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.frequencies) == len(self.left) == len(self.right)):
            raise ValueError("frequency and threshold lists must align")
        if any(b <= a for a, b in zip(self.frequencies, self.frequencies[1:])):
            raise ValueError("frequencies must be strictly ascending")
        if not all(map(math.isfinite, (*self.left, *self.right))):
            raise ValueError("thresholds must be finite")

    def better_ear(self) -> tuple[float, ...]:
        # lower threshold = better hearing at that frequency
        return tuple(min(l, r) for l, r in zip(self.left, self.right))


@dataclass(frozen=True)
class AudiogramSummary:
    frequencies: tuple[float, ...]
    mean_better_ear: tuple[float, ...]
    lower_envelope: tuple[float, ...]
    upper_envelope: tuple[float, ...]


def audiogram_summary(audiograms: Sequence[Audiogram]) -> AudiogramSummary:
    if not audiograms:
        raise EmptyInput("no audiograms")
    freqs = audiograms[0].frequencies
    for a in audiograms[1:]:
        if a.frequencies != freqs:
            raise FrequencyMismatch(
                f"{a.participant_id} measured at {a.frequencies}, expected {freqs}"
            )
    curves = [a.better_ear() for a in audiograms]
    by_freq = list(zip(*curves))
    return AudiogramSummary(
        frequencies=freqs,
        mean_better_ear=tuple(math.fsum(col) / len(col) for col in by_freq),
        lower_envelope=tuple(min(col) for col in by_freq),
        upper_envelope=tuple(max(col) for col in by_freq),
    )


@dataclass(frozen=True)
class QuestionnaireResponse:
    participant_id: str
    q0: str
    q1: str = ""
    q2: str = ""
    q3: str = ""
    q4: str = ""
    q5: str = "Never"
    q6: str = ""

    def __post_init__(self):
        if self.q0 not in Q0_OPTIONS:
            raise ValueError(f"q0 must be one of {Q0_OPTIONS}, got {self.q0!r}")
        if self.q5 not in Q5_OPTIONS:
            raise ValueError(f"q5 must be one of {Q5_OPTIONS}, got {self.q5!r}")


@dataclass(frozen=True)
class QuestionnaireTally:
    n: int
    q0_counts: dict[str, int]
    q5_counts: dict[str, int]
    problem_share: float | None


def questionnaire_tally(responses: Sequence[QuestionnaireResponse]) -> QuestionnaireTally:
    q0 = {opt: 0 for opt in Q0_OPTIONS}
    q5 = {opt: 0 for opt in Q5_OPTIONS}
    for r in responses:
        q0[r.q0] += 1
        q5[r.q5] += 1
    n = len(responses)
    share = None if n == 0 else 1.0 - q5["Never"] / n
    return QuestionnaireTally(n=n, q0_counts=q0, q5_counts=q5, problem_share=share)


# --- plot geometry ----------------------------------------------------------

def export_plot_data(
    stats: AggregateResult,
    layout: str,
    references: Sequence[dict] | None = None,
) -> dict:
    """Declarative box-plot geometry: boxes[], markers[], lines[].

    ``layout`` selects the value axis: "ld-figure" plots chosen LD,
    "satisfaction-figure" the satisfaction value.  ``references`` are extra
    horizontal lines, each {"name", "y", "style"} with style solid|dashed.
    """
    if layout not in ("ld-figure", "satisfaction-figure"):
        raise ValueError(f"unknown layout {layout!r}")
    pick = (lambda g: g.ld) if layout == "ld-figure" else (lambda g: g.satisfaction)
    boxes = []
    markers = []
    for x, (key, group) in enumerate(stats.groups.items()):
        b = pick(group)
        boxes.append(
            {
                "group": key,
                "x": x,
                "n": b.n,
                "q1": round(b.q1, 6),
                "median": round(b.median, 6),
                "q3": round(b.q3, 6),
                "whisker_lo": round(b.whisker_lo, 6),
                "whisker_hi": round(b.whisker_hi, 6),
                "mean": round(b.mean, 6),
            }
        )
        for cls, glyph, values in (
            ("near", "cross", b.outliers_near),
            ("far", "circle", b.outliers_far),
        ):
            markers.extend(
                {"group": key, "x": x, "y": round(v, 6), "class": cls, "glyph": glyph}
                for v in values
            )
    lines = [dict(r) for r in references or ()]
    if stats.extras is not None:
        mean_key = "mean_chosen_ld" if layout == "ld-figure" else "mean_satisfaction"
        lines.append({"name": "mean", "y": round(stats.extras[mean_key], 6), "style": "solid"})
        if layout == "ld-figure":
            lines.append(
                {"name": "default-ld", "y": round(stats.extras["mean_default_ld"], 6), "style": "dashed"}
            )
    return {"layout": layout, "boxes": boxes, "markers": markers, "lines": lines}


def audiogram_plot_data(summary: AudiogramSummary) -> dict:
    """Threshold curves as polyline elements over a log-spaced frequency axis."""

    def curve(name, values, style):
        return {
            "name": name,
            "style": style,
            "points": [[f, round(v, 6)] for f, v in zip(summary.frequencies, values)],
        }

    return {
        "layout": "audiogram-figure",
        "boxes": [],
        "markers": [],
        "lines": [
            curve("mean-better-ear", summary.mean_better_ear, "solid"),
            curve("lower-envelope", summary.lower_envelope, "dashed"),
            curve("upper-envelope", summary.upper_envelope, "dashed"),
        ],
    }


def questionnaire_plot_data(tally: QuestionnaireTally) -> dict:
    """Two bar groups (q0, q5) encoded as value bars in boxes[]."""
    boxes = []
    x = 0
    for question, counts in (("q0", tally.q0_counts), ("q5", tally.q5_counts)):
        for option, count in counts.items():
            boxes.append({"group": f"{question}:{option}", "x": x, "value": count})
            x += 1
    lines = []
    if tally.problem_share is not None:
        lines.append({"name": "problem-share", "y": round(tally.problem_share, 6), "style": "solid"})
    return {"layout": "questionnaire-figure", "boxes": boxes, "markers": [], "lines": lines}


def render_svg(doc: dict, *, width: int = 720, height: int = 420) -> str:
    """Direct projection of a geometry document; nothing is computed here
    beyond coordinate mapping."""
    pad = 50.0
    layout = doc["layout"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]

    ys: list[float] = []
    xs: list[float] = []
    for b in doc["boxes"]:
        if "q1" in b:
            ys.extend((b["whisker_lo"], b["whisker_hi"]))
        else:
            ys.extend((0.0, b["value"]))
        xs.append(b["x"])
    for m in doc["markers"]:
        ys.append(m["y"])
        xs.append(m["x"])
    for ln in doc["lines"]:
        if "y" in ln:
            ys.append(ln["y"])
        else:
            ys.extend(p[1] for p in ln["points"])
            xs.extend(math.log10(p[0]) for p in ln["points"])
    if not ys:
        parts.append("</svg>")
        return "\n".join(parts)
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def sx(x):
        return pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def sy(y):
        # dBHL plots grow downward, matching audiological convention
        if layout == "audiogram-figure":
            return pad + (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad)
        return height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    half = max(6.0, (width - 2 * pad) / max(len(doc["boxes"]), 1) * 0.3)
    for b in doc["boxes"]:
        cx = sx(b["x"])
        if "q1" in b:
            top, bot = sy(b["q3"]), sy(b["q1"])
            parts.append(
                f'<rect x="{cx - half:.1f}" y="{top:.1f}" width="{2 * half:.1f}" '
                f'height="{bot - top:.1f}" fill="none" stroke="black"/>'
            )
            for y in (b["median"],):
                parts.append(
                    f'<line x1="{cx - half:.1f}" y1="{sy(y):.1f}" x2="{cx + half:.1f}" '
                    f'y2="{sy(y):.1f}" stroke="black" stroke-width="2"/>'
                )
            for w, q in ((b["whisker_lo"], b["q1"]), (b["whisker_hi"], b["q3"])):
                parts.append(
                    f'<line x1="{cx:.1f}" y1="{sy(q):.1f}" x2="{cx:.1f}" '
                    f'y2="{sy(w):.1f}" stroke="black"/>'
                )
        else:
            y0, y1 = sy(0.0), sy(b["value"])
            parts.append(
                f'<rect x="{cx - half:.1f}" y="{min(y0, y1):.1f}" width="{2 * half:.1f}" '
                f'height="{abs(y0 - y1):.1f}" fill="lightgray" stroke="black"/>'
            )
    for m in doc["markers"]:
        cx, cy = sx(m["x"]), sy(m["y"])
        if m["glyph"] == "cross":
            parts.append(
                f'<path d="M {cx - 4:.1f} {cy - 4:.1f} L {cx + 4:.1f} {cy + 4:.1f} '
                f'M {cx - 4:.1f} {cy + 4:.1f} L {cx + 4:.1f} {cy - 4:.1f}" stroke="black"/>'
            )
        else:
            parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="4" fill="none" stroke="black"/>')
    for ln in doc["lines"]:
        dash = ' stroke-dasharray="6 4"' if ln.get("style") == "dashed" else ""
        if "y" in ln:
            y = sy(ln["y"])
            parts.append(
                f'<line x1="{pad:.1f}" y1="{y:.1f}" x2="{width - pad:.1f}" y2="{y:.1f}" '
                f'stroke="gray"{dash}/>'
            )
            parts.append(
                f'<text x="{width - pad + 4:.1f}" y="{y:.1f}" font-size="10">{ln["name"]}</text>'
            )
        else:
            pts = " ".join(f"{sx(math.log10(x)):.1f},{sy(y):.1f}" for x, y in ln["points"])
            parts.append(f'<polyline points="{pts}" fill="none" stroke="black"{dash}/>')
    parts.append("</svg>")
    return "\n".join(parts)


# --- CSV interchange --------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{round(v + 0.0, 6):g}"


def result_csv_row(r: TrialResult) -> str:
    buf = io.StringIO()
    csv.writer(buf).writerow(
        [
            r.pid,
            r.item_number,
            r.item_label,
            r.de_method,
            r.prod_type,
            _fmt(r.chosen_offset),
            _fmt(r.chosen_ld),
            r.satisfaction_value,
            r.satisfaction_label,
            "true" if r.valid else "false",
        ]
    )
    return buf.getvalue().rstrip("\r\n")


def write_results_csv(path, results: Sequence[TrialResult]) -> None:
    with open(path, "w", newline="") as fp:
        fp.write(RESULTS_HEADER + "\n")
        for r in results:
            fp.write(result_csv_row(r) + "\n")


def read_results_csv(path) -> list[TrialResult]:
    path = Path(path)
    results = []
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None or ",".join(header) != RESULTS_HEADER:
            raise MalformedRow(1, f"expected header {RESULTS_HEADER!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 10:
                raise MalformedRow(line_no, f"expected 10 fields, got {len(row)}")
            try:
                results.append(
                    TrialResult(
                        pid=row[0],
                        item_number=int(row[1]),
                        item_id=f"{row[2]}-{row[3]}".lower(),
                        item_label=row[2],
                        de_method=row[3],
                        prod_type=row[4],
                        chosen_offset=float(row[5]),
                        chosen_ld=float(row[6]),
                        satisfaction_value=int(row[7]),
                        satisfaction_label=row[8],
                        valid={"true": True, "false": False}[row[9]],
                    )
                )
            except (ValueError, KeyError) as exc:
                raise MalformedRow(line_no, str(exc)) from exc
    return results


def read_audiograms_csv(path) -> list[Audiogram]:
    rows: dict[str, list[tuple[float, float, float]]] = {}
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None or ",".join(header) != AUDIOGRAM_HEADER:
            raise MalformedRow(1, f"expected header {AUDIOGRAM_HEADER!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.setdefault(row[0], []).append(
                    (float(row[1]), float(row[2]), float(row[3]))
                )
            except (IndexError, ValueError) as exc:
                raise MalformedRow(line_no, str(exc)) from exc
    out = []
    for pid, triples in rows.items():
        triples.sort()
        out.append(
            Audiogram(
                participant_id=pid,
                frequencies=tuple(t[0] for t in triples),
                left=tuple(t[1] for t in triples),
                right=tuple(t[2] for t in triples),
            )
        )
    return out


def read_questionnaires_csv(path) -> list[QuestionnaireResponse]:
    out = []
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None or ",".join(header) != QUESTIONNAIRE_HEADER:
            raise MalformedRow(1, f"expected header {QUESTIONNAIRE_HEADER!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 8:
                raise MalformedRow(line_no, f"expected 8 fields, got {len(row)}")
            try:
                out.append(QuestionnaireResponse(row[0], *row[1:]))
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from exc
    return out
