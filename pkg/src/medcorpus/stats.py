"""Educational-score distribution reports, overall and by label group.

Counts are exact; shares are emitted at full float precision; mean and
median are computed as exact rationals and rendered to two decimals.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .annotation import Annotation, DocumentType, DomainLabel
from .errors import EmptyInput

GROUP_MODES = ("none", "doc_type", "domain")

_GROUP_ORDER = {
    "none": ("all",),
    "doc_type": tuple(t.value for t in DocumentType),
    "domain": tuple(d.value for d in DomainLabel),
}


@dataclass
class ScoreDistribution:
    group_key: str
    counts: dict[int, int]
    share: dict[int, float]
    mean: Fraction
    median: Fraction

    @property
    def population(self) -> int:
        return sum(self.counts.values())


def _two_decimals(value: Fraction) -> str:
    return str((Decimal(value.numerator) / Decimal(value.denominator)).quantize(Decimal("0.01"), ROUND_HALF_EVEN))


def _distribution(group_key: str, scores: list[int]) -> ScoreDistribution:
    counts = Counter(scores)
    n = len(scores)
    ordered = sorted(scores)
    if n % 2:
        median = Fraction(ordered[n // 2])
    else:
        median = Fraction(ordered[n // 2 - 1] + ordered[n // 2], 2)
    return ScoreDistribution(
        group_key=group_key,
        counts={s: counts.get(s, 0) for s in range(1, 6) if counts.get(s, 0)},
        share={s: counts[s] / n for s in sorted(counts)},
        mean=Fraction(sum(scores), n),
        median=median,
    )


def score_distribution(annotations: Iterable[Annotation], group_by: str = "none") -> list[ScoreDistribution]:
    """One ScoreDistribution per non-empty group, in taxonomy order."""
    if group_by not in GROUP_MODES:
        raise ValueError(f"group_by must be one of {GROUP_MODES}")
    groups: dict[str, list[int]] = {}
    total = 0
    for ann in annotations:
        total += 1
        if group_by == "none":
            key = "all"
        elif group_by == "doc_type":
            key = ann.doc_type.value
        else:
            key = ann.domain.value
        groups.setdefault(key, []).append(ann.edu_score)
    if total == 0:
        raise EmptyInput("no annotations to report on")
    return [_distribution(key, groups[key]) for key in _GROUP_ORDER[group_by] if key in groups]


def report_record(distributions: list[ScoreDistribution], group_by: str) -> dict:
    return {
        "group_by": group_by,
        "groups": [
            {
                "group_key": d.group_key,
                "population": d.population,
                "counts": {str(s): c for s, c in sorted(d.counts.items())},
                "share": {str(s): v for s, v in sorted(d.share.items())},
                "mean": _two_decimals(d.mean),
                "median": _two_decimals(d.median),
            }
            for d in distributions
        ],
    }


def render_table(distributions: list[ScoreDistribution]) -> str:
    """Aligned plain-text table; shares rendered as one-decimal percentages."""
    header = f"{'group':<16}{'n':>8}" + "".join(f"{f'score {s}':>10}" for s in range(1, 6)) + f"{'mean':>8}{'median':>8}"
    rows = [header, "-" * len(header)]
    for d in distributions:
        cells = "".join(f"{d.share.get(s, 0.0) * 100:>9.1f}%" for s in range(1, 6))
        rows.append(
            f"{d.group_key:<16}{d.population:>8}" + cells + f"{_two_decimals(d.mean):>8}{_two_decimals(d.median):>8}"
        )
    return "\n".join(rows)


def write_report(
    annotations: Iterable[Annotation],
    group_by: str,
    output_path: str | Path,
    plot_dir: str | Path | None = None,
) -> dict:
    distributions = score_distribution(annotations, group_by)
    record = report_record(distributions, group_by)
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(record, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    if plot_dir is not None:
        plot_histograms(distributions, plot_dir, group_by)
    return record


def plot_histograms(distributions: list[ScoreDistribution], plot_dir: str | Path, group_by: str) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(plot_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for d in distributions:
        fig, ax = plt.subplots(figsize=(4, 3))
        scores = list(range(1, 6))
        ax.bar(scores, [d.share.get(s, 0.0) for s in scores], color="#4878a8")
        ax.set_xticks(scores)
        ax.set_xlabel("educational score")
        ax.set_ylabel("share")
        ax.set_title(f"{group_by}: {d.group_key} (n={d.population})")
        fig.tight_layout()
        path = out_dir / f"scores_{group_by}_{d.group_key}.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
