import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

RATIO_FIELDS = ('idf1', 'idp', 'idr', 'precision', 'recall', 'ap')
COUNT_FIELDS = ('idtp', 'idfp', 'idfn', 'tp', 'fp', 'fn')


@dataclass(frozen=True)
class EvalReport:
    idf1: Optional[float] = None
    idp: Optional[float] = None
    idr: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    ap: Optional[float] = None
    idtp: Optional[int] = None
    idfp: Optional[int] = None
    idfn: Optional[int] = None
    tp: Optional[int] = None
    fp: Optional[int] = None
    fn: Optional[int] = None


def identity_scores(idtp, idfp, idfn) -> Tuple[float, float, float]:
    """(IDF1, IDP, IDR); nothing to score on either side counts as perfect."""
    if idtp + idfp + idfn == 0:
        return 1.0, 1.0, 1.0
    idp = idtp / (idtp + idfp) if idtp + idfp else 0.0
    idr = idtp / (idtp + idfn) if idtp + idfn else 0.0
    idf1 = 2 * idtp / (2 * idtp + idfp + idfn)
    return idf1, idp, idr


def average_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Mean of each ratio over cameras, sum of each count; values a camera
    does not report are skipped."""
    values = {}
    for name in RATIO_FIELDS + COUNT_FIELDS:
        present = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not present:
            values[name] = None
        elif name in RATIO_FIELDS:
            values[name] = sum(present) / len(present)
        else:
            values[name] = sum(present)
    return EvalReport(**values)


def _format(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_key_values(report: EvalReport, prefix='') -> str:
    lines = []
    for name, value in asdict(report).items():
        if value is None:
            continue
        lines.append(f"{prefix}{name} = {_format(value)}")
    return '\n'.join(lines)


def report_rows(rows: Sequence[Tuple[str, EvalReport]]) -> List[List[str]]:
    """Header plus one row per (label, report)."""
    names = [f.name for f in fields(EvalReport)]
    table = [['camera'] + names]
    for label, report in rows:
        table.append([label] + [_format(getattr(report, name)) for name in names])
    return table


def write_report_csv(rows: Sequence[Tuple[str, EvalReport]], path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        csv.writer(handle, lineterminator='\n').writerows(report_rows(rows))


def per_camera_rows(reports) -> List[Tuple[str, EvalReport]]:
    """Rows ordered by camera id followed by an ``Average`` row."""
    ordered = sorted(reports.items())
    rows = list(ordered)
    if ordered:
        rows.append(('Average', average_reports([report for _, report in ordered])))
    return rows


def render_rows(rows: Sequence[Tuple[str, EvalReport]]) -> str:
    """Flat ``label.metric = value`` text, one block per row."""
    return '\n'.join(render_key_values(report, prefix=f"{label}.") for label, report in rows)
