"""On-disk formats: prediction logs, metric reports, atomic writes."""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

from ..errors import LogParseError
from ..metrics import REPORT_COLUMNS, TRACE_COLUMNS, MetricReport, PredictionLog

LOG_HEADER = ["sample_id", "true_label", "predicted_label"]


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x) -> str:
    return repr(float(x))


def write_prediction_log(log: PredictionLog, path) -> None:
    lines = [",".join(LOG_HEADER)]
    for i, y, p in zip(log.sample_ids, log.true_labels, log.predicted_labels):
        lines.append(f"{int(i)},{int(y)},{int(p)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_prediction_log(path, model_step: int, class_universe=()) -> PredictionLog:
    path = Path(path)
    if not path.exists():
        raise LogParseError(path, None, "file not found")
    ids, ys, ps = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LOG_HEADER:
            raise LogParseError(path, 1, f"expected header {','.join(LOG_HEADER)}")
        for row in reader:
            line = reader.line_num
            if len(row) != 3:
                raise LogParseError(path, line, f"expected 3 fields, got {len(row)}")
            try:
                i, y, p = (int(v) for v in row)
            except ValueError as exc:
                raise LogParseError(path, line, str(exc)) from None
            ids.append(i)
            ys.append(y)
            ps.append(p)
    if not ids:
        raise LogParseError(path, None, "log has no entries")
    try:
        return PredictionLog(model_step, ids, ys, ps, class_universe)
    except ValueError as exc:
        raise LogParseError(path, None, str(exc)) from None


def report_csv_text(rows, extra_columns=()) -> str:
    """``rows`` are (extras, MetricReport) pairs; extras align with ``extra_columns``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*extra_columns, *REPORT_COLUMNS])
    for extras, rep in rows:
        writer.writerow([str(e) for e in extras] + [_fmt(v) for v in rep.row().values()])
    return buf.getvalue()


def write_metric_report(report: MetricReport, path) -> None:
    atomic_write_text(path, report_csv_text([((), report)]))


def write_metric_trace(report: MetricReport, path) -> None:
    tr = report.traces
    lines = [",".join(TRACE_COLUMNS)]
    for i in range(len(tr["step"])):
        vals = [str(tr["step"][i])] + [_fmt(tr[c][i]) for c in TRACE_COLUMNS[1:]]
        lines.append(",".join(vals))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_metric_report(path) -> dict:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or list(header[-len(REPORT_COLUMNS):]) != list(REPORT_COLUMNS):
            raise LogParseError(path, 1, f"expected columns {','.join(REPORT_COLUMNS)}")
        row = next(reader, None)
        if row is None or len(row) != len(header):
            raise LogParseError(path, 2, "missing or malformed report row")
        return {h: (float(v) if h in REPORT_COLUMNS else v) for h, v in zip(header, row)}
