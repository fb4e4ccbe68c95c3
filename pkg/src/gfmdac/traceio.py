"""CSV/JSON writers for traces, metrics and sweep tables.

Floats are written with ``repr`` so a trace read back reproduces the
in-memory arrays exactly.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .engine import MODE_NAMES, Trace


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_rows(trace: Trace):
    n_src, n_gfl = len(trace.source_ids), len(trace.gfl_ids)
    for r in range(len(trace.t)):
        row = [repr(float(trace.t[r]))]
        for i in range(n_src):
            row += [repr(float(trace.omega[r, i])), repr(float(trace.p_inv[r, i])), repr(float(trace.q_inv[r, i])),
                    repr(float(trace.p_set_star[r, i])), repr(float(trace.p_set[r, i])), MODE_NAMES[trace.mode[r, i]]]
        for g in range(n_gfl):
            row += [repr(float(trace.gfl_p[r, g])), str(int(trace.gfl_tripped[r, g]))]
        row += [repr(float(v)) for v in trace.f_bus[r]]
        yield row


def trace_csv_text(trace: Trace) -> str:
    lines = [",".join(trace.column_names())]
    lines += [",".join(row) for row in trace_rows(trace)]
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: Trace, path) -> None:
    _atomic_write(Path(path), trace_csv_text(trace))


def read_trace_csv(path) -> Trace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    src_ids = [h[: -len(".omega")] for h in header if h.endswith(".omega")]
    gfl_ids = [h[: -len(".p_out")] for h in header if h.endswith(".p_out")]
    bus_ids = [int(h[len("f.bus"):]) for h in header if h.startswith("f.bus")]
    col = {h: i for i, h in enumerate(header)}

    def floats(name):
        return np.array([float(r[col[name]]) for r in rows])

    def per(ids, suffix, conv=floats):
        if not ids:
            return np.zeros((len(rows), 0))
        return np.column_stack([conv(f"{d}.{suffix}") for d in ids])

    modes = {name: i for i, name in enumerate(MODE_NAMES)}
    return Trace(
        t=floats("t"), source_ids=src_ids, gfl_ids=gfl_ids, bus_ids=bus_ids,
        omega=per(src_ids, "omega"), p_inv=per(src_ids, "p_inv"), q_inv=per(src_ids, "q_inv"),
        p_set_star=per(src_ids, "p_set_star"), p_set=per(src_ids, "p_set"),
        mode=per(src_ids, "dac", lambda n: np.array([modes[r[col[n]]] for r in rows], dtype=np.int8)).astype(np.int8),
        gfl_p=per(gfl_ids, "p_out"),
        gfl_tripped=per(gfl_ids, "tripped", lambda n: np.array([r[col[n]] == "1" for r in rows])).astype(bool),
        f_bus=np.column_stack([floats(f"f.bus{b}") for b in bus_ids]),
    )


def write_json(obj, path) -> None:
    _atomic_write(Path(path), json.dumps(obj, indent=2, sort_keys=True) + "\n")


SWEEP_COLUMNS = ("value", "dac_on_violation_time", "dac_off_violation_time",
                 "dac_on_collapsed", "dac_off_collapsed", "dac_on_nadir", "dac_off_nadir")


def sweep_table(rows) -> list[dict]:
    """Pivot long-form sweep rows (one per value and flag) into one row per value."""
    table: dict = {}
    for r in rows:
        entry = table.setdefault(r.value, {"value": r.value})
        tag = "dac_on" if r.dac else "dac_off"
        entry[f"{tag}_violation_time"] = r.metrics.violation_time
        entry[f"{tag}_collapsed"] = r.metrics.collapsed
        entry[f"{tag}_nadir"] = r.metrics.nadir
    return list(table.values())


def sweep_csv_text(rows) -> str:
    out = [",".join(SWEEP_COLUMNS)]
    for entry in sweep_table(rows):
        cells = []
        for c in SWEEP_COLUMNS:
            v = entry[c]
            cells.append(str(int(v)) if isinstance(v, bool) else repr(float(v)))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def write_sweep_csv(rows, path) -> None:
    _atomic_write(Path(path), sweep_csv_text(rows))
