"""Per-interval run records and their CSV form.

The CSV layout is versioned through a leading comment line so downstream
tooling can reject files it does not understand. Floats are written with
``repr`` (shortest round-trip form), which makes identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

from .errors import ConfigurationError

SCHEMA_LINE = "# schema: netsense.records/v1"

COLUMNS = (
    "sim_time_s",
    "step",
    "strategy",
    "ratio",
    "data_size_bits",
    "rtt_s",
    "ebb_bps",
    "btlbw_bps",
    "rtprop_s",
    "bdp_bits",
    "loss",
    "accuracy",
    "samples_per_sec",
    "loss_event",
)


@dataclass(frozen=True)
class ExperimentRecord:
    sim_time_s: float
    step: int
    strategy: str
    ratio: float
    data_size_bits: float
    rtt_s: float
    ebb_bps: float
    btlbw_bps: float
    rtprop_s: float
    bdp_bits: float
    loss: float
    accuracy: float
    samples_per_sec: float
    loss_event: int


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(path, records: list[ExperimentRecord]) -> None:
    with open(path, "w", newline="") as f:
        f.write(SCHEMA_LINE + "\n")
        writer = csv.writer(f)
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow([_format(getattr(rec, col)) for col in COLUMNS])


def read_records_csv(path) -> list[ExperimentRecord]:
    with open(path, "r", newline="") as f:
        first = f.readline().rstrip("\n")
        if first != SCHEMA_LINE:
            raise ConfigurationError(f"{path}: unsupported records schema {first!r}")
        reader = csv.DictReader(f)
        out = []
        types = {f.name: f.type for f in fields(ExperimentRecord)}
        for row in reader:
            kwargs = {}
            for col in COLUMNS:
                t = types[col]
                if t in ("int", int):
                    kwargs[col] = int(row[col])
                elif t in ("float", float):
                    kwargs[col] = float(row[col])
                else:
                    kwargs[col] = row[col]
            out.append(ExperimentRecord(**kwargs))
        return out
