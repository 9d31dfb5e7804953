import csv
import math
from pathlib import Path
from typing import List, Optional

from cli.sweep_manager import SOURCES, SPINS, SweepManager, SweepResult, SweepRow
from utils.common import format_complex, save_json_file

VALUE_COLUMNS = [f"z_{source}_{spin}_{part}" for source in SOURCES for spin in SPINS for part in ("re", "im")]
COLUMNS = ["eps"] + VALUE_COLUMNS + ["rel_err_plus", "rel_err_minus", "flags", "seconds", "error"]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.17g}"


def _num(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def encode_flags(flags) -> str:
    return ";".join(f"{k}={v}" for k, v in sorted(flags.items()))


def decode_flags(text: str):
    if not text:
        return {}
    return dict(item.split("=", 1) for item in text.split(";"))


def row_to_record(row: SweepRow):
    record = {"eps": _fmt(row.eps)}
    for source in SOURCES:
        for spin in SPINS:
            z = row.value(source, spin)
            record[f"z_{source}_{spin}_re"] = _fmt(None if z is None else z.real)
            record[f"z_{source}_{spin}_im"] = _fmt(None if z is None else z.imag)
    record["rel_err_plus"] = _fmt(row.rel_err_plus)
    record["rel_err_minus"] = _fmt(row.rel_err_minus)
    record["flags"] = encode_flags(row.flags)
    record["seconds"] = _fmt(row.seconds)
    record["error"] = row.error or ""
    return record


def record_to_row(record) -> SweepRow:
    row = SweepRow(eps=float(record["eps"]))
    for source in SOURCES:
        for spin in SPINS:
            re_part = _num(record[f"z_{source}_{spin}_re"])
            if re_part is not None:
                setattr(row, f"z_{source}_{spin}", complex(re_part, _num(record[f"z_{source}_{spin}_im"])))
    row.rel_err_plus = _num(record["rel_err_plus"])
    row.rel_err_minus = _num(record["rel_err_minus"])
    row.flags = decode_flags(record["flags"])
    row.seconds = _num(record["seconds"]) or 0.0
    row.error = record["error"] or None
    return row


def write_csv(path, rows: List[SweepRow]) -> bool:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow(row_to_record(row))
        return True
    except OSError as e:
        print(f"✗ Error saving {path}: {e}")
        return False


def read_csv(path) -> List[SweepRow]:
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        return [record_to_row(record) for record in csv.DictReader(f)]


def row_to_json(row: SweepRow):
    data = {"eps": row.eps}
    for source in SOURCES:
        for spin in SPINS:
            data[f"z_{source}_{spin}"] = row.value(source, spin)
    data.update({"rel_err_plus": row.rel_err_plus, "rel_err_minus": row.rel_err_minus,
                 "flags": row.flags, "seconds": row.seconds, "error": row.error})
    return data


class ReportManager:

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir) if isinstance(out_dir, str) else out_dir

    def write(self, config, result: SweepResult):
        written = []
        if "csv" in config.output.formats:
            path = self.out_dir / config.output.csv
            if write_csv(path, result.rows):
                written.append(path)
        if "json" in config.output.formats:
            path = self.out_dir / config.output.json
            payload = {"config": config.as_dict(), "rows": [row_to_json(r) for r in result.rows],
                       "summary": result.summary}
            if save_json_file(path, payload):
                written.append(path)
        for path in written:
            print(f"✓ Saved {path}")
        return written

    @staticmethod
    def print_table(rows: List[SweepRow]):
        print(f"{'eps':>12}  {'z_asym_minus':>28}  {'z_bs_minus':>28}  {'rel_err':>10}")
        for row in rows:
            rel = "" if row.rel_err_minus is None or math.isnan(row.rel_err_minus) else f"{row.rel_err_minus:.3e}"
            bs = format_complex(row.z_bs_minus, 8) if row.z_bs_minus is not None else row.flags.get("bs_minus", "absent")
            print(f"{row.eps:>12.5g}  {format_complex(row.z_asym_minus, 8):>28}  {bs:>28}  {rel:>10}")


def run_sweep(config, out_dir=".", threads=1, verbose=False) -> SweepResult:
    """Run the eps sweep for config, print the summary table and persist CSV/JSON."""
    result = SweepManager(config, threads=threads, verbose=verbose).run()
    reports = ReportManager(out_dir)
    reports.print_table(result.rows)
    reports.write(config, result)
    return result
