"""Per-stage timing aggregation for baseline vs thresholded runs."""

from dataclasses import dataclass

import numpy as np

MIN_FRAMES = 30


@dataclass
class TimingRow:
    label: str
    acf_mean: float
    acf_std: float
    cnn_mean: float
    cnn_std: float
    total_mean: float
    total_std: float
    fps: float
    cnn_calls_mean: float


@dataclass
class BenchReport:
    baseline: TimingRow
    thresholded: TimingRow
    speedup_ok: bool

    def table(self):
        header = (
            f"{'run':<14} {'acf (s)':>16} {'cnn (s)':>16} "
            f"{'total (s)':>16} {'fps':>8} {'cnn calls':>10}"
        )
        lines = [header, "-" * len(header)]
        for row in (self.baseline, self.thresholded):
            lines.append(
                f"{row.label:<14} "
                f"{row.acf_mean:>8.4f}±{row.acf_std:<7.4f} "
                f"{row.cnn_mean:>8.4f}±{row.cnn_std:<7.4f} "
                f"{row.total_mean:>8.4f}±{row.total_std:<7.4f} "
                f"{row.fps:>8.2f} {row.cnn_calls_mean:>10.2f}"
            )
        lines.append(
            "threshold speedup: "
            + ("confirmed (cnn time reduced)" if self.speedup_ok else "NOT CONFIRMED")
        )
        return "\n".join(lines)

    def assert_ok(self):
        if not self.speedup_ok:
            raise RuntimeError(
                "thresholded run did not reduce mean cnn time "
                f"({self.thresholded.cnn_mean:.4f}s vs baseline "
                f"{self.baseline.cnn_mean:.4f}s)"
            )


def _row(label, records):
    acf = np.array([r.timing.acf_time for r in records])
    cnn = np.array([r.timing.cnn_time for r in records])
    tot = np.array([r.timing.total_time for r in records])
    calls = np.array([r.timing.cnn_calls for r in records])
    return TimingRow(
        label,
        float(acf.mean()),
        float(acf.std()),
        float(cnn.mean()),
        float(cnn.std()),
        float(tot.mean()),
        float(tot.std()),
        float(1.0 / tot.mean()),
        float(calls.mean()),
    )


def bench_timing(baseline_records, thresholded_records):
    """Two-row timing report; flags whether the threshold cut cnn time."""
    for name, records in (("baseline", baseline_records), ("thresholded", thresholded_records)):
        if len(records) < MIN_FRAMES:
            raise ValueError(f"{name} run has {len(records)} frames; need >= {MIN_FRAMES}")
    base = _row("baseline", baseline_records)
    thr = _row("thresholded", thresholded_records)
    return BenchReport(base, thr, speedup_ok=thr.cnn_mean < base.cnn_mean)
