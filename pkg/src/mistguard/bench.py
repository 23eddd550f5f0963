"""In-memory latency benchmark for the detection pipeline."""
from __future__ import annotations

from dataclasses import dataclass

from mistguard import kernels
from mistguard.detect import DetectorConfig
from mistguard.evaluate import LatencyStats, Mode, run_frames

# per-frame latency budgets in ms, from the reference deployment
BUDGET_MS = {Mode.A: 7.0, Mode.B: 6.0, Mode.HYBRID: 10.0}


@dataclass(frozen=True)
class BenchResult:
    mode: Mode
    backend: str
    stats: LatencyStats

    @property
    def budget_ms(self):
        return BUDGET_MS[self.mode]

    @property
    def verdict(self):
        """PASS within budget, WARN within twice the budget, FAIL beyond."""
        p99 = self.stats.p99_ms
        if p99 <= self.budget_ms:
            return "PASS"
        if p99 <= 2 * self.budget_ms:
            return "WARN"
        return "FAIL"

    def line(self):
        s = self.stats
        return (f"{self.mode.value:<7} [{self.backend}] n={s.n} min {s.min_ms:.3f} "
                f"mean {s.mean_ms:.3f} max {s.max_ms:.3f} p99 {s.p99_ms:.3f} ms | "
                f"budget {self.budget_ms:g} ms: {self.verdict}")


def bench(frames, mode=Mode.HYBRID, repeat=1, config=DetectorConfig(), backend=None, warmup=5):
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    if not frames:
        raise ValueError("no frames to benchmark")
    labels = [False] * len(frames)
    with kernels.use_backend(backend or kernels.backend_name()):
        run_frames(frames[:warmup], labels[:warmup], config, mode)
        samples = []
        for _ in range(repeat):
            _, lat = run_frames(frames, labels, config, mode)
            samples.extend(lat)
        name = kernels.backend_name()
    return BenchResult(mode, name, LatencyStats.from_samples(samples))


def compare_backends(frames, mode=Mode.HYBRID, repeat=1, config=DetectorConfig()):
    """Benchmark every available kernel backend on the same frames."""
    return [bench(frames, mode, repeat, config, name) for name in sorted(kernels.BACKENDS)]
