"""Dataset manifests, detector evaluation, confusion matrices and reports."""
from __future__ import annotations

import csv
import enum
import io
import os
import time
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal, localcontext

import numpy as np

from mistguard.detect import DetectorConfig, hybrid_step, method_a_step, method_b
from mistguard.frame import preprocess
from mistguard.netpbm import load_frame

MANIFEST_COLUMNS = ("frame", "label", "quadrants")
OPTIONAL_COLUMNS = ("t_ms", "moving")
REPORT_COLUMNS = ("method", "tp", "fp", "fn", "tn", "accuracy",
                  "lat_min_ms", "lat_mean_ms", "lat_max_ms", "lat_p99_ms")
QUADRANT_TOKENS = ("q0", "q1", "q2", "q3")


class DatasetError(ValueError):
    pass


class EvalError(RuntimeError):
    def __init__(self, index, message):
        super().__init__(f"frame {index}: {message}")
        self.index = index


class Mode(enum.Enum):
    A = "a"
    B = "b"
    HYBRID = "hybrid"

    @classmethod
    def parse(cls, token):
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            raise ValueError(f"unknown method {token!r} (expected a, b or hybrid)") from None

    @property
    def title(self):
        return {"a": "Method A", "b": "Method B", "hybrid": "Hybrid"}[self.value]


def percent_2dp(num, den) -> Decimal:
    """100*num/den to two decimals, ties rounded away from zero."""
    if den <= 0:
        raise ValueError("percentage of an empty total")
    with localcontext() as ctx:
        ctx.prec = 50
        value = Decimal(100 * num) / Decimal(den)
        return value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


@dataclass
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    def add(self, predicted, actual):
        if predicted and actual:
            self.tp += 1
        elif predicted:
            self.fp += 1
        elif actual:
            self.fn += 1
        else:
            self.tn += 1


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix")
    return float(percent_2dp(cm.tp + cm.tn, cm.total))


@dataclass(frozen=True)
class Entry:
    path: str
    positive: bool
    quadrants: frozenset = frozenset()


@dataclass
class AnnotatedDataset:
    name: str
    entries: list

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self):
        return [e.positive for e in self.entries]


def _parse_quadrants(token, rownum):
    token = token.strip()
    if not token:
        return frozenset()
    out = set()
    for part in token.split("|"):
        part = part.strip().lower()
        if part not in QUADRANT_TOKENS:
            raise DatasetError(f"row {rownum}: bad quadrant token {part!r}")
        out.add(QUADRANT_TOKENS.index(part))
    return frozenset(out)


def load_dataset(manifest_path, name=None, check_files=True) -> AnnotatedDataset:
    """Read a ``frame,label,quadrants`` manifest; frame paths are relative to it.

    Row numbers in errors count the header as row 1.
    """
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    try:
        with open(manifest_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise DatasetError(f"manifest not found: {manifest_path}") from None
    except (csv.Error, UnicodeDecodeError) as exc:
        raise DatasetError(f"{manifest_path}: malformed CSV ({exc})") from None
    if not rows:
        raise DatasetError(f"{manifest_path}: empty manifest")
    header = tuple(h.strip() for h in rows[0])
    if header[:3] != MANIFEST_COLUMNS or any(h not in OPTIONAL_COLUMNS for h in header[3:]):
        raise DatasetError(f"{manifest_path}: header must start with {','.join(MANIFEST_COLUMNS)}, "
                           f"got {','.join(header)}")
    entries = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise DatasetError(f"row {rownum}: expected {len(header)} fields, got {len(row)}")
        frame, label, quads = row[0].strip(), row[1].strip().lower(), row[2]
        if label not in ("pos", "neg"):
            raise DatasetError(f"row {rownum}: bad label {row[1]!r} (expected pos or neg)")
        if not frame:
            raise DatasetError(f"row {rownum}: empty frame path")
        path = os.path.join(base, frame)
        if check_files and not os.path.isfile(path):
            raise DatasetError(f"row {rownum}: frame file not found: {path}")
        entries.append(Entry(path, label == "pos", _parse_quadrants(quads, rownum)))
    if not entries:
        raise DatasetError(f"{manifest_path}: manifest has no frames")
    if name is None:
        name = os.path.basename(base) or "dataset"
    return AnnotatedDataset(name, entries)


def write_manifest(rows, header=MANIFEST_COLUMNS) -> bytes:
    """Serialize manifest rows (tuples matching ``header``) with LF line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue().encode("utf-8")


def format_quadrants(quads):
    return "|".join(QUADRANT_TOKENS[q] for q in sorted(quads))


class Pipeline:
    """Preprocess + one detection mode, with fresh detector state."""

    def __init__(self, config: DetectorConfig = DetectorConfig(), mode: Mode = Mode.HYBRID):
        self.config = config
        self.mode = mode
        self.kernel = config.kernel()
        self.roi = config.roi()
        self.state = config.motion_state()

    def __call__(self, raw):
        gray = preprocess(raw, self.kernel)
        if self.mode is Mode.B:
            return method_b(gray, self.roi).positive
        if self.mode is Mode.A:
            res, self.state = method_a_step(self.state, gray)
            return res.positive
        det, self.state = hybrid_step(self.state, gray, self.roi)
        return det.positive


def run_frames(frames, labels, config=DetectorConfig(), mode=Mode.HYBRID):
    """Evaluate preloaded frames. Returns (ConfusionMatrix, latencies in ms)."""
    pipe = Pipeline(config, mode)
    cm = ConfusionMatrix()
    lat = []
    clock = time.perf_counter_ns
    for i, (raw, actual) in enumerate(zip(frames, labels)):
        try:
            t0 = clock()
            predicted = pipe(raw)
            t1 = clock()
        except Exception as exc:
            raise EvalError(i, str(exc)) from exc
        lat.append((t1 - t0) / 1e6)
        cm.add(predicted, actual)
    return cm, lat


def run_eval(dataset: AnnotatedDataset, config=DetectorConfig(), mode=Mode.HYBRID):
    """Stream frames from disk in manifest order; only preprocess+detect is timed."""
    if not dataset.entries:
        raise DatasetError("empty dataset")
    mode = Mode.parse(mode.value if isinstance(mode, Mode) else mode)
    pipe = Pipeline(config, mode)
    cm = ConfusionMatrix()
    lat = []
    clock = time.perf_counter_ns
    for i, entry in enumerate(dataset.entries):
        try:
            raw = load_frame(entry.path)
        except (OSError, ValueError) as exc:
            raise EvalError(i, str(exc)) from exc
        try:
            t0 = clock()
            predicted = pipe(raw)
            t1 = clock()
        except Exception as exc:
            raise EvalError(i, str(exc)) from exc
        lat.append((t1 - t0) / 1e6)
        cm.add(predicted, entry.positive)
    return cm, lat


def load_frames(dataset: AnnotatedDataset):
    return [load_frame(e.path) for e in dataset.entries]


@dataclass(frozen=True)
class LatencyStats:
    min_ms: float
    mean_ms: float
    max_ms: float
    p99_ms: float
    n: int

    @classmethod
    def from_samples(cls, samples):
        a = np.asarray(samples, dtype=np.float64)
        if a.size == 0:
            raise ValueError("no latency samples")
        return cls(float(a.min()), float(a.mean()), float(a.max()),
                   float(np.percentile(a, 99)), int(a.size))


@dataclass
class MethodResult:
    matrix: ConfusionMatrix
    latency: LatencyStats = None

    @property
    def accuracy(self):
        return accuracy(self.matrix)


@dataclass
class EvalReport:
    dataset: str
    results: dict  # Mode -> MethodResult
    config: DetectorConfig = field(default_factory=DetectorConfig)

    def accuracy(self, mode):
        return self.results[Mode.parse(mode.value if isinstance(mode, Mode) else mode)].accuracy


def evaluate(dataset, config=DetectorConfig(), modes=(Mode.A, Mode.B, Mode.HYBRID)) -> EvalReport:
    results = {}
    for mode in modes:
        cm, lat = run_eval(dataset, config, mode)
        results[mode] = MethodResult(cm, LatencyStats.from_samples(lat))
    return EvalReport(dataset.name, results, config)


def format_cell(count, tag, total):
    return f"{count} {tag} ({percent_2dp(count, total)}%)"


def render_text(report: EvalReport) -> str:
    lines = [f"dataset: {report.dataset}"]
    cfg = ", ".join(f"{k}={v}" for k, v in asdict(report.config).items())
    lines.append(f"config: {cfg}")
    for mode, res in report.results.items():
        cm = res.matrix
        if cm.total == 0:
            raise ValueError(f"{mode.title}: empty confusion matrix")
        n = cm.total
        cells = [[format_cell(cm.tp, "TP", n), format_cell(cm.fp, "FP", n)],
                 [format_cell(cm.fn, "FN", n), format_cell(cm.tn, "TN", n)]]
        width = max(len(c) for row in cells for c in row) + 2
        lines.append("")
        lines.append(f"== {mode.title} ({n} frames) ==")
        lines.append(f"{'':<22}{'actual positive':<{width}}{'actual negative':<{width}}".rstrip())
        lines.append(f"{'predicted positive':<22}{cells[0][0]:<{width}}{cells[0][1]:<{width}}".rstrip())
        lines.append(f"{'predicted negative':<22}{cells[1][0]:<{width}}{cells[1][1]:<{width}}".rstrip())
        lines.append(f"accuracy: {percent_2dp(cm.tp + cm.tn, n)}%")
        if res.latency is not None:
            s = res.latency
            lines.append(f"latency ms: min {s.min_ms:.3f}  mean {s.mean_ms:.3f}  "
                         f"max {s.max_ms:.3f}  p99 {s.p99_ms:.3f}")
    return "\n".join(lines) + "\n"


def render_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for mode, res in report.results.items():
        cm = res.matrix
        lat = res.latency
        lat_cols = (["", "", "", ""] if lat is None else
                    [f"{lat.min_ms:.3f}", f"{lat.mean_ms:.3f}", f"{lat.max_ms:.3f}", f"{lat.p99_ms:.3f}"])
        w.writerow([mode.value, cm.tp, cm.fp, cm.fn, cm.tn,
                    str(percent_2dp(cm.tp + cm.tn, cm.total))] + lat_cols)
    return buf.getvalue()


def render_report(report: EvalReport):
    """Return ``(text, csv)`` renderings."""
    return render_text(report), render_csv(report)
