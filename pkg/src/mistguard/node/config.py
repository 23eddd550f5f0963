"""Node configuration: a flat ``key = value`` file with dotted keys.

Recognized keys (defaults in brackets)::

    node.id                            [mist-node]
    node.listen                        status endpoint host:port [none]
    source.kind                        directory | synthetic [synthetic]
    source.path                        frame directory (directory replay)
    source.fps                         replay cadence [4]
    source.scene                       synthetic scene name [walkthrough-42]
    source.seed                        [42]
    source.frames                      synthetic frame count, 0 = endless [0]
    detector.kernel_size               [5]
    detector.kernel_sigma              [1.0]
    detector.pixel_diff_threshold      [25]
    detector.active_fraction_threshold [0.05]
    detector.ratio_threshold           [0.20]
    detector.mean_floor                [1.0]
    zones.monitored                    quadrant list, e.g. 0,1 or q0|q1 [0,1,2,3]
    zones.restricted                   [monitored minus caution]
    zones.caution                      []
    zones.motion_action                NONE | SLOW | STOP [SLOW]
    safety.release_frames              [8]
    machines.endpoints                 comma-separated host:port list [none]
    edge.sink                          host:port [none]
    net.ack_timeout_ms                 [2000]
    net.connect_retries                [5]

Lines starting with ``#`` and blank lines are ignored; unknown keys are errors.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from mistguard.detect import DetectorConfig
from mistguard.node.protocol import parse_endpoint
from mistguard.zones import MotionAction, SafetyConfig, ZonePolicy


class ConfigError(ValueError):
    pass


@dataclass
class NodeConfig:
    node_id: str = "mist-node"
    source_kind: str = "synthetic"
    source_path: Optional[str] = None
    fps: float = 4.0
    scene: str = "walkthrough-42"
    seed: int = 42
    frames: int = 0
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    policy: ZonePolicy = field(default_factory=lambda: ZonePolicy(restricted={0, 1, 2, 3}))
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    machines: list = field(default_factory=list)
    edge_sink: Optional[tuple] = None
    listen: Optional[tuple] = None
    ack_timeout: float = 2.0
    connect_retries: int = 5

    def __post_init__(self):
        if not self.node_id:
            raise ConfigError("node.id must be nonempty")
        if not self.fps > 0:
            raise ConfigError("source.fps must be > 0")
        if self.source_kind not in ("directory", "synthetic"):
            raise ConfigError(f"source.kind must be directory or synthetic, got {self.source_kind!r}")
        if self.source_kind == "directory" and not self.source_path:
            raise ConfigError("source.path is required for directory replay")
        if self.ack_timeout <= 0:
            raise ConfigError("net.ack_timeout_ms must be > 0")


def _quadrants(text):
    out = set()
    for tok in re.split(r"[,|\s]+", text.strip()):
        if not tok:
            continue
        tok = tok.lower().lstrip("q")
        if tok not in ("0", "1", "2", "3"):
            raise ConfigError(f"bad quadrant {tok!r}")
        out.add(int(tok))
    return out


def parse_config(text) -> NodeConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        raw[key.strip()] = (lineno, value.strip())

    kw, det, zones = {}, {}, {}
    taken = set()

    def take(key, conv, dest, name):
        if key not in raw:
            return
        taken.add(key)
        lineno, value = raw[key]
        try:
            dest[name] = conv(value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None

    take("node.id", str, kw, "node_id")
    take("node.listen", parse_endpoint, kw, "listen")
    take("source.kind", str, kw, "source_kind")
    take("source.path", str, kw, "source_path")
    take("source.fps", float, kw, "fps")
    take("source.scene", str, kw, "scene")
    take("source.seed", int, kw, "seed")
    take("source.frames", int, kw, "frames")
    for name, conv in (("kernel_size", int), ("kernel_sigma", float),
                       ("pixel_diff_threshold", int), ("active_fraction_threshold", float),
                       ("ratio_threshold", float), ("mean_floor", float)):
        take(f"detector.{name}", conv, det, name)
    for name in ("monitored", "restricted", "caution"):
        take(f"zones.{name}", _quadrants, zones, name)
    take("zones.motion_action", lambda v: MotionAction(v.upper()), zones, "motion_action")
    take("safety.release_frames", int, kw, "release_frames")
    take("machines.endpoints",
         lambda v: [parse_endpoint(e) for e in v.split(",") if e.strip()], kw, "machines")
    take("edge.sink", lambda v: parse_endpoint(v) if v else None, kw, "edge_sink")
    take("net.ack_timeout_ms", lambda v: int(v) / 1000.0, kw, "ack_timeout")
    take("net.connect_retries", int, kw, "connect_retries")

    unknown = sorted(set(raw) - taken)
    if unknown:
        lineno = raw[unknown[0]][0]
        raise ConfigError(f"line {lineno}: unknown key {unknown[0]!r}")

    try:
        if det:
            kw["detector"] = DetectorConfig(**det)
            kw["detector"].kernel()
            kw["detector"].motion_state()
            kw["detector"].roi()
        if zones:
            zones.setdefault("monitored", {0, 1, 2, 3})
            zones.setdefault("caution", set())
            zones.setdefault("restricted", set(zones["monitored"]) - set(zones["caution"]))
            kw["policy"] = ZonePolicy(**zones)
        if "release_frames" in kw:
            kw["safety"] = SafetyConfig(kw.pop("release_frames"))
        return NodeConfig(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> NodeConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
