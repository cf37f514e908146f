"""Declarative pipeline configuration.

Configs live in diff-friendly ``key=value`` text (one per line, ``#``
comments) or an equivalent JSON object. A radius of 0 means "derive from
the cloud's median point spacing" with the documented factor; 0 threads
means one worker per CPU.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

MLS_SPACING_FACTOR = 6.0
NORMAL_SPACING_FACTOR = 4.0
GFH_SPACING_FACTOR = 4.0
DENOISE_SPACING_FACTOR = 2.5


@dataclass(frozen=True)
class PipelineConfig:
    mls_enabled: bool = True
    mls_radius: float = 0.0
    mls_order: int = 2
    normal_radius: float = 0.0
    gfh_radius: float = 0.0
    threshold_mode: str = "otsu"  # otsu | fixed
    threshold_value: float = 0.0
    denoise_enabled: bool = True
    denoise_min_cluster: int = 30
    denoise_radius: float = 0.0
    segments: int = 55
    gd_tolerance: float = 1e-4
    gd_max_iters: int = 1000
    reverse: bool = False
    threads: int = 0

    def __post_init__(self):
        if not 1 <= self.segments <= 10_000:
            raise ValueError(f"segments must be in [1, 10000], got {self.segments}")
        for name in ("mls_radius", "normal_radius", "gfh_radius", "denoise_radius"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} cannot be negative")
        if self.threshold_mode not in ("otsu", "fixed"):
            raise ValueError(f"threshold_mode must be 'otsu' or 'fixed', got {self.threshold_mode!r}")
        if self.threshold_mode == "fixed" and self.threshold_value <= 0:
            raise ValueError("fixed threshold mode needs threshold_value > 0")
        if self.mls_order not in (1, 2):
            raise ValueError(f"mls_order must be 1 or 2, got {self.mls_order}")
        if self.gd_tolerance <= 0 or self.gd_max_iters < 1:
            raise ValueError("bad gradient-descent settings")

    def with_resolved_radii(self, spacing: float) -> "PipelineConfig":
        """Replace zero radii with spacing-scaled defaults."""
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        return replace(
            self,
            mls_radius=self.mls_radius or MLS_SPACING_FACTOR * spacing,
            normal_radius=self.normal_radius or NORMAL_SPACING_FACTOR * spacing,
            gfh_radius=self.gfh_radius or GFH_SPACING_FACTOR * spacing,
            denoise_radius=self.denoise_radius or DENOISE_SPACING_FACTOR * spacing,
        )

    def to_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = f"{v:.17g}"
            else:
                s = str(v)
            lines.append(f"{f.name}={s}\n")
        return "".join(lines)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, kind: type, raw):
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: cannot parse boolean from {raw!r}")
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ValueError(f"{name}: cannot parse {kind.__name__} from {raw!r}") from None


def config_from_dict(data: dict) -> PipelineConfig:
    known = {f.name: f.type for f in fields(PipelineConfig)}
    kinds = {"bool": bool, "float": float, "int": int, "str": str}
    kwargs = {}
    for key, raw in data.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        kind = kinds[known[key]] if isinstance(known[key], str) else known[key]
        kwargs[key] = _coerce(key, kind, raw)
    return PipelineConfig(**kwargs)


def parse_config(text: str) -> PipelineConfig:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return config_from_dict(json.loads(text))
    data = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {i}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        data[key.strip()] = value.strip()
    return config_from_dict(data)


def load_config(path) -> PipelineConfig:
    return parse_config(Path(path).read_text())


def save_config(config: PipelineConfig, path) -> None:
    Path(path).write_text(config.to_text())
