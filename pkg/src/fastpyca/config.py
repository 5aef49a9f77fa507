"""Pipeline configuration and the flat ``key=value`` config file format."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .fast import DetectorParams
from .pyca import CellConfig, NmsConfig


@dataclass(frozen=True)
class PipelineConfig:
    scales: int = 8
    zeta: float = 1.2
    cell: CellConfig = field(default_factory=lambda: CellConfig(32, 32))
    eps: int = 20
    pmin: int = 9
    pmax: int = 13
    classic: bool = False
    q: int = 3
    nms_single: bool = False

    @property
    def detector(self) -> DetectorParams:
        if self.classic:
            return DetectorParams.classic(self.eps, self.pmin)
        return DetectorParams(self.eps, self.pmin, self.pmax)

    @property
    def nms(self) -> NmsConfig:
        return NmsConfig(self.q)

    def with_mode(self, mode: str) -> PipelineConfig:
        if mode not in ("bounded", "classic"):
            raise ValueError(f"mode must be 'bounded' or 'classic', got {mode!r}")
        return replace(self, classic=(mode == "classic"))


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _coerce(key: str, value: str):
    if key == "cell":
        return CellConfig.parse(value)
    if key in ("classic", "nms_single"):
        try:
            return _BOOL[value.strip().lower()]
        except KeyError:
            raise ValueError(f"{key}: not a boolean: {value!r}") from None
    if key == "zeta":
        return float(value)
    return int(value)


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Keys mirror the CLI flags."""
    known = {f.name for f in fields(PipelineConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lstrip("-").replace("-", "_")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


def load_config(path=None, **overrides) -> PipelineConfig:
    """File values first, then any non-None ``overrides`` on top."""
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)
