"""File formats: points CSV, ASCII PGM maps, flat key-value run configs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .geometry import as_points
from .optimizer import OptimizerConfig
from .postprocess import ThresholdMethod
from .whd import ScaleTransform, WhdParams

PGM_MAXVAL = 65535


class ParseError(ValueError):
    """Malformed input file or flag value."""


# -- points ------------------------------------------------------------------

def format_points(points) -> str:
    pts = as_points(points)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "col"])
    for r, c in pts:
        writer.writerow([repr(float(r)), repr(float(c))])
    return buf.getvalue()


def parse_points(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != ["row", "col"]:
        raise ParseError("points file must start with the header 'row,col'")
    pts = []
    for lineno, rec in enumerate(rows[1:], start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != 2:
            raise ParseError(f"line {lineno}: expected 2 fields, got {len(rec)}")
        try:
            r, c = float(rec[0]), float(rec[1])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        if not (math.isfinite(r) and math.isfinite(c)):
            raise ParseError(f"line {lineno}: coordinates must be finite")
        pts.append((r, c))
    return as_points(pts)


def write_points(path, points):
    Path(path).write_text(format_points(points), encoding="utf-8", newline="\n")


def read_points(path) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    return parse_points(text)


# -- maps (plain PGM, P2) -----------------------------------------------------

def format_pgm(p) -> str:
    """Encode a [0, 1] map as plain PGM with maxval 65535.

    Lines are wrapped at 70 characters as netpbm recommends.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("map must be 2-D")
    if not np.all(np.isfinite(p)) or p.min() < 0 or p.max() > 1:
        raise ValueError("map values must be finite and in [0, 1]")
    q = np.rint(p * PGM_MAXVAL).astype(np.int64)
    lines = ["P2", f"{p.shape[1]} {p.shape[0]}", str(PGM_MAXVAL)]
    for row in q:
        line = ""
        for v in row:
            tok = str(v)
            if line and len(line) + 1 + len(tok) > 70:
                lines.append(line)
                line = tok
            else:
                line = f"{line} {tok}" if line else tok
        lines.append(line)
    return "\n".join(lines) + "\n"


def parse_pgm(text: str) -> np.ndarray:
    tokens = []
    for line in text.splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ParseError("map file must be plain PGM (magic 'P2')")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed PGM header or pixel data: {exc}") from exc
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise ParseError(f"bad PGM dimensions or maxval: {width}x{height}, {maxval}")
    if values.size != width * height:
        raise ParseError(f"expected {width * height} pixel values, found {values.size}")
    if values.min() < 0 or values.max() > maxval:
        raise ParseError("pixel value outside [0, maxval]")
    return values.reshape(height, width) / maxval


def write_pgm(path, p):
    Path(path).write_text(format_pgm(p), encoding="ascii", newline="\n")


def read_pgm(path) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc)) from exc
    return parse_pgm(text)


# -- run configuration -------------------------------------------------------

def parse_alpha(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("min", "-inf"):
        return -math.inf
    try:
        return float(t)
    except ValueError as exc:
        raise ParseError(f"alpha must be a negative number or 'min', got {text!r}") from exc


def parse_scale(text) -> ScaleTransform | None:
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    try:
        s_row, s_col = (float(v) for v in str(text).split(","))
        return ScaleTransform(s_row, s_col)
    except ValueError as exc:
        raise ParseError(f"scale must look like 's_row,s_col', got {text!r}") from exc


def parse_sweep(text: str) -> list[float]:
    """``"lo:hi:step"`` to an inclusive list of radii."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ParseError(f"sweep must look like lo:hi:step, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise ParseError("sweep needs step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def _parse_bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"expected a boolean, got {text!r}")


@dataclass
class RunConfig:
    alpha: float = -1.0
    epsilon: float = 1e-6
    scale: ScaleTransform | None = None
    iterations: int = 2000
    learning_rate: float | None = None
    use_adam_moments: bool = True
    mass_reg_weight: float = 1.0
    init_value: float = 0.1
    method: ThresholdMethod = field(default_factory=lambda: ThresholdMethod("bmm"))
    radius: float = 5.0
    radii: list | None = None
    seed: int | None = None

    _PARSERS = {
        "alpha": parse_alpha,
        "epsilon": float,
        "scale": parse_scale,
        "iterations": int,
        "learning_rate": lambda s: None if str(s).lower() == "none" else float(s),
        "use_adam_moments": _parse_bool,
        "mass_reg_weight": float,
        "init_value": float,
        "method": lambda s: s if isinstance(s, ThresholdMethod) else ThresholdMethod.parse(s),
        "radius": float,
        "radii": lambda s: s if isinstance(s, list) else parse_sweep(s),
        "seed": int,
    }

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"config line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in cls._PARSERS:
                raise ParseError(f"config line {lineno}: unknown key {key!r}")
            values[key] = value
        return cls().override(**values)

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            return cls.from_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ParseError(str(exc)) from exc

    def override(self, **flags) -> "RunConfig":
        """Copy with every non-``None`` flag applied (flags win over the file)."""
        updates = {}
        for key, value in flags.items():
            if value is None:
                continue
            if key not in self._PARSERS:
                raise ParseError(f"unknown config key {key!r}")
            try:
                updates[key] = self._PARSERS[key](value)
            except ParseError:
                raise
            except ValueError as exc:
                raise ParseError(f"bad value for {key}: {value!r} ({exc})") from exc
        out = replace(self, **updates)
        out.whd_params()  # validate eagerly
        return out

    def whd_params(self) -> WhdParams:
        try:
            return WhdParams(alpha=self.alpha, epsilon=self.epsilon, scale=self.scale)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc

    def optimizer_config(self, seed: int = 0) -> OptimizerConfig:
        try:
            return OptimizerConfig(
                iterations=self.iterations,
                learning_rate=self.learning_rate,
                seed=seed,
                use_adam_moments=self.use_adam_moments,
                mass_reg_weight=self.mass_reg_weight,
                init_value=self.init_value,
            )
        except ValueError as exc:
            raise ParseError(str(exc)) from exc

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "scale":
                v = f"{v.s_row!r},{v.s_col!r}"
            elif f.name == "alpha" and v == -math.inf:
                v = "min"
            elif f.name == "radii":
                continue
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"
