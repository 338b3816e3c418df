"""Experiment harness: INI configs, the paper's sweep shapes, CSV output and trend flags.

Config files are INI text read with :mod:`configparser`. Every section and
key is checked against the schema below, so a typo is an error rather than a
silently ignored setting. Units at this boundary are the lab's: mG, mW, MHz,
mm, kHz, degrees.

    [experiment]  tier = micro | shear, seed, n_slices, workers
    [medium]      density_m3, length_mm, temperature_K, resonant_fraction,
                  analysis_MHz, scheme (x | path to scheme JSON), ground_relax_kHz,
                  deplete_drive
    [drive]       power_mW, detuning_MHz, line_offset_MHz, waist_mm
    [field]       b_x_mG, b_z_mG
    [shear]       g, alpha
    [detection]   transmission, qe, visibility
    [sweep]       param, from, to, steps
    [scan]        points, samples
    [trend]       plateau_fraction, plateau_band_db

``detuning_MHz`` is on the paper's axis (laser minus the F=2 -> F'=1 line);
the modelled transition sits at ``line_offset_MHz`` on that axis (the
F=2 -> F'=2 line, 814.5 MHz up), so the model detuning is their difference.
"""

from __future__ import annotations

import configparser
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .atoms import (
    DOPPLER_FRACTION_74C,
    TWO_PI,
    DriveField,
    EnsembleConfig,
    MagneticField,
    default_x_scheme,
    load_scheme,
)
from .detection import DetectionChain, detect, effective_efficiency, fmt, synthesize_scan
from .errors import ConfigError, PsrLabError
from .gaussian import VACUUM_VARIANCE, GaussianState, apply_loss, max_variance, min_variance, vacuum
from .propagation import MediumConfig, propagate_cell
from .shear import ShearMediumConfig, propagate

SWEEP_PARAMS = ("b_x_mG", "b_z_mG", "detuning_MHz", "power_mW", "phase_deg", "shear_g", "alpha")
SWEEP_COLUMNS = ("param", "value", "min_db", "max_db", "angle_rad", "error")

# F=2 -> F'=2 sits this far above F=2 -> F'=1 on the D1 line
LINE_OFFSET_MHZ = 814.5

# section -> key -> (attribute, type)
_SCHEMA: dict[str, dict[str, tuple[str, type]]] = {
    "experiment": {"tier": ("tier", str), "seed": ("seed", int), "n_slices": ("n_slices", int), "workers": ("workers", int)},
    "medium": {
        "density_m3": ("density_m3", float),
        "length_mm": ("length_mm", float),
        "temperature_k": ("temperature_K", float),
        "resonant_fraction": ("resonant_fraction", float),
        "analysis_mhz": ("analysis_MHz", float),
        "scheme": ("scheme", str),
        "ground_relax_khz": ("ground_relax_kHz", float),
        "deplete_drive": ("deplete_drive", bool),
    },
    "drive": {
        "power_mw": ("power_mW", float),
        "detuning_mhz": ("detuning_MHz", float),
        "line_offset_mhz": ("line_offset_MHz", float),
        "waist_mm": ("waist_mm", float),
    },
    "field": {"b_x_mg": ("b_x_mG", float), "b_z_mg": ("b_z_mG", float)},
    "shear": {"g": ("shear_g", float), "alpha": ("alpha", float)},
    "detection": {"transmission": ("transmission", float), "qe": ("qe", float), "visibility": ("visibility", float)},
    "sweep": {"param": ("sweep_param", str), "from": ("sweep_from", float), "to": ("sweep_to", float), "steps": ("sweep_steps", int)},
    "scan": {"points": ("scan_points", int), "samples": ("scan_samples", int)},
    "trend": {"plateau_fraction": ("plateau_fraction", float), "plateau_band_db": ("plateau_band_db", float)},
}


@dataclass(frozen=True)
class ExperimentConfig:
    tier: str = "micro"
    seed: int = 0
    n_slices: int = 200
    workers: int = 1
    # medium
    density_m3: float = 7.6e17
    length_mm: float = 75.0
    temperature_K: float = 347.15
    resonant_fraction: float = DOPPLER_FRACTION_74C
    analysis_MHz: float = 3.0
    scheme: str = "x"
    ground_relax_kHz: float = 10.0
    deplete_drive: bool = True
    # drive; 800 MHz is the paper-axis grid point nearest the F'=2 line
    power_mW: float = 6.0
    detuning_MHz: float = 800.0
    line_offset_MHz: float = LINE_OFFSET_MHZ
    waist_mm: float = 2.0
    # field
    b_x_mG: float = 100.0
    b_z_mG: float = 0.0
    # phenomenological tier
    shear_g: float = 1.0
    alpha: float = 0.0
    # detection chain; perfect by default so reported numbers are source values
    transmission: float = 1.0
    qe: float = 1.0
    visibility: float = 1.0
    # sweep / scan
    sweep_param: str = "b_x_mG"
    sweep_from: float = 0.0
    sweep_to: float = 300.0
    sweep_steps: int = 7
    scan_points: int = 64
    scan_samples: int = 0
    phase_deg: float = 0.0
    plateau_fraction: float = 0.2
    plateau_band_db: float = 0.05

    def __post_init__(self):
        if self.tier not in ("micro", "shear"):
            raise ConfigError(f"tier must be 'micro' or 'shear', got {self.tier!r}")
        if self.sweep_param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep param must be one of {', '.join(SWEEP_PARAMS)}; got {self.sweep_param!r}")
        if self.sweep_steps < 1:
            raise ConfigError(f"sweep steps must be >= 1, got {self.sweep_steps}")
        if self.sweep_from > self.sweep_to:
            raise ConfigError(f"sweep from ({self.sweep_from}) exceeds to ({self.sweep_to})")
        if self.n_slices < 1 or self.workers < 1 or self.scan_points < 1 or self.scan_samples < 0:
            raise ConfigError("n_slices, workers and scan points must be >= 1; samples >= 0")
        if not 0 < self.plateau_fraction <= 1:
            raise ConfigError("plateau_fraction must lie in (0, 1]")

    # -- conversions to module configs ------------------------------------

    def chain(self) -> DetectionChain:
        return DetectionChain(self.transmission, self.qe, self.visibility)

    def medium(self) -> MediumConfig:
        if self.scheme == "x":
            scheme, couplings, decay = default_x_scheme(TWO_PI * self.ground_relax_kHz * 1e3)
        else:
            scheme, couplings, decay = load_scheme(self.scheme)
            decay = replace(decay, ground_relax=TWO_PI * self.ground_relax_kHz * 1e3)
        return MediumConfig(
            scheme,
            couplings,
            decay,
            ensemble=EnsembleConfig(
                number_density=self.density_m3,
                length=self.length_mm * 1e-3,
                temperature=self.temperature_K,
                resonant_fraction=self.resonant_fraction,
            ),
            drive=DriveField(
                power=self.power_mW * 1e-3,
                waist=self.waist_mm * 1e-3,
                detuning=TWO_PI * (self.detuning_MHz - self.line_offset_MHz) * 1e6,
            ),
            b=MagneticField(self.b_x_mG * 1e-3, self.b_z_mG * 1e-3),
            omega=TWO_PI * self.analysis_MHz * 1e6,
            deplete_drive=self.deplete_drive,
        )

    def shear_medium(self) -> ShearMediumConfig:
        return ShearMediumConfig(self.shear_g, self.alpha, max(self.n_slices, 1))

    def grid(self) -> np.ndarray:
        if self.sweep_steps == 1:
            return np.array([self.sweep_from])
        return np.linspace(self.sweep_from, self.sweep_to, self.sweep_steps)

    def with_param(self, name: str, value: float) -> "ExperimentConfig":
        if name not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {name!r}")
        return replace(self, **{name: float(value)})


def _coerce(raw: str, kind: type, where: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse INI text; unknown sections or keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {}
    for section in cp.sections():
        schema = _SCHEMA.get(section.lower())
        if schema is None:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            attr, kind = schema[key]
            values[attr] = _coerce(raw, kind, f"[{section}] {key}")
    try:
        return replace(base or ExperimentConfig(), **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that parses back to ``cfg``."""
    out = io.StringIO()
    for section, schema in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (attr, _) in schema.items():
            v = getattr(cfg, attr)
            out.write(f"{key} = {v!r}\n" if isinstance(v, float) else f"{key} = {v}\n")
        out.write("\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# single runs


@dataclass(frozen=True)
class PointResult:
    value: float
    min_db: float = float("nan")
    max_db: float = float("nan")
    angle_rad: float = float("nan")
    det: float = float("nan")
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def source_state(cfg: ExperimentConfig) -> GaussianState:
    """Output state of the cell, before the detection chain."""
    if cfg.tier == "shear":
        return propagate(vacuum(), cfg.shear_medium())
    return propagate_cell(vacuum(), cfg.medium(), cfg.n_slices).state


def _db(snu: float) -> float:
    return float(10.0 * np.log10(snu))


def detected_summary(state: GaussianState, chain: DetectionChain) -> tuple[float, float, float]:
    """(min dB, max dB, angle) of the detected quadrature noise."""
    lossy = apply_loss(state, effective_efficiency(chain))
    lam, ang = min_variance(lossy)
    return _db(lam / VACUUM_VARIANCE), _db(max_variance(lossy)[0] / VACUUM_VARIANCE), ang


def run_point(cfg: ExperimentConfig, value: float) -> PointResult:
    """One grid point of the configured sweep; errors are captured, not raised."""
    try:
        if cfg.sweep_param == "phase_deg":
            state = source_state(cfg)
            phi = math.radians(value)
            v = _db(detect(state, cfg.chain(), phi))
            return PointResult(value, v, v, phi, state.det)
        point = cfg.with_param(cfg.sweep_param, value)
        state = source_state(point)
        lo, hi, ang = detected_summary(state, point.chain())
        return PointResult(value, lo, hi, ang, state.det)
    except (PsrLabError, np.linalg.LinAlgError) as exc:
        return PointResult(float(value), error=f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# trend analysis


@dataclass(frozen=True)
class TrendReport:
    param: str
    points: tuple[PointResult, ...]
    plateau_fraction: float = 0.2
    plateau_band_db: float = 0.05
    tol_db: float = 1e-9

    def _curve(self) -> tuple[np.ndarray, np.ndarray]:
        good = [p for p in self.points if p.ok and np.isfinite(p.min_db)]
        return np.array([p.value for p in good]), np.array([p.min_db for p in good])

    @property
    def n_failed(self) -> int:
        return sum(not p.ok for p in self.points)

    @property
    def extremum_index(self) -> int:
        """Index (into the successful points) of the best squeezing."""
        _, y = self._curve()
        return int(np.argmin(y)) if y.size else -1

    @property
    def extremum_value(self) -> float:
        x, _ = self._curve()
        return float(x[self.extremum_index]) if x.size else float("nan")

    @property
    def best_db(self) -> float:
        _, y = self._curve()
        return float(y.min()) if y.size else float("nan")

    @property
    def monotone_decreasing(self) -> bool:
        _, y = self._curve()
        return bool(np.all(np.diff(y) <= self.tol_db))

    @property
    def monotone_increasing(self) -> bool:
        _, y = self._curve()
        return bool(np.all(np.diff(y) >= -self.tol_db))

    @property
    def nondecreasing_after_min(self) -> bool:
        _, y = self._curve()
        if y.size == 0:
            return False
        return bool(np.all(np.diff(y[self.extremum_index :]) >= -self.tol_db))

    @property
    def improves(self) -> bool:
        """Noise drops below the first grid point somewhere along the sweep."""
        _, y = self._curve()
        return bool(y.size > 1 and y.min() < y[0] - self.tol_db)

    @property
    def plateau(self) -> bool:
        """Trailing fraction of the points stays inside the plateau band."""
        _, y = self._curve()
        if y.size < 2:
            return False
        k = max(2, math.ceil(self.plateau_fraction * y.size - 1e-9))
        tail = y[-k:]
        return bool(tail.max() - tail.min() <= self.plateau_band_db)

    def flags(self) -> dict[str, object]:
        return {
            "points": len(self.points),
            "failed": self.n_failed,
            "best_db": self.best_db,
            "best_at": self.extremum_value,
            "monotone_decreasing": self.monotone_decreasing,
            "monotone_increasing": self.monotone_increasing,
            "nondecreasing_after_min": self.nondecreasing_after_min,
            "improves": self.improves,
            "plateau": self.plateau,
        }


def sweep_csv(param: str, points) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for p in points:
        err = p.error.replace(",", ";").replace("\n", " ")
        lines.append(f"{param},{fmt(p.value)},{fmt(p.min_db)},{fmt(p.max_db)},{fmt(p.angle_rad)},{err}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> TrendReport:
    """Evaluate the configured sweep; write the CSV if ``out`` is given."""
    grid = cfg.grid()
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            points = list(pool.map(lambda v: run_point(cfg, v), grid))
    else:
        points = [run_point(cfg, v) for v in grid]
    report = TrendReport(cfg.sweep_param, tuple(points), cfg.plateau_fraction, cfg.plateau_band_db)
    if out is not None:
        Path(out).write_text(sweep_csv(cfg.sweep_param, points))
    return report


def phase_scan(cfg: ExperimentConfig):
    """Homodyne scan of the configured source over one full turn of LO phase."""
    state = source_state(cfg)
    phi = np.linspace(0.0, 2.0 * np.pi, cfg.scan_points, endpoint=False)
    return synthesize_scan(state, cfg.chain(), phi, cfg.scan_samples, cfg.seed)


def paper_sweeps(base: ExperimentConfig | None = None) -> dict[str, ExperimentConfig]:
    """The four figure sweeps on the default grid (B in mG, detuning in MHz, power in mW)."""
    base = base or ExperimentConfig()
    return {
        "b_z": replace(base, b_x_mG=0.0, b_z_mG=0.0, sweep_param="b_z_mG", sweep_from=0, sweep_to=300, sweep_steps=7),
        "b_x": replace(base, b_x_mG=0.0, b_z_mG=0.0, sweep_param="b_x_mG", sweep_from=0, sweep_to=300, sweep_steps=7),
        "detuning": replace(base, sweep_param="detuning_MHz", sweep_from=-800, sweep_to=800, sweep_steps=9),
        "power": replace(base, sweep_param="power_mW", sweep_from=0.5, sweep_to=10, sweep_steps=6),
    }


def config_fields() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
