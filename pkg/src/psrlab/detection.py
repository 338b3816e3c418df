"""Homodyne detection model: efficiency chain, phase scans, loss inference, tomography."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, MissingColumn, ParseError, RankDeficient, Unphysical
from .gaussian import (
    VACUUM_VARIANCE,
    GaussianState,
    apply_loss,
    min_variance,
    quadrature_variance,
    wigner,
)

SCAN_COLUMNS = ("phi_rad", "variance_snu", "samples")


def fmt(x: float) -> str:
    """Fixed 9-significant-digit formatting used by every CSV emitter."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if not np.isfinite(x):
        return "nan"
    return f"{float(x):.9g}"


@dataclass(frozen=True)
class DetectionChain:
    path_transmission: float = 1.0
    quantum_efficiency: float = 1.0
    visibility: float = 1.0

    def __post_init__(self):
        for name in ("path_transmission", "quantum_efficiency", "visibility"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def paper(cls) -> "DetectionChain":
        """Signal transmission 0.8, detector QE 0.95, fringe visibility 0.99."""
        return cls(0.8, 0.95, 0.99)


def effective_efficiency(chain: DetectionChain) -> float:
    """Overall efficiency; visibility enters squared (mode-overlap power penalty)."""
    return chain.path_transmission * chain.quantum_efficiency * chain.visibility**2


def detect(state: GaussianState, chain: DetectionChain, phi: float) -> float:
    """Detected quadrature noise at LO phase phi, in shot-noise units."""
    lossy = apply_loss(state, effective_efficiency(chain))
    return quadrature_variance(lossy, phi) / VACUUM_VARIANCE


def infer_source_db(measured_db: float, eta: float) -> float:
    """Undo a loss eta: V_src = (V_meas - (1 - eta)) / eta, everything in SNU."""
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"efficiency must lie in (0, 1], got {eta}")
    measured = 10.0 ** (measured_db / 10.0)
    src = (measured - (1.0 - eta)) / eta
    if src <= 0:
        raise Unphysical(
            f"measured {measured:.6g} SNU is at or below the loss floor 1 - eta = {1 - eta:.6g}"
        )
    return float(10.0 * np.log10(src))


@dataclass(frozen=True)
class HomodyneScan:
    phi: np.ndarray
    variance: np.ndarray  # SNU
    samples: np.ndarray  # 0 marks an analytic point
    sql_reference: float = 1.0

    def __post_init__(self):
        for name in ("phi", "variance", "samples"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if not (len(self.phi) == len(self.variance) == len(self.samples)):
            raise DomainError("scan columns have different lengths")
        if np.any(self.variance <= 0):
            raise DomainError("scan variances must be positive")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(SCAN_COLUMNS) + "\n")
        for p, v, n in zip(self.phi, self.variance, self.samples):
            buf.write(f"{fmt(p)},{fmt(v)},{int(n)}\n")
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def read_csv(cls, path: str | Path) -> "HomodyneScan":
        return cls.from_csv(Path(path).read_text())

    @classmethod
    def from_csv(cls, text: str) -> "HomodyneScan":
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r and not r[0].startswith("#")]
        if not rows:
            raise ParseError("empty scan file", 1)
        header = [h.strip() for h in rows[0]]
        for col in SCAN_COLUMNS:
            if col not in header:
                raise MissingColumn(col)
        idx = [header.index(c) for c in SCAN_COLUMNS]
        phi, var, n = [], [], []
        for lineno, row in enumerate(rows[1:], start=2):
            try:
                phi.append(float(row[idx[0]]))
                var.append(float(row[idx[1]]))
                n.append(int(row[idx[2]]))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad scan row {row!r}: {exc}", lineno) from exc
        if not phi:
            raise ParseError("scan has no data rows", len(rows))
        return cls(np.array(phi), np.array(var), np.array(n))


def synthesize_scan(
    state: GaussianState,
    chain: DetectionChain,
    phi_grid: Sequence[float],
    samples_per_point: int = 0,
    seed: int | None = 0,
) -> HomodyneScan:
    """Homodyne trace over phi_grid; samples_per_point = 0 gives exact variances.

    Sampled points draw quadrature values from the detected distribution and
    report their sample variance, so repeated seeds give identical traces.
    """
    phi = np.asarray(phi_grid, dtype=float)
    if phi.size == 0:
        raise DomainError("phase grid is empty")
    exact = np.array([detect(state, chain, p) for p in phi])
    if samples_per_point == 0:
        return HomodyneScan(phi, exact, np.zeros(phi.size, dtype=int))
    if samples_per_point < 2:
        raise DomainError("sampled scans need at least 2 samples per point")
    rng = np.random.default_rng(seed)
    sd = np.sqrt(exact * VACUUM_VARIANCE)
    draws = rng.standard_normal((phi.size, samples_per_point)) * sd[:, None]
    var = draws.var(axis=1, ddof=1) / VACUUM_VARIANCE
    return HomodyneScan(phi, var, np.full(phi.size, samples_per_point))


@dataclass(frozen=True)
class CovarianceFit:
    state: GaussianState
    residual: float  # rms misfit, SNU
    stderr: np.ndarray  # standard errors of (S00, S11, S01) in quadrature units


def fit_covariance(scan: HomodyneScan) -> CovarianceFit:
    """Least-squares V(phi) = S00 cos^2 + S11 sin^2 + S01 sin 2phi (zero mean state).

    Sampled points are weighted by their expected standard error
    V * sqrt(2 / (n - 1)); analytic points get unit weight.
    """
    phi = np.asarray(scan.phi, dtype=float)
    y = np.asarray(scan.variance, dtype=float) * VACUUM_VARIANCE * scan.sql_reference
    X = np.column_stack([np.cos(phi) ** 2, np.sin(phi) ** 2, np.sin(2 * phi)])
    distinct = np.unique(np.round(np.mod(phi, np.pi), 12))
    if distinct.size < 3 or np.linalg.matrix_rank(X, tol=1e-10) < 3:
        raise RankDeficient("scan phases do not determine the three covariance entries")
    n = np.asarray(scan.samples, dtype=float)
    sampled = n > 1
    sigma = np.ones_like(y)
    if np.any(sampled):
        sigma[sampled] = y[sampled] * np.sqrt(2.0 / (n[sampled] - 1.0))
    w = 1.0 / sigma
    coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid**2)) / VACUUM_VARIANCE)
    cov_coef = np.linalg.inv((X * w[:, None]).T @ (X * w[:, None]))
    if not np.any(sampled):
        dof = max(1, len(y) - 3)
        cov_coef = cov_coef * float(np.sum((resid * w) ** 2) / dof)
    stderr = np.sqrt(np.clip(np.diag(cov_coef), 0.0, None))
    s00, s11, s01 = coef
    state = GaussianState(np.zeros(2), np.array([[s00, s01], [s01, s11]]))
    return CovarianceFit(state, rms, stderr)


@dataclass(frozen=True)
class WignerGrid:
    half_width: float
    n: int
    values: np.ndarray  # values[i, j] = W(x_j, p_i): rows are p, columns x

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n)

    def integral(self) -> float:
        from scipy.integrate import trapezoid

        ax = self.axis
        return float(trapezoid(trapezoid(self.values, ax, axis=1), ax))

    def to_csv(self) -> str:
        lines = [f"# half_width={fmt(self.half_width)}", f"# n={self.n}"]
        lines += [",".join(fmt(v) for v in row) for row in self.values]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "WignerGrid":
        meta = {}
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line.strip():
                try:
                    rows.append([float(v) for v in line.split(",")])
                except ValueError as exc:
                    raise ParseError(str(exc), lineno) from exc
        if "half_width" not in meta or "n" not in meta:
            raise ParseError("missing '# half_width=' or '# n=' header")
        return cls(float(meta["half_width"]), int(meta["n"]), np.array(rows))


def wigner_grid(state: GaussianState, half_width: float, n_points: int) -> WignerGrid:
    if n_points < 2:
        raise DomainError("n_points must be >= 2")
    if not half_width > 0:
        raise DomainError("half_width must be positive")
    ax = np.linspace(-half_width, half_width, n_points)
    xx, pp = np.meshgrid(ax, ax)
    return WignerGrid(float(half_width), int(n_points), wigner(state, xx, pp))


def scan_summary(state: GaussianState) -> dict[str, float]:
    lam, angle = min_variance(state)
    lam_max = float(np.trace(state.cov) - lam)
    return {
        "min_db": float(10 * np.log10(lam / VACUUM_VARIANCE)),
        "max_db": float(10 * np.log10(lam_max / VACUUM_VARIANCE)),
        "angle_rad": angle,
    }
