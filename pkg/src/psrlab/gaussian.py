"""Single-mode Gaussian quadrature algebra.

Quadratures follow X = (a + a^dag)/2 and P = (a - a^dag)/(2i), so the vacuum
has variance 1/4 in every quadrature and a shot-noise unit (SNU) is a variance
divided by 1/4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonSymplectic, SingularCovariance

VACUUM_VARIANCE = 0.25


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaussianState:
    """Mean quadrature pair and 2x2 covariance of the signal mode."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    cov: np.ndarray = field(default_factory=lambda: VACUUM_VARIANCE * np.eye(2))

    def __post_init__(self):
        mean = _frozen(self.mean).reshape(2)
        cov = np.array(self.cov, dtype=float).reshape(2, 2)
        # symmetric by construction
        cov = _frozen(0.5 * (cov + cov.T))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.cov))

    def is_physical(self, tol: float = 1e-12) -> bool:
        """Positive definite and above the Heisenberg bound det >= 1/16."""
        eig = np.linalg.eigvalsh(self.cov)
        return bool(eig[0] > 0 and self.det >= VACUUM_VARIANCE**2 - tol)


@dataclass(frozen=True)
class SymplecticTransform:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix).reshape(2, 2)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def rotation(cls, phi: float) -> "SymplecticTransform":
        c, s = np.cos(phi), np.sin(phi)
        return cls(np.array([[c, -s], [s, c]]))

    @classmethod
    def shear(cls, g: float) -> "SymplecticTransform":
        """P -> P - g X, the self-rotation shear."""
        return cls(np.array([[1.0, 0.0], [-g, 1.0]]))

    @classmethod
    def squeezer(cls, r: float) -> "SymplecticTransform":
        return cls(np.diag([np.exp(-r), np.exp(r)]))


@dataclass(frozen=True)
class NoiseFigure:
    """A variance expressed in shot-noise units and in dB."""

    snu: float
    value_db: float

    def __post_init__(self):
        if not self.snu > 0:
            raise DomainError(f"noise figure needs snu > 0, got {self.snu}")


def vacuum() -> GaussianState:
    return GaussianState(np.zeros(2), VACUUM_VARIANCE * np.eye(2))


def apply_symplectic(state: GaussianState, S: SymplecticTransform | np.ndarray) -> GaussianState:
    m = S.matrix if isinstance(S, SymplecticTransform) else np.asarray(S, dtype=float)
    det = np.linalg.det(m)
    if abs(det - 1.0) > 1e-9:
        raise NonSymplectic(f"det S = {det!r}, expected 1")
    return GaussianState(m @ state.mean, m @ state.cov @ m.T)


def apply_loss(state: GaussianState, eta: float) -> GaussianState:
    """Beamsplitter of power transmission eta mixing in vacuum."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"transmission eta must lie in [0, 1], got {eta}")
    cov = eta * state.cov + (1.0 - eta) * VACUUM_VARIANCE * np.eye(2)
    return GaussianState(np.sqrt(eta) * state.mean, cov)


def quadrature_variance(state: GaussianState, phi: float) -> float:
    c = np.array([np.cos(phi), np.sin(phi)])
    return float(c @ state.cov @ c)


def min_variance(state: GaussianState) -> tuple[float, float]:
    """Smallest quadrature variance and the angle in [0, pi) where it occurs.

    An isotropic covariance returns angle 0.
    """
    (a, b), (_, d) = state.cov
    lam = 0.5 * (a + d) - np.hypot(0.5 * (a - d), b)
    if abs(b) < 1e-300 and abs(a - d) < 1e-300:
        return float(lam), 0.0
    # minimising cos^2 a + sin^2 d + sin2 b: stationary at tan 2phi = 2b/(a-d)
    angle = 0.5 * np.arctan2(-2.0 * b, d - a)
    return float(lam), float(np.mod(angle, np.pi))


def max_variance(state: GaussianState) -> tuple[float, float]:
    lam, angle = min_variance(state)
    return float(np.trace(state.cov) - lam), float(np.mod(angle + 0.5 * np.pi, np.pi))


def wigner(state: GaussianState, x, p):
    """Gaussian Wigner function; broadcasts over array-valued x and p."""
    det = state.det
    if not det > 0:
        raise SingularCovariance(f"det cov = {det!r}")
    inv = np.linalg.inv(state.cov)
    dx = np.asarray(x, dtype=float) - state.mean[0]
    dp = np.asarray(p, dtype=float) - state.mean[1]
    quad = inv[0, 0] * dx * dx + 2.0 * inv[0, 1] * dx * dp + inv[1, 1] * dp * dp
    w = np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))
    return float(w) if np.ndim(w) == 0 else w


def to_snu(variance: float) -> NoiseFigure:
    if not variance > 0:
        raise DomainError(f"variance must be positive, got {variance}")
    snu = variance / VACUUM_VARIANCE
    return NoiseFigure(snu=snu, value_db=10.0 * np.log10(snu))


def from_db(db: float) -> NoiseFigure:
    if not np.isfinite(db):
        raise DomainError(f"dB value must be finite, got {db}")
    return NoiseFigure(snu=10.0 ** (db / 10.0), value_db=float(db))


def snu_to_db(snu: float) -> float:
    if not snu > 0:
        raise DomainError(f"SNU must be positive, got {snu}")
    return float(10.0 * np.log10(snu))
