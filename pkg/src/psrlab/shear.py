"""Phenomenological self-rotation medium: thin-slice shear interleaved with absorption."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .gaussian import (
    GaussianState,
    SymplecticTransform,
    VACUUM_VARIANCE,
    apply_loss,
    apply_symplectic,
)


@dataclass(frozen=True)
class ShearMediumConfig:
    g_total: float
    alpha_total: float = 0.0
    n_slices: int = 1000

    def __post_init__(self):
        if int(self.n_slices) != self.n_slices or self.n_slices < 1:
            raise DomainError(f"n_slices must be a positive integer, got {self.n_slices}")
        if not self.alpha_total >= 0:
            raise DomainError(f"alpha_total must be >= 0, got {self.alpha_total}")


def shear_step(state: GaussianState, dg: float) -> GaussianState:
    return apply_symplectic(state, SymplecticTransform.shear(dg))


def propagate(state: GaussianState, cfg: ShearMediumConfig) -> GaussianState:
    """Alternate shear and loss slice by slice (shear first within each slice).

    The slice loop is folded into matrix form: the per-slice map is affine in
    the covariance, so n repetitions only need one 2x2 product per slice.
    """
    n = int(cfg.n_slices)
    dg = cfg.g_total / n
    eta = float(np.exp(-cfg.alpha_total / n))
    if cfg.alpha_total == 0.0:
        # lossless: slices compose exactly to one shear
        return shear_step(state, cfg.g_total)
    s = SymplecticTransform.shear(dg).matrix
    t = np.sqrt(eta)
    mean = np.array(state.mean)
    cov = np.array(state.cov)
    vac = (1.0 - eta) * VACUUM_VARIANCE * np.eye(2)
    for _ in range(n):
        mean = t * (s @ mean)
        cov = eta * (s @ cov @ s.T) + vac
    return GaussianState(mean, cov)


def propagate_sliced(state: GaussianState, cfg: ShearMediumConfig) -> GaussianState:
    """Literal slice loop through the public gaussian operations; reference path."""
    dg = cfg.g_total / cfg.n_slices
    eta = float(np.exp(-cfg.alpha_total / cfg.n_slices))
    for _ in range(cfg.n_slices):
        state = apply_loss(shear_step(state, dg), eta)
    return state


def pure_shear_min_variance(g: float) -> float:
    """Closed-form minimum quadrature variance of vacuum after a shear g."""
    g = float(g)
    return 0.25 * ((2.0 + g * g) - abs(g) * np.sqrt(g * g + 4.0)) / 2.0
