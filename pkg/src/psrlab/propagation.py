"""Slice-by-slice propagation of the signal-mode noise spectrum through the vapor.

Atomic fluctuations obey dy/dt = A y + sqrt(k1) S q + f with q = (X, P) the
signal quadratures and <f f^T> = 2 D delta(t - t') delta(z - z') / n_lin.
The field picks up dq/dz = sqrt(k1) n_lin R y. Solving the atoms at sideband
frequency omega and eliminating y gives a linear ODE in z for the signal
quadratures with a white-noise source, integrated exactly over each slice.

Per-atom coupling k1 and linear density n_lin only enter as the product
k1 n_lin L = gamma * OD / 4, where OD is the resonant optical depth of a
unit-strength transition (:attr:`EnsembleConfig.optical_depth`).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .atoms import (
    Axis,
    CouplingTable,
    DecayModel,
    DriveField,
    EnsembleConfig,
    LevelScheme,
    MagneticField,
    TWO_PI,
    build_system,
    default_x_scheme,
    diffusion_matrix,
    drift_matrix,
    drive_coherence,
    rabi_from_power,
    signal_coupling_vectors,
    steady_state,
)
from .errors import DomainError, NonConverged, PsrLabError, SingularResolvent
from .gaussian import VACUUM_VARIANCE, GaussianState, max_variance, min_variance, vacuum

DEFAULT_OMEGA = TWO_PI * 3e6
DEFAULT_SLICES = 200


@dataclass(frozen=True)
class AnalysisFrequency:
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        if not self.omega >= 0:
            raise DomainError(f"analysis frequency must be >= 0, got {self.omega}")


@dataclass(frozen=True)
class SliceTransfer:
    """q_out = T q_in + noise with symmetrised spectral covariance N_add.

    At nonzero sideband frequency the atomic response has a phase lag, so T
    is a complex 2x2 matrix acting on the quadrature Fourier amplitudes and
    N_add is Hermitian.
    """

    T: np.ndarray
    N_add: np.ndarray


@dataclass(frozen=True)
class FieldCoupling:
    """Signal-atom coupling of one slice: source, readout and strength Lambda*dz."""

    source: np.ndarray
    readout: np.ndarray
    strength: float


@dataclass(frozen=True)
class MediumConfig:
    """Everything the microscopic tier needs besides the input state."""

    scheme: LevelScheme
    couplings: CouplingTable
    decay: DecayModel
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    drive: DriveField = field(default_factory=DriveField)
    b: MagneticField = field(default_factory=MagneticField)
    omega: float = DEFAULT_OMEGA
    quant_axis: Axis | None = None
    deplete_drive: bool = True

    @classmethod
    def default(cls, **overrides) -> "MediumConfig":
        scheme, couplings, decay = default_x_scheme()
        return cls(scheme, couplings, decay, **overrides)

    @property
    def axis(self) -> Axis:
        return self.quant_axis or self.b.dominant_axis()

    @property
    def coupling_rate(self) -> float:
        """Lambda = gamma * OD / 4 (rad/s)."""
        return self.decay.gamma * self.ensemble.optical_depth / 4.0


def resolvent(A: np.ndarray, omega: float) -> np.ndarray:
    """(-i omega - A)^-1, the atomic response at sideband frequency omega."""
    m = A.shape[0]
    mat = -1j * omega * np.eye(m) - A
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularResolvent(f"resolvent condition number {cond:.3g} at omega={omega:.6g}")
    return np.linalg.inv(mat)


def slice_generator(A, D, coupling: FieldCoupling, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit-strength field drift G and noise rate Q of the quadrature ODE."""
    R = resolvent(A, omega)
    G = coupling.readout @ R @ coupling.source
    RC = coupling.readout @ R
    Q = RC @ (2.0 * np.real(D)) @ RC.conj().T
    return G, 0.5 * (Q + Q.conj().T)


def slice_response(A, D, coupling: FieldCoupling, omega: float) -> SliceTransfer:
    """Exact transfer of one slice with coefficients frozen across it.

    T = exp(s G), N_add = int_0^s exp(u G) Q exp(u G)^dag du, evaluated with
    Van Loan's block-exponential construction.
    """
    G, Q = slice_generator(A, D, coupling, omega)
    s = coupling.strength
    if s == 0:
        return SliceTransfer(np.eye(2, dtype=complex), np.zeros((2, 2), dtype=complex))
    # scale so the block exponential stays O(1), then double back up
    halvings = max(0, int(np.ceil(np.log2(max(np.linalg.norm(G, 2) * s, 1e-300)))))
    h = s / 2**halvings
    block = np.zeros((4, 4), dtype=complex)
    block[:2, :2] = -G * h
    block[:2, 2:] = Q * h
    block[2:, 2:] = G.conj().T * h
    e = expm(block)
    T = e[2:, 2:].conj().T
    N = T @ e[:2, 2:]
    for _ in range(halvings):
        N = N + T @ N @ T.conj().T
        T = T @ T
    N = 0.5 * (N + N.conj().T)
    eig = np.linalg.eigvalsh(N)
    if eig[0] < -1e-10 * max(1.0, eig[-1]):
        raise PsrLabError(f"added-noise covariance not PSD (min eigenvalue {eig[0]:.3g})")
    return SliceTransfer(T, N)


@dataclass(frozen=True)
class SliceDiagnostics:
    z: float
    rabi: complex
    drift_max_real: float
    det_out: float


@dataclass(frozen=True)
class CellResult:
    state: GaussianState
    spectrum: np.ndarray  # Hermitian symmetrised spectral covariance of (X, P)
    transfer: np.ndarray
    diagnostics: tuple[SliceDiagnostics, ...] = ()

    @property
    def min_snu(self) -> float:
        return min_variance(self.state)[0] / VACUUM_VARIANCE

    @property
    def max_snu(self) -> float:
        return max_variance(self.state)[0] / VACUUM_VARIANCE

    @property
    def angle(self) -> float:
        return min_variance(self.state)[1]


def slice_model(cfg: MediumConfig, rabi: complex):
    """Atomic system, steady state, drift, diffusion and field coupling at one z."""
    system = build_system(
        cfg.scheme, cfg.couplings, cfg.decay, cfg.drive, cfg.b, cfg.axis, rabi=rabi
    )
    rho = steady_state(system)
    A = drift_matrix(system, rho)
    D = diffusion_matrix(system, rho)
    source, readout = signal_coupling_vectors(system, rho)
    return system, rho, A, D, source, readout


def _mean_field(cfg: MediumConfig, rabi: complex):
    system = build_system(
        cfg.scheme, cfg.couplings, cfg.decay, cfg.drive, cfg.b, cfg.axis, rabi=rabi
    )
    return system, steady_state(system)


def _clip_rabi(cfg: MediumConfig, rabi: complex) -> complex:
    # a fully absorbed drive leaves later slices undriven (passive)
    return 0j if abs(rabi) < 1e-12 * cfg.decay.gamma else complex(rabi)


def drive_gain(cfg: MediumConfig, system, rho, rabi: complex) -> complex:
    """Logarithmic derivative dln(Omega)/dzeta = i (gamma OD / 2) <K_d-> / Omega.

    Below a Rabi floor the ratio is taken from the linear-response limit so
    that an absorbed drive does not divide round-off by a vanishing field.
    """
    floor = 1e-6 * cfg.decay.gamma
    if abs(rabi) < floor:
        probe = floor * np.exp(1j * np.angle(rabi))
        system = build_system(
            cfg.scheme, cfg.couplings, cfg.decay, cfg.drive, cfg.b, cfg.axis, rabi=probe
        )
        rho = steady_state(system)
        rabi = probe
    return 1j * 2.0 * cfg.coupling_rate * drive_coherence(system, rho) / rabi


def propagate_cell(
    state: GaussianState | None = None,
    cfg: MediumConfig | None = None,
    n_slices: int = DEFAULT_SLICES,
    keep_diagnostics: bool = False,
) -> CellResult:
    """Compose slice transfers through the cell; the drive is re-solved each slice."""
    state = vacuum() if state is None else state
    cfg = MediumConfig.default() if cfg is None else cfg
    if int(n_slices) != n_slices or n_slices < 1:
        raise DomainError(f"n_slices must be a positive integer, got {n_slices}")
    S = np.array(state.cov, dtype=complex)
    T_tot = np.eye(2, dtype=complex)
    diags = []
    if cfg.ensemble.length == 0 or cfg.ensemble.optical_depth == 0:
        return CellResult(state, S, T_tot)
    lam = cfg.coupling_rate
    dzeta = 1.0 / n_slices
    rabi = complex(rabi_from_power(cfg.drive))
    deplete = cfg.deplete_drive and rabi != 0
    gain = 0j
    if deplete:
        system, rho = _mean_field(cfg, rabi)
        gain = drive_gain(cfg, system, rho, rabi)
    for k in range(n_slices):
        # midpoint drive: predict with the last gain, correct with the midpoint gain
        mid = rabi * np.exp(0.5 * gain * dzeta) if deplete else rabi
        mid = _clip_rabi(cfg, mid)
        system, rho, A, D, source, readout = slice_model(cfg, mid)
        st = slice_response(A, D, FieldCoupling(source, readout, lam * dzeta), cfg.omega)
        S = st.T @ S @ st.T.conj().T + st.N_add
        S = 0.5 * (S + S.conj().T)
        T_tot = st.T @ T_tot
        if keep_diagnostics:
            diags.append(
                SliceDiagnostics(
                    (k + 0.5) * dzeta,
                    mid,
                    float(np.max(np.linalg.eigvals(A).real)),
                    float(np.linalg.det(S.real)),
                )
            )
        if deplete and mid != 0:
            gain = drive_gain(cfg, system, rho, mid)
            rabi = _clip_rabi(cfg, rabi * np.exp(gain * dzeta))
        elif deplete:
            rabi = 0j
    out = GaussianState(np.real(T_tot) @ state.mean, S.real)
    return CellResult(out, S, T_tot, tuple(diags))


def propagate_converged(
    state: GaussianState | None = None,
    cfg: MediumConfig | None = None,
    n_slices: int = DEFAULT_SLICES,
    tol_snu: float = 1e-4,
    max_slices: int = 3200,
) -> CellResult:
    """Double the slice count until the minimum noise moves by at most tol_snu."""
    prev = propagate_cell(state, cfg, n_slices)
    n = n_slices
    while True:
        cur = propagate_cell(state, cfg, 2 * n)
        if abs(cur.min_snu - prev.min_snu) <= tol_snu:
            return cur
        n *= 2
        if n >= max_slices:
            raise NonConverged(
                f"min noise still moves by {abs(cur.min_snu - prev.min_snu):.3g} SNU at {2 * n} slices"
            )
        prev = cur


@dataclass(frozen=True)
class SweepPoint:
    index: int
    value: float
    min_snu: float = float("nan")
    max_snu: float = float("nan")
    angle: float = float("nan")
    det: float = float("nan")
    error: str = ""

    @property
    def min_db(self) -> float:
        return float(10 * np.log10(self.min_snu)) if self.min_snu > 0 else float("nan")

    @property
    def max_db(self) -> float:
        return float(10 * np.log10(self.max_snu)) if self.max_snu > 0 else float("nan")


def squeezing_vs(
    values: Sequence[float],
    make_cfg: Callable[[float], MediumConfig],
    n_slices: int = DEFAULT_SLICES,
    state: GaussianState | None = None,
    workers: int = 1,
) -> list[SweepPoint]:
    """One propagate_cell per grid value; failures are recorded and the sweep continues."""

    def run(item):
        i, v = item
        try:
            res = propagate_cell(state, make_cfg(v), n_slices)
        except (PsrLabError, np.linalg.LinAlgError) as exc:
            return SweepPoint(i, float(v), error=f"{type(exc).__name__}: {exc}")
        return SweepPoint(i, float(v), res.min_snu, res.max_snu, res.angle, res.state.det)

    items = list(enumerate(values))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            points = list(pool.map(run, items))
    else:
        points = [run(it) for it in items]
    return sorted(points, key=lambda p: p.index)


def with_overrides(cfg: MediumConfig, **kw) -> MediumConfig:
    """Replace nested fields: keys like 'drive.power' or 'b.b_x' or top-level names."""
    top = {}
    nested: dict[str, dict] = {}
    for key, val in kw.items():
        if "." in key:
            head, attr = key.split(".", 1)
            nested.setdefault(head, {})[attr] = val
        else:
            top[key] = val
    for head, attrs in nested.items():
        top[head] = replace(getattr(cfg, head), **attrs)
    return replace(cfg, **top)
