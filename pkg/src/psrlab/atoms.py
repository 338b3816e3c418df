"""Atomic level schemes, light-atom Hamiltonian and Heisenberg-Langevin coefficients.

Everything is expressed in angular frequency units (rad/s, hbar = 1). The
atomic state is a density matrix over the levels of a :class:`LevelScheme`;
fluctuations of the collective atomic operators are written in a real,
orthonormal basis of traceless Hermitian matrices (generalised Gell-Mann), so
the drift matrix is real and the symmetrised diffusion matrix is real.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Literal, Mapping

import numpy as np

from .errors import (
    DegenerateSteadyState,
    DomainError,
    NegativeDiffusion,
    NonHermitian,
    SchemeMismatch,
    UnstableDrift,
)

TWO_PI = 2.0 * np.pi

# 87Rb D1 reference data (Steck); only used to map lab units onto rad/s.
GAMMA_D1 = TWO_PI * 5.746e6
I_SAT_D1 = 44.9  # W/m^2, i.e. 4.49 mW/cm^2
MU_B = TWO_PI * 1.39962e6  # rad/s per gauss
G_F_GROUND = 0.5
WAVELENGTH_D1 = 794.979e-9
MASS_RB87 = 86.909180 * 1.66053907e-27
K_B = 1.380649e-23
HFS_EXCITED_D1 = TWO_PI * 814.5e6  # F'=1 -> F'=2 splitting

POLARIZATIONS = {"sigma+": 1, "pi": 0, "sigma-": -1}
Polarization = Literal["sigma+", "pi", "sigma-"]
Axis = Literal["x", "z"]


# ---------------------------------------------------------------------------
# level schemes


@dataclass(frozen=True)
class Level:
    label: str
    manifold: Literal["ground", "excited"]
    m: float
    energy_offset: float = 0.0


@dataclass(frozen=True)
class LevelScheme:
    levels: tuple[Level, ...]
    g_factor_ground: float = G_F_GROUND
    g_factor_excited: float = G_F_GROUND

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        labels = [lv.label for lv in self.levels]
        if len(set(labels)) != len(labels):
            raise SchemeMismatch(f"duplicate level labels in {labels}")
        kinds = {lv.manifold for lv in self.levels}
        if kinds != {"ground", "excited"}:
            raise SchemeMismatch("scheme needs at least one ground and one excited level")
        for lv in self.levels:
            if not np.isfinite(lv.energy_offset) or not np.isfinite(lv.m):
                raise SchemeMismatch(f"non-finite data on level {lv.label!r}")

    @property
    def n(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        for i, lv in enumerate(self.levels):
            if lv.label == label:
                return i
        raise SchemeMismatch(f"unknown level {label!r}")

    def indices(self, manifold: str) -> list[int]:
        return [i for i, lv in enumerate(self.levels) if lv.manifold == manifold]

    def projector(self, manifold: str) -> np.ndarray:
        p = np.zeros((self.n, self.n))
        for i in self.indices(manifold):
            p[i, i] = 1.0
        return p

    def spin_operators(self, manifold: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(F_x, F_y, F_z) embedded in the full level space.

        The sublevels of a manifold are assumed to form one angular-momentum
        multiplet F = (count - 1)/2 labelled by m.
        """
        idx = self.indices(manifold)
        ms = {self.levels[i].m: i for i in idx}
        F = (len(idx) - 1) / 2.0
        expected = [F - k for k in range(len(idx))]
        if sorted(ms, reverse=True) != expected:
            raise SchemeMismatch(f"{manifold} sublevels {sorted(ms)} do not form an F={F} multiplet")
        n = self.n
        fz = np.zeros((n, n), dtype=complex)
        fp = np.zeros((n, n), dtype=complex)
        for m, i in ms.items():
            fz[i, i] = m
            if m + 1 in ms:
                fp[ms[m + 1], i] = np.sqrt(F * (F + 1) - m * (m + 1))
        fx = 0.5 * (fp + fp.conj().T)
        fy = -0.5j * (fp - fp.conj().T)
        return fx, fy, fz

    def mirrored(self) -> "LevelScheme":
        """Relabel m -> -m; used for symmetry checks."""
        return replace(self, levels=tuple(replace(lv, m=-lv.m) for lv in self.levels))


@dataclass(frozen=True)
class Coupling:
    ground: str
    excited: str
    polarization: Polarization
    dipole_weight: float
    # "both": the entry is driven by whichever field has weight on its polarization
    role: Literal["drive", "signal", "both"] = "both"


@dataclass(frozen=True)
class CouplingTable:
    entries: tuple[Coupling, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def validate(self, scheme: LevelScheme) -> None:
        for c in self.entries:
            g = scheme.levels[scheme.index(c.ground)]
            e = scheme.levels[scheme.index(c.excited)]
            if g.manifold != "ground" or e.manifold != "excited":
                raise SchemeMismatch(f"coupling {c.ground}->{c.excited} has wrong manifolds")
            if c.polarization not in POLARIZATIONS:
                raise SchemeMismatch(f"unknown polarization {c.polarization!r}")
            if not np.isclose(e.m - g.m, POLARIZATIONS[c.polarization]):
                raise SchemeMismatch(
                    f"{c.polarization} coupling {c.ground}->{c.excited} violates dm selection rule"
                )

    def raising_operator(self, scheme: LevelScheme, weights: Mapping[str, complex], role: str) -> np.ndarray:
        """Absorption operator sum_q w_q d_q |e><g| for a field with spherical weights w_q."""
        k = np.zeros((scheme.n, scheme.n), dtype=complex)
        for c in self.entries:
            if c.role not in ("both", role):
                continue
            w = weights.get(c.polarization, 0.0)
            if w == 0:
                continue
            k[scheme.index(c.excited), scheme.index(c.ground)] += w * c.dipole_weight
        return k


@dataclass(frozen=True)
class DecayModel:
    """Relaxation data: spontaneous decay, transit relaxation, optical dephasing.

    ``branching`` maps (excited, ground) -> fraction of the excited-state decay
    rate ``gamma`` feeding that ground level. Decay channels are grouped by
    polarization so that Zeeman coherences are transferred as well as
    populations.
    """

    gamma: float = GAMMA_D1
    branching: Mapping[tuple[str, str], float] = field(default_factory=dict)
    ground_relax: float = TWO_PI * 10e3
    excited_dephasing: float = 0.0

    def validate(self, scheme: LevelScheme) -> None:
        for rate in (self.gamma, self.ground_relax, self.excited_dephasing):
            if not rate >= 0:
                raise DomainError(f"decay rates must be >= 0, got {rate}")
        totals = {scheme.levels[i].label: 0.0 for i in scheme.indices("excited")}
        for (e, g), frac in self.branching.items():
            if scheme.levels[scheme.index(e)].manifold != "excited":
                raise SchemeMismatch(f"branching source {e!r} is not excited")
            if scheme.levels[scheme.index(g)].manifold != "ground":
                raise SchemeMismatch(f"branching target {g!r} is not ground")
            if frac < 0:
                raise DomainError(f"negative branching fraction {e}->{g}")
            totals[e] += frac
        for e, tot in totals.items():
            if abs(tot - 1.0) > 1e-12:
                raise DomainError(f"branching of {e!r} sums to {tot!r}, expected 1")

    def jump_operators(self, scheme: LevelScheme, couplings: CouplingTable) -> list[np.ndarray]:
        n = scheme.n
        ops = []
        if self.gamma > 0:
            # one jump operator per emitted polarization; sign of the dipole
            # element fixes the relative phase inside a channel
            by_pol: dict[str, np.ndarray] = {}
            for (e, g), frac in self.branching.items():
                if frac == 0:
                    continue
                dm = scheme.levels[scheme.index(e)].m - scheme.levels[scheme.index(g)].m
                pol = {1: "sigma+", 0: "pi", -1: "sigma-"}.get(int(round(dm)), f"dm={dm}")
                sign = 1.0
                for c in couplings.entries:
                    if c.ground == g and c.excited == e and c.dipole_weight != 0:
                        sign = np.sign(c.dipole_weight)
                        break
                op = by_pol.setdefault(pol, np.zeros((n, n), dtype=complex))
                op[scheme.index(g), scheme.index(e)] += sign * np.sqrt(self.gamma * frac)
            ops.extend(by_pol.values())
        if self.ground_relax > 0:
            # transit reset: every level is replaced by the isotropic ground mixture
            ground = scheme.indices("ground")
            rate = self.ground_relax / len(ground)
            for gi in ground:
                for k in range(n):
                    op = np.zeros((n, n), dtype=complex)
                    op[gi, k] = np.sqrt(rate)
                    ops.append(op)
        if self.excited_dephasing > 0:
            ops.append(np.sqrt(2.0 * self.excited_dephasing) * scheme.projector("excited").astype(complex))
        return ops

    def coherence_decay_rates(self, scheme: LevelScheme) -> np.ndarray:
        """Bare decay rates Gamma_mu_nu of each density-matrix element (no fields)."""
        n = scheme.n
        pop = np.full(n, self.ground_relax)
        for i in scheme.indices("excited"):
            pop[i] += self.gamma
        rates = 0.5 * (pop[:, None] + pop[None, :])
        exc = np.array([lv.manifold == "excited" for lv in scheme.levels])
        rates += self.excited_dephasing * (exc[:, None] != exc[None, :])
        return rates


# ---------------------------------------------------------------------------
# fields and ensemble


@dataclass(frozen=True)
class DriveField:
    power: float = 6e-3  # W
    waist: float = 2e-3  # m
    detuning: float = 0.0  # rad/s, relative to the modelled transition
    polarization: str = "y"

    def __post_init__(self):
        if not self.power >= 0:
            raise DomainError(f"drive power must be >= 0, got {self.power}")
        if self.polarization != "y":
            raise DomainError("the drive is linearly polarized along y")

    @property
    def intensity(self) -> float:
        if not self.waist > 0:
            raise DomainError(f"beam waist must be positive, got {self.waist}")
        return 2.0 * self.power / (np.pi * self.waist**2)


@dataclass(frozen=True)
class MagneticField:
    b_x: float = 0.0  # gauss, transverse
    b_z: float = 0.0  # gauss, along propagation

    def __post_init__(self):
        if not (np.isfinite(self.b_x) and np.isfinite(self.b_z)):
            raise DomainError("magnetic field components must be finite")

    def dominant_axis(self) -> Axis:
        return "z" if abs(self.b_z) > abs(self.b_x) else "x"


def doppler_resonant_fraction(temperature: float, gamma: float = GAMMA_D1) -> float:
    """Ratio of Doppler-broadened to homogeneous peak absorption cross-section."""
    u = np.sqrt(2.0 * K_B * temperature / MASS_RB87)
    ku = TWO_PI / WAVELENGTH_D1 * u
    return float(np.sqrt(np.pi) * 0.5 * gamma / ku)


DOPPLER_FRACTION_74C = doppler_resonant_fraction(347.15)


@dataclass(frozen=True)
class EnsembleConfig:
    """Vapor column seen by the beam.

    ``resonant_fraction`` scales the vapor density down to the atoms that are
    resonant within the homogeneous linewidth; it stands in for Doppler
    averaging, which is not modelled.
    """

    number_density: float = 7.6e17  # m^-3
    length: float = 0.075  # m
    temperature: float = 347.15  # K, diagnostic only
    resonant_fraction: float = DOPPLER_FRACTION_74C
    cross_section: float = 3.0 * WAVELENGTH_D1**2 / (2.0 * np.pi)

    def __post_init__(self):
        if not self.number_density > 0:
            raise DomainError(f"number density must be positive, got {self.number_density}")
        if not self.length >= 0:
            raise DomainError(f"cell length must be >= 0, got {self.length}")
        if not 0 <= self.resonant_fraction <= 1:
            raise DomainError("resonant_fraction must lie in [0, 1]")

    @property
    def optical_depth(self) -> float:
        """Resonant intensity optical depth of a unit-strength transition."""
        return self.number_density * self.resonant_fraction * self.cross_section * self.length

    def atom_count(self, waist: float) -> float:
        return self.number_density * np.pi * waist**2 * self.length


def rb_vapor_density(temperature: float) -> float:
    """Saturated Rb number density (m^-3) over liquid Rb, Steck's vapor-pressure fit."""
    t = float(temperature)
    log_p_torr = 15.88253 - 4529.635 / t + 0.00058663 * t - 2.99138 * np.log10(t)
    return 10.0**log_p_torr * 133.322 / (K_B * t)


def transit_rate(temperature: float, waist: float) -> float:
    """Mean thermal speed over the beam diameter, in rad/s."""
    vbar = np.sqrt(8.0 * K_B * temperature / (np.pi * MASS_RB87))
    return float(vbar / (2.0 * waist))


def rabi_from_power(drive: DriveField, gamma: float = GAMMA_D1, i_sat: float = I_SAT_D1) -> float:
    """Peak Rabi frequency of a unit-strength transition, rad/s."""
    return float(gamma * np.sqrt(drive.intensity / (2.0 * i_sat)))


# ---------------------------------------------------------------------------
# geometry


_SQRT_HALF = np.sqrt(0.5)


def _spherical_weights(vec: np.ndarray) -> dict[str, complex]:
    """Components eps_q = e_q^* . vec in the spherical basis of the local frame."""
    ex, ey, ez = vec
    return {
        "sigma+": complex(-_SQRT_HALF * (ex - 1j * ey)),
        "pi": complex(ez),
        "sigma-": complex(_SQRT_HALF * (ex + 1j * ey)),
    }


# lab vectors expressed in the frame whose z' axis is the quantization axis
_FRAMES = {
    # (x', y', z') = (x, y, z)
    "z": np.eye(3),
    # (x', y', z') = (y, z, x): rows map lab (x, y, z) -> local
    "x": np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
}


def to_local_frame(lab_vec, quant_axis: Axis) -> np.ndarray:
    try:
        rot = _FRAMES[quant_axis]
    except KeyError:
        raise DomainError(f"quantization axis must be 'x' or 'z', got {quant_axis!r}") from None
    return rot @ np.asarray(lab_vec, dtype=float)


def polarization_decomposition(quant_axis: Axis) -> dict[str, dict[str, complex]]:
    """Spherical weights of the y-polarized drive and x-polarized signal."""
    # frame rows are the local axes written in lab coordinates
    rot = _FRAMES.get(quant_axis)
    if rot is None:
        raise DomainError(f"quantization axis must be 'x' or 'z', got {quant_axis!r}")
    drive = _spherical_weights(rot @ np.array([0.0, 1.0, 0.0]))
    signal = _spherical_weights(rot @ np.array([1.0, 0.0, 0.0]))
    return {"drive": drive, "signal": signal}


# ---------------------------------------------------------------------------
# default scheme


def default_x_scheme(ground_relax: float = TWO_PI * 10e3) -> tuple[LevelScheme, CouplingTable, DecayModel]:
    """Two ground and two excited sublevels (J=1/2 -> J'=1/2 pair).

    sigma+ couples g- -> e+ and sigma- couples g+ -> e- with equal strength;
    the pi couplings g- -> e- and g+ -> e+ are included so that the scheme is
    rotationally covariant and the choice of quantization axis is a change of
    basis only. Dipole weights are Clebsch-Gordan coefficients.
    """
    levels = (
        Level("g-", "ground", -0.5),
        Level("g+", "ground", 0.5),
        Level("e-", "excited", -0.5),
        Level("e+", "excited", 0.5),
    )
    scheme = LevelScheme(levels)
    w_sigma = np.sqrt(2.0 / 3.0)
    w_pi = np.sqrt(1.0 / 3.0)
    couplings = CouplingTable(
        (
            Coupling("g-", "e+", "sigma+", -w_sigma),
            Coupling("g+", "e-", "sigma-", w_sigma),
            Coupling("g-", "e-", "pi", -w_pi),
            Coupling("g+", "e+", "pi", w_pi),
        )
    )
    branching = {(c.excited, c.ground): c.dipole_weight**2 for c in couplings.entries}
    decay = DecayModel(branching=branching, ground_relax=ground_relax)
    return scheme, couplings, decay


def clebsch_gordan(j1: float, m1: float, j2: float, m2: float, j: float, m: float) -> float:
    """<j1 m1; j2 m2 | j m> by the Racah formula."""
    from math import factorial, sqrt

    if abs(m1 + m2 - m) > 1e-12 or not abs(j1 - j2) <= j <= j1 + j2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0

    def f(x: float) -> int:
        return factorial(int(round(x)))

    pre = sqrt(
        (2 * j + 1)
        * f(j + j1 - j2)
        * f(j - j1 + j2)
        * f(j1 + j2 - j)
        / f(j1 + j2 + j + 1)
    )
    pre *= sqrt(f(j + m) * f(j - m) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2))
    total = 0.0
    for k in range(0, int(round(j1 + j2 - j)) + 1):
        args = (j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k)
        if min(args) < -1e-12:
            continue
        total += (-1) ** k / (f(k) * np.prod([f(a) for a in args]))
    return float(pre * total)


def hyperfine_scheme(
    f_ground: float, f_excited: float, ground_relax: float = TWO_PI * 10e3
) -> tuple[LevelScheme, CouplingTable, DecayModel]:
    """Closed F -> F' Zeeman manifold with Clebsch-Gordan dipole weights.

    Branching fractions are the squared weights, which sum to one for every
    excited sublevel.
    """
    def mlist(F):
        return [-F + k for k in range(int(round(2 * F)) + 1)]

    def lab(prefix, m):
        return f"{prefix}{m:+g}"

    levels = [Level(lab("g", m), "ground", m) for m in mlist(f_ground)]
    levels += [Level(lab("e", m), "excited", m) for m in mlist(f_excited)]
    scheme = LevelScheme(tuple(levels))
    entries = []
    for mg in mlist(f_ground):
        for q, pol in ((1, "sigma+"), (0, "pi"), (-1, "sigma-")):
            me = mg + q
            w = clebsch_gordan(f_ground, mg, 1, q, f_excited, me)
            if abs(w) > 1e-14:
                entries.append(Coupling(lab("g", mg), lab("e", me), pol, w))
    couplings = CouplingTable(tuple(entries))
    branching = {(c.excited, c.ground): c.dipole_weight**2 for c in couplings.entries}
    return scheme, couplings, DecayModel(branching=branching, ground_relax=ground_relax)


# ---------------------------------------------------------------------------
# structured-text (JSON) round trip for schemes


def scheme_to_dict(scheme: LevelScheme, couplings: CouplingTable, decay: DecayModel) -> dict:
    return {
        "levels": [
            {"label": lv.label, "manifold": lv.manifold, "m": lv.m, "energy_offset": lv.energy_offset}
            for lv in scheme.levels
        ],
        "g_factor_ground": scheme.g_factor_ground,
        "g_factor_excited": scheme.g_factor_excited,
        "couplings": [
            {
                "ground": c.ground,
                "excited": c.excited,
                "polarization": c.polarization,
                "dipole_weight": c.dipole_weight,
                "role": c.role,
            }
            for c in couplings.entries
        ],
        "decay": {
            "gamma": decay.gamma,
            "ground_relax": decay.ground_relax,
            "excited_dephasing": decay.excited_dephasing,
            "branching": [{"excited": e, "ground": g, "fraction": f} for (e, g), f in decay.branching.items()],
        },
    }


def scheme_from_dict(data: Mapping) -> tuple[LevelScheme, CouplingTable, DecayModel]:
    try:
        scheme = LevelScheme(
            tuple(Level(**lv) for lv in data["levels"]),
            g_factor_ground=float(data.get("g_factor_ground", G_F_GROUND)),
            g_factor_excited=float(data.get("g_factor_excited", G_F_GROUND)),
        )
        couplings = CouplingTable(tuple(Coupling(**c) for c in data["couplings"]))
        dec = data["decay"]
        decay = DecayModel(
            gamma=float(dec.get("gamma", GAMMA_D1)),
            ground_relax=float(dec.get("ground_relax", TWO_PI * 10e3)),
            excited_dephasing=float(dec.get("excited_dephasing", 0.0)),
            branching={(b["excited"], b["ground"]): float(b["fraction"]) for b in dec["branching"]},
        )
    except (KeyError, TypeError) as exc:
        raise SchemeMismatch(f"malformed scheme description: {exc}") from exc
    couplings.validate(scheme)
    decay.validate(scheme)
    return scheme, couplings, decay


def load_scheme(path: str | Path) -> tuple[LevelScheme, CouplingTable, DecayModel]:
    return scheme_from_dict(json.loads(Path(path).read_text()))


def save_scheme(path: str | Path, scheme, couplings, decay) -> None:
    Path(path).write_text(json.dumps(scheme_to_dict(scheme, couplings, decay), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Hamiltonian and Liouvillian


@dataclass(frozen=True)
class AtomicSystem:
    """Single-atom model at fixed classical drive: H, jump operators, signal coupling."""

    scheme: LevelScheme
    hamiltonian: np.ndarray
    jump_ops: tuple[np.ndarray, ...]
    drive_raising: np.ndarray  # unit-Rabi absorption operator of the drive polarization
    signal_raising: np.ndarray  # absorption operator of the signal polarization

    @property
    def n(self) -> int:
        return self.scheme.n

    @cached_property
    def basis(self) -> np.ndarray:
        return hermitian_basis(self.n)

    @cached_property
    def liouvillian(self) -> np.ndarray:
        return liouvillian(self.hamiltonian, self.jump_ops)

    def adjoint(self, op: np.ndarray) -> np.ndarray:
        """Heisenberg-picture generator applied to an operator."""
        h = self.hamiltonian
        out = 1j * (h @ op - op @ h)
        for L in self.jump_ops:
            Ld = L.conj().T
            LdL = Ld @ L
            out += Ld @ op @ L - 0.5 * (LdL @ op + op @ LdL)
        return out

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Schroedinger-picture generator L(rho)."""
        h = self.hamiltonian
        out = -1j * (h @ rho - rho @ h)
        for L in self.jump_ops:
            Ld = L.conj().T
            LdL = Ld @ L
            out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
        return out


def build_hamiltonian(
    scheme: LevelScheme,
    couplings: CouplingTable,
    drive: DriveField,
    b: MagneticField,
    quant_axis: Axis | None = None,
    rabi: complex | None = None,
) -> np.ndarray:
    """Interaction-picture Hamiltonian (rad/s) in the frame rotating at the laser.

    ``rabi`` overrides the Rabi frequency derived from the drive power; it is
    complex so that a propagated drive can carry its accumulated phase.
    """
    return _hamiltonian_parts(scheme, couplings, drive, b, quant_axis, rabi)[0]


def _hamiltonian_parts(scheme, couplings, drive, b, quant_axis, rabi):
    couplings.validate(scheme)
    axis = quant_axis or b.dominant_axis()
    weights = polarization_decomposition(axis)
    omega = rabi_from_power(drive) if rabi is None else rabi
    kd = couplings.raising_operator(scheme, weights["drive"], "drive")
    ks = couplings.raising_operator(scheme, weights["signal"], "signal")

    n = scheme.n
    h = np.zeros((n, n), dtype=complex)
    for i, lv in enumerate(scheme.levels):
        h[i, i] += lv.energy_offset
        if lv.manifold == "excited":
            h[i, i] -= drive.detuning
    b_local = to_local_frame([b.b_x, 0.0, b.b_z], axis)
    for manifold, gf in (("ground", scheme.g_factor_ground), ("excited", scheme.g_factor_excited)):
        if gf == 0 or not np.any(b_local):
            continue
        fx, fy, fz = scheme.spin_operators(manifold)
        h += MU_B * gf * (b_local[0] * fx + b_local[1] * fy + b_local[2] * fz)
    h -= 0.5 * (omega * kd + np.conj(omega) * kd.conj().T)
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(h))):
        raise NonHermitian("assembled Hamiltonian is not Hermitian")
    return h, kd, ks


def build_system(
    scheme: LevelScheme,
    couplings: CouplingTable,
    decay: DecayModel,
    drive: DriveField,
    b: MagneticField,
    quant_axis: Axis | None = None,
    rabi: complex | None = None,
) -> AtomicSystem:
    decay.validate(scheme)
    h, kd, ks = _hamiltonian_parts(scheme, couplings, drive, b, quant_axis, rabi)
    jumps = tuple(decay.jump_operators(scheme, couplings))
    return AtomicSystem(scheme, h, jumps, kd, ks)


def liouvillian(h: np.ndarray, jump_ops: Iterable[np.ndarray]) -> np.ndarray:
    """Superoperator on column-stacked vec(rho)."""
    n = h.shape[0]
    eye = np.eye(n)
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for L in jump_ops:
        LdL = L.conj().T @ L
        sup += np.kron(L.conj(), L) - 0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye))
    return sup


def _vec(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, order="F")


def _unvec(v: np.ndarray, n: int) -> np.ndarray:
    return v.reshape(n, n, order="F")


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal Hermitian basis G_0 = I/sqrt(n), G_1.. traceless; shape (n*n, n, n)."""
    basis = [np.eye(n, dtype=complex) / np.sqrt(n)]
    for l in range(1, n):
        d = np.zeros((n, n), dtype=complex)
        d[np.arange(l), np.arange(l)] = 1.0
        d[l, l] = -l
        basis.append(d / np.sqrt(l * (l + 1)))
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), dtype=complex)
            s[j, k] = s[k, j] = np.sqrt(0.5)
            a = np.zeros((n, n), dtype=complex)
            a[j, k] = -1j * np.sqrt(0.5)
            a[k, j] = 1j * np.sqrt(0.5)
            basis.extend((s, a))
    return np.array(basis)


def to_coordinates(op: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Complex coefficients c_k = tr(G_k op) of op = sum_k c_k G_k."""
    return np.einsum("kji,ij->k", basis, op)


# ---------------------------------------------------------------------------
# steady state, drift, diffusion


def steady_state(system: AtomicSystem, rtol: float = 1e-9) -> np.ndarray:
    """Unique fixed point of the mean-value Liouvillian, normalised to unit trace."""
    sup = system.liouvillian
    n = system.n
    norm = np.linalg.norm(sup, 2)
    _, s, vh = np.linalg.svd(sup)
    if s[-2] <= 1e-10 * norm:
        raise DegenerateSteadyState(
            f"Liouvillian null space is degenerate (singular values {s[-1]:.3g}, {s[-2]:.3g})"
        )
    rho = _unvec(vh[-1].conj(), n)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    # one Newton-style polish in the traceless coordinates removes SVD round-off
    rho = _polish(system, rho)
    resid = np.linalg.norm(sup @ _vec(rho))
    if resid > 1e-9 * norm:
        raise DegenerateSteadyState(f"steady-state residual {resid:.3g} exceeds tolerance")
    return rho


def _polish(system: AtomicSystem, rho: np.ndarray) -> np.ndarray:
    A, b = affine_drift(system)
    basis = system.basis
    x = to_coordinates(rho, basis).real[1:]
    x = x + np.linalg.solve(A, -(A @ x + b))
    n = system.n
    return np.eye(n) / n + np.einsum("k,kij->ij", x, basis[1:])


def affine_drift(system: AtomicSystem) -> tuple[np.ndarray, np.ndarray]:
    """Real drift A and inhomogeneity b with dx/dt = A x + b on traceless coordinates."""
    basis = system.basis
    n = system.n
    U = np.array([_vec(g).conj() for g in basis])
    V = np.array([_vec(g) for g in basis]).T
    full = U @ system.liouvillian @ V
    if np.max(np.abs(full.imag)) > 1e-8 * max(1.0, np.max(np.abs(full))):
        raise NonHermitian("Liouvillian is not Hermiticity preserving")
    full = full.real
    return full[1:, 1:], full[1:, 0] / np.sqrt(n)


def drift_matrix(system: AtomicSystem, rho_ss: np.ndarray | None = None) -> np.ndarray:
    """Linearised drift of the atomic fluctuation coordinates.

    The mean-value equations are linear in the atomic operators at fixed
    classical drive, so A does not depend on ``rho_ss``; the argument is
    accepted for symmetry with :func:`diffusion_matrix`.
    """
    A, _ = affine_drift(system)
    eig = np.linalg.eigvals(A)
    if np.max(eig.real) > 1e-6:
        raise UnstableDrift(f"drift eigenvalue with real part {np.max(eig.real):.3g}")
    return A


def diffusion_matrix(system: AtomicSystem, rho_ss: np.ndarray) -> np.ndarray:
    """Langevin diffusion D (Hermitian, non-symmetrised) by the generalised Einstein relation.

    2 D_jk = <L^+(G_j G_k)> - <L^+(G_j) G_k> - <G_j L^+(G_k)>, with L^+ the
    Heisenberg generator. Only the dissipative part survives.
    """
    g = system.basis[1:]
    lg = np.array([system.adjoint(op) for op in g])
    # <L^+(G_j G_k)> = tr(G_j G_k L(rho))
    l_rho = system.apply(rho_ss)
    first = np.einsum("jab,kbc,ca->jk", g, g, l_rho, optimize=True)
    second = np.einsum("jab,kbc,ca->jk", lg, g, rho_ss, optimize=True)
    third = np.einsum("jab,kbc,ca->jk", g, lg, rho_ss, optimize=True)
    D = 0.5 * (first - second - third)
    D = 0.5 * (D + D.conj().T)
    eig = np.linalg.eigvalsh(D)
    scale = max(1.0, np.max(np.abs(eig)))
    if eig[0] < -1e-6 * scale:
        raise NegativeDiffusion(f"diffusion eigenvalue {eig[0]:.3g}")
    return D


def diffusion_commutator_form(system: AtomicSystem, rho_ss: np.ndarray) -> np.ndarray:
    """Closed form D_jk = 1/2 sum_l <[L_l^dag, G_j][G_k, L_l]>; independent check of the Einstein route."""
    g = system.basis[1:]
    m = len(g)
    D = np.zeros((m, m), dtype=complex)
    for L in system.jump_ops:
        Ld = L.conj().T
        left = np.einsum("ab,jbc->jac", Ld, g) - np.einsum("jab,bc->jac", g, Ld)
        right = np.einsum("kab,bc->kac", g, L) - np.einsum("ab,kbc->kac", L, g)
        D += 0.5 * np.einsum("jab,kbc,ca->jk", left, right, rho_ss, optimize=True)
    return D


def atomic_covariance(system: AtomicSystem, rho_ss: np.ndarray) -> np.ndarray:
    """Symmetrised single-atom covariance of the traceless coordinates."""
    g = system.basis[1:]
    x = np.einsum("jab,ba->j", g, rho_ss).real
    prod = np.einsum("jab,kbc,ca->jk", g, g, rho_ss, optimize=True)
    C = 0.5 * (prod + prod.T).real
    return C - np.outer(x, x)


def signal_coupling_vectors(system: AtomicSystem, rho_ss: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Field-to-atom source matrix (m x 2) and atom-to-field readout (2 x m).

    With the per-atom signal interaction -sqrt(k1) (b K+ + b^dag K-) and
    b = X + iP, the atomic coordinates are driven by source @ (X, P) and the
    field grows as d(X, P)/dz proportional to readout @ y.
    """
    g = system.basis[1:]
    kp = system.signal_raising
    km = kp.conj().T
    comm = np.einsum("ab,jbc->jac", kp, g) - np.einsum("jab,bc->jac", g, kp)
    beta = -1j * np.einsum("jab,ba->j", comm, rho_ss)
    source = np.column_stack([2.0 * beta.real, -2.0 * beta.imag])
    c = np.einsum("jab,ba->j", g, km)
    readout = np.vstack([-c.imag, c.real])
    return source, readout


def drive_coherence(system: AtomicSystem, rho_ss: np.ndarray) -> complex:
    """Expectation of the drive lowering operator, the source of the drive field."""
    return complex(np.trace(system.drive_raising.conj().T @ rho_ss))
