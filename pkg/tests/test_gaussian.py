import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from psrlab.errors import DomainError, NonSymplectic, SingularCovariance
from psrlab.gaussian import (
    GaussianState,
    SymplecticTransform,
    apply_loss,
    apply_symplectic,
    from_db,
    min_variance,
    quadrature_variance,
    to_snu,
    vacuum,
    wigner,
)

SHEAR2 = 0.25 * np.array([[1.0, -2.0], [-2.0, 5.0]])


def test_vacuum_convention():
    v = vacuum()
    assert_allclose(v.cov, np.diag([0.25, 0.25]))
    assert_allclose(v.mean, [0, 0])
    assert v.det == pytest.approx(1 / 16, abs=0)
    assert_allclose(apply_symplectic(v, np.eye(2)).cov, v.cov)


def test_shear_on_vacuum_is_direct_product():
    out = apply_symplectic(vacuum(), np.array([[1.0, 0.0], [-2.0, 1.0]]))
    assert_allclose(out.cov, SHEAR2, atol=1e-15)


def test_rotation_shifts_squeezing_angle():
    sq = apply_symplectic(vacuum(), SymplecticTransform.squeezer(0.4))
    _, a0 = min_variance(sq)
    for phi in (0.3, 1.1, 2.5):
        rotated = apply_symplectic(sq, SymplecticTransform.rotation(phi))
        # eigenvector oracle: minor eigenvector direction of the rotated covariance
        w, v = np.linalg.eigh(rotated.cov)
        oracle = np.mod(np.arctan2(v[1, 0], v[0, 0]), np.pi)
        _, a = min_variance(rotated)
        assert np.isclose(np.mod(a - oracle + np.pi / 2, np.pi) - np.pi / 2, 0, atol=1e-12)
        assert np.isclose(np.mod(a - a0 - phi + np.pi / 2, np.pi) - np.pi / 2, 0, atol=1e-12)


def test_non_symplectic_rejected():
    with pytest.raises(NonSymplectic):
        apply_symplectic(vacuum(), np.diag([1.0, 2.0]))


def test_loss_endpoints_and_domain():
    s = GaussianState([0.3, -0.2], SHEAR2)
    assert_allclose(apply_loss(s, 1.0).cov, s.cov)
    assert_allclose(apply_loss(s, 0.0).cov, vacuum().cov)
    assert_allclose(apply_loss(s, 0.0).mean, [0, 0])
    for bad in (-0.1, 1.5):
        with pytest.raises(DomainError):
            apply_loss(s, bad)


def test_loss_on_4db_state_matches_monte_carlo_beamsplitter():
    v_sq = 0.25 * 10 ** (-0.4)
    state = GaussianState([0, 0], np.diag([v_sq, 0.6281]))
    eta = 0.744876
    out = apply_loss(state, eta)
    assert out.cov[0, 0] / 0.25 == pytest.approx(0.5516, abs=1e-4)
    assert 10 * np.log10(out.cov[0, 0] / 0.25) == pytest.approx(-2.58, abs=5e-3)
    # Monte-Carlo oracle: mix sampled signal quadratures with vacuum samples
    rng = np.random.default_rng(1)
    n = 1_000_000
    sig = rng.standard_normal(n) * np.sqrt(v_sq)
    vac = rng.standard_normal(n) * 0.5
    mixed = np.sqrt(eta) * sig + np.sqrt(1 - eta) * vac
    est = mixed.var()
    se = out.cov[0, 0] * np.sqrt(2 / (n - 1))
    assert abs(est - out.cov[0, 0]) < 5 * se


def test_quadrature_variance_examples():
    assert quadrature_variance(vacuum(), 0.7) == pytest.approx(0.25)
    assert quadrature_variance(GaussianState([0, 0], np.diag([0.1, 0.9])), 0.0) == pytest.approx(0.1)
    s = GaussianState([0, 0], SHEAR2)
    lam, ang = min_variance(s)
    assert quadrature_variance(s, ang) == pytest.approx(0.042893, abs=5e-7)
    assert lam == pytest.approx((3 - 2 * np.sqrt(2)) / 4, abs=1e-15)


def test_min_variance_examples():
    assert min_variance(vacuum()) == (0.25, 0.0)
    g1 = apply_symplectic(vacuum(), SymplecticTransform.shear(1.0))
    lam, _ = min_variance(g1)
    assert lam == pytest.approx((3 - np.sqrt(5)) / 8, abs=1e-15)
    assert lam == pytest.approx(0.095492, abs=5e-7)
    assert 10 * np.log10(lam / 0.25) == pytest.approx(-4.18, abs=5e-3)
    g2 = apply_symplectic(vacuum(), SymplecticTransform.shear(2.0))
    assert 10 * np.log10(min_variance(g2)[0] / 0.25) == pytest.approx(-7.66, abs=5e-3)


def test_wigner_examples():
    assert wigner(vacuum(), 0.0, 0.0) == pytest.approx(2 / np.pi, rel=1e-14)
    assert wigner(GaussianState([0, 0], SHEAR2), 40.0, -40.0) == pytest.approx(0.0, abs=1e-300)
    ax = np.arange(-5, 5 + 1e-9, 0.01)
    xx, pp = np.meshgrid(ax, ax)
    for s in (vacuum(), GaussianState([0.2, -0.1], SHEAR2)):
        total = np.sum(wigner(s, xx, pp)) * 0.01**2
        assert total == pytest.approx(1.0, abs=1e-4)


def test_wigner_singular():
    with pytest.raises(SingularCovariance):
        wigner(GaussianState([0, 0], np.diag([0.25, 0.0])), 0, 0)


def test_snu_db_examples():
    assert to_snu(0.25).value_db == pytest.approx(0.0, abs=1e-15)
    assert from_db(-3.5).snu == pytest.approx(0.44668, abs=5e-6)
    assert from_db(-4.0).snu == pytest.approx(0.39811, abs=5e-6)
    with pytest.raises(DomainError):
        to_snu(0.0)
    with pytest.raises(DomainError):
        to_snu(-1.0)


@given(st.floats(1e-6, 1e6))
def test_snu_db_round_trip(v):
    nf = to_snu(v)
    assert from_db(nf.value_db).snu == pytest.approx(nf.snu, rel=1e-12)


# ---------------------------------------------------------------------------
# properties

symplectics = st.tuples(
    st.floats(-3, 3), st.floats(-1.5, 1.5), st.floats(-np.pi, np.pi)
).map(
    lambda t: SymplecticTransform.shear(t[0]).matrix
    @ SymplecticTransform.squeezer(t[1]).matrix
    @ SymplecticTransform.rotation(t[2]).matrix
)


@given(symplectics)
def test_symplectic_preserves_det(S):
    s = GaussianState([0, 0], SHEAR2)
    out = apply_symplectic(s, S)
    assert out.det == pytest.approx(s.det, rel=1e-10)


mild_symplectics = st.tuples(st.floats(-1, 1), st.floats(-0.5, 0.5), st.floats(-np.pi, np.pi)).map(
    lambda t: SymplecticTransform.shear(t[0]).matrix
    @ SymplecticTransform.squeezer(t[1]).matrix
    @ SymplecticTransform.rotation(t[2]).matrix
)


# bounded strength keeps det free of cancellation error at the 1e-12 level
@given(st.lists(st.one_of(mild_symplectics, st.floats(0, 1)), min_size=1, max_size=4))
def test_uncertainty_preserved_by_compositions(ops):
    s = vacuum()
    for op in ops:
        s = apply_loss(s, op) if isinstance(op, float) else apply_symplectic(s, op)
    assert s.det >= 1 / 16 - 1e-12


@given(st.floats(0, 1), st.floats(0, 1))
def test_loss_composes_multiplicatively(e1, e2):
    s = GaussianState([0.4, 0.1], SHEAR2)
    a = apply_loss(apply_loss(s, e1), e2)
    b = apply_loss(s, e1 * e2)
    assert_allclose(a.cov, b.cov, atol=1e-12)
    assert_allclose(a.mean, b.mean, atol=1e-12)


@settings(max_examples=25)
@given(symplectics)
def test_min_variance_matches_dense_phase_grid(S):
    s = apply_symplectic(vacuum(), S)
    phis = np.linspace(0, np.pi, 10_000, endpoint=False)
    c, sn = np.cos(phis), np.sin(phis)
    v = c * c * s.cov[0, 0] + 2 * c * sn * s.cov[0, 1] + sn * sn * s.cov[1, 1]
    lam, ang = min_variance(s)
    # grid resolution: curvature * (dphi/2)^2
    spread = np.trace(s.cov)
    assert lam <= v.min() + 1e-15
    assert v.min() - lam <= spread * (np.pi / 10_000) ** 2
    assert quadrature_variance(s, ang) == pytest.approx(lam, abs=1e-12)
    assert 0 <= ang < np.pi


def test_monte_carlo_quadrature_variance():
    s = GaussianState([0, 0], SHEAR2)
    rng = np.random.default_rng(7)
    n = 1_000_000
    r = rng.multivariate_normal([0, 0], s.cov, size=n)
    for phi in (0.0, 0.6, 2.0):
        c = np.array([np.cos(phi), np.sin(phi)])
        est = (r @ c).var()
        exact = quadrature_variance(s, phi)
        assert abs(est - exact) < 5 * exact * np.sqrt(2 / (n - 1))
