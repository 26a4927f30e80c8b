import numpy as np
import pytest

from conftest import closed_field
from skelot.cost import GridFunction, project_to_Pc
from skelot.energy import (
    DiagonalNorm,
    energy_consistency,
    in_Pc,
    ma_energy_integral,
    relative_volume,
    sup_norm_diagonal,
)
from skelot.errors import DegreeMismatch
from skelot.models import monomial
from skelot.okounkov import body_measure
from skelot.skeleton import node_grid


@pytest.fixture(scope="module")
def setup():
    m = monomial(1, l_max=32)
    cf = closed_field(m)
    X = node_grid(m.skeleton, 1 / 256).points
    nu = body_measure(cf.body_hint, "lattice", 32)
    phi = project_to_Pc(GridFunction(X, np.zeros(len(X))), cf, nu.samples)
    return m, cf, X, nu, phi


def test_sup_norm_of_zero_potential(setup):
    m, _, X, _, _ = setup
    b = m.family.basis(4)
    d = sup_norm_diagonal(b, GridFunction(X, np.zeros(len(X))))
    # max over [0, 1] of k x is k
    assert d.log_norms.tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_relative_volume_checks_degrees():
    with pytest.raises(DegreeMismatch):
        relative_volume(DiagonalNorm(2, np.zeros(3)), DiagonalNorm(3, np.zeros(4)))


def test_in_Pc_flags_fixed_points(setup):
    _, cf, X, nu, phi = setup
    _, ok = in_Pc(phi, cf, nu.samples)
    assert ok
    bumpy = GridFunction(X, np.sin(20 * X[:, 0]))
    proj, ok = in_Pc(bumpy, cf, nu.samples)
    assert not ok and np.all(proj.values <= bumpy.values + 1e-12)


def test_constant_shift_has_closed_form(setup):
    m, cf, _, nu, phi = setup
    c = 0.25
    psi = phi.shifted(c)
    rep = energy_consistency(phi, psi, m.family, cf, nu, m.Ln, schedule=(8, 16, 32))
    # degree l gives -c (l + 1) / l; the integral side is exactly -c
    for l, v in zip(rep.degrees, rep.limit_values):
        assert v == pytest.approx(-c * (l + 1) / l, abs=1e-12)
    assert rep.integral_value == pytest.approx(-c, abs=1e-12)
    assert rep.discrepancy == pytest.approx(c / 32, abs=1e-12)
    assert rep.within(1e-3)
    assert rep.projected == (False, False)


def test_energy_integral_sign(setup):
    m, cf, _, nu, phi = setup
    assert ma_energy_integral(phi.shifted(1.0), cf, nu, m.Ln) == pytest.approx(ma_energy_integral(phi, cf, nu, m.Ln) + 1.0)


def test_energy_is_concave_along_segments(setup):
    m, cf, X, nu, phi = setup
    rng = np.random.default_rng(4)
    idx = rng.choice(len(nu), size=3, replace=False)
    bump = np.max(cf.evaluate(X, nu.samples[idx]) - rng.uniform(0, 0.5, 3)[None, :], axis=1)
    phi2 = project_to_Pc(GridFunction(X, bump), cf, nu.samples)
    E = lambda f: ma_energy_integral(f, cf, nu, m.Ln)
    for lam in (0.25, 0.5, 0.75):
        mix = GridFunction(X, lam * phi.values + (1 - lam) * phi2.values)
        assert E(mix) >= lam * E(phi) + (1 - lam) * E(phi2) - 1e-12
