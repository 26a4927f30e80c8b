import numpy as np
import pytest

from conftest import closed_field
from skelot.models import monomial
from skelot.okounkov import body_measure
from skelot.plotting import plot_body, plot_cells, plot_cost_slice, plot_energy, plot_residuals
from skelot.skeleton import lebesgue_measure
from skelot.transport import laguerre_cells, solve_kantorovich


@pytest.mark.parametrize("n", [1, 2])
def test_cells_figure_is_byte_stable(tmp_path, n):
    m = monomial(n, l_max=4)
    cf = closed_field(m)
    mu = lebesgue_measure(m.skeleton)
    nu = body_measure(cf.body_hint, "lattice", 3)
    phi, _ = solve_kantorovich(mu, nu, cf)
    cells = laguerre_cells(phi, mu)
    a = plot_cells(cells, phi.samples, phi, tmp_path / "a.svg")
    b = plot_cells(cells, phi.samples, phi, tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()
    assert b"<dc:date>" not in a.read_bytes()


def test_other_figures(tmp_path):
    plot_body([(0, 0), (1, 0), (0, 1)], np.array([[0.2, 0.2]]), path=tmp_path / "body.svg")
    plot_body([(-0.3,), (0.6,)], np.array([[0.1]]), np.array([1.0]), path=tmp_path / "b1.png")
    plot_energy([4, 8, 16], [1.0, 0.9, 0.85], 0.8, tmp_path / "e.svg")
    xs = np.linspace(0, 1, 5)
    plot_cost_slice(xs, np.column_stack([xs, -xs]), ["p=1", "p=-1"], tmp_path / "c.svg")
    plot_residuals([3.0, 2.0, 1.5], tmp_path / "r.svg")
    for name in ("body.svg", "b1.png", "e.svg", "c.svg", "r.svg"):
        assert (tmp_path / name).stat().st_size > 0


def test_grid_cells_cannot_be_drawn():
    m = monomial(1, l_max=2)
    cf = closed_field(m)
    mu = lebesgue_measure(m.skeleton)
    nu = body_measure(cf.body_hint, "lattice", 2)
    phi, _ = solve_kantorovich(mu, nu, cf)
    with pytest.raises(ValueError):
        plot_cells(laguerre_cells(phi, mu, method="grid", h=0.1), phi.samples)
