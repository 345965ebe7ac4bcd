import numpy as np
import pytest

from mixsing.errors import HypothesisViolation, InvalidInput
from mixsing.grid import Domain, GridFunction, build_grid, sample_function


def test_interval_grid():
    g = build_grid(Domain.interval(-1, 1), 4)
    assert g.h == 0.5 and g.cell_measure == 0.5
    np.testing.assert_allclose(g.interior_nodes[:, 0], [-0.5, 0.0, 0.5])


def test_rectangle_grid():
    g = build_grid(Domain.rectangle(0, 1, 0, 1), 3)
    assert g.size == 4
    assert g.h == pytest.approx(1 / 3) and g.cell_measure == pytest.approx(1 / 9)
    # lexicographic, x-major
    np.testing.assert_allclose(g.interior_nodes, [[1 / 3, 1 / 3], [1 / 3, 2 / 3], [2 / 3, 1 / 3], [2 / 3, 2 / 3]])


@pytest.mark.parametrize("N", [2, 5, 17])
def test_measure_bound(N):
    for d in (Domain.interval(0, 3), Domain.rectangle(0, 2, -1, 1)):
        g = build_grid(d, N)
        assert g.cell_measure * g.size <= d.volume
        assert g.size == (N - 1) ** d.n


def test_grid_errors():
    with pytest.raises(InvalidInput) as e:
        build_grid(Domain.interval(0, 1), 1)
    assert e.value.code == "invalid-subdivision"
    with pytest.raises(InvalidInput) as e:
        build_grid(Domain.measure_only(3, 2.0), 8)
    assert e.value.code == "unsupported-domain"
    with pytest.raises(InvalidInput):
        Domain.interval(1, 1)
    with pytest.raises(InvalidInput):
        Domain.measure_only(0, 1.0)


def test_domain_roundtrip():
    for d in (Domain.interval(-1, 2), Domain.rectangle(0, 1, 0, 2), Domain.measure_only(4, 3.5)):
        assert Domain.from_dict(d.to_dict()) == d


def test_sample_function():
    g = build_grid(Domain.interval(-1, 1), 4)
    u = sample_function(g, lambda x: 1 + x**2)
    np.testing.assert_allclose(u.values, [1.25, 1.0, 1.25])
    c = sample_function(g, lambda x: 2.0)
    np.testing.assert_allclose(c.values, 2.0)
    with pytest.raises(HypothesisViolation):
        sample_function(g, lambda x: x, nonnegative=True)
    with pytest.raises(InvalidInput) as e:
        sample_function(g, lambda x: 1 / x)
    assert e.value.code == "invalid-sample"


def test_gridfunction_ops_and_csv(tmp_path):
    g = build_grid(Domain.rectangle(0, 1, 0, 1), 4)
    u = GridFunction(g, np.arange(g.size, dtype=float))
    v = 2 * u - u + 1.0
    np.testing.assert_allclose(v.values, u.values + 1)
    assert u.lp_norm(np.inf) == g.size - 1
    assert u.lp_norm(1) == pytest.approx(np.sum(u.values) / 16)
    path = tmp_path / "u.csv"
    u.to_csv(path)
    assert path.read_text().startswith("# mixsing gridfunction v1, n=2, N=4\nx,y,value\n")
    w = GridFunction.from_csv(g, str(path))
    np.testing.assert_array_equal(w.values, u.values)
    with pytest.raises(InvalidInput):
        GridFunction.from_csv(build_grid(g.domain, 5), str(path))
    with pytest.raises(InvalidInput):
        GridFunction(g, np.zeros(3))
    with pytest.raises(ValueError):
        u.values[0] = 1.0
