import numpy as np
import pytest

from ssgm import (MinorQuery, ProcessSpec, TimeGrid, build_gram, chain_det,
                  gram_to_csv, lindstrom_minor, make_kernel, minor_residual,
                  psd_check, standard_grid)
from ssgm.errors import ParameterError


def _power_gram(alpha, beta, times):
    t = np.asarray(times, dtype=float)
    return np.maximum.outer(t, t) ** alpha / np.minimum.outer(t, t) ** beta


# ---------------------------------------------------------------------------
# TimeGrid
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ParameterError):
        TimeGrid(np.array([1.0, 1.0]))
    with pytest.raises(ParameterError):
        TimeGrid(np.array([2.0, 1.0]))
    with pytest.raises(ParameterError):
        TimeGrid(np.array([-1.0, 1.0]))
    with pytest.raises(ParameterError):
        TimeGrid(np.array([]))
    g = TimeGrid(np.array([0.0, 1.0, 2.0]))
    assert len(g) == 3


def test_geometric_grid():
    g = TimeGrid.geometric(0.05, 5.0, 20)
    assert len(g) == 20
    assert g.times[0] == pytest.approx(0.05)
    assert g.times[-1] == pytest.approx(5.0)
    ratios = g.times[1:] / g.times[:-1]
    assert np.allclose(ratios, ratios[0])


# ---------------------------------------------------------------------------
# build_gram
# ---------------------------------------------------------------------------

def test_gram_brownian():
    k = make_kernel(ProcessSpec.canonical(0.5, -1.0))
    g = build_gram(k, TimeGrid(np.array([1.0, 2.0])))
    assert np.array_equal(g.entries, np.array([[1.0, 1.0], [1.0, 2.0]]))


def test_gram_white_noise_diagonal():
    k = make_kernel(ProcessSpec.white_noise(0.5))
    g = build_gram(k, TimeGrid(np.array([1.0, 2.0, 3.0])))
    assert np.array_equal(g.entries, np.diag([1.0, 2.0, 3.0]))


def test_gram_canonical_substitution():
    k = make_kernel(ProcessSpec.canonical(0.75, -1.0))
    g = build_gram(k, TimeGrid(np.array([1.0, 4.0])))
    assert np.allclose(g.entries, [[1.0, 2.0], [2.0, 8.0]], rtol=1e-14)


def test_gram_symmetry_enforced():
    k = make_kernel(ProcessSpec.fbm(0.3))
    g = build_gram(k, standard_grid())
    assert np.array_equal(g.entries, g.entries.T)


# ---------------------------------------------------------------------------
# psd_check
# ---------------------------------------------------------------------------

def test_psd_brownian():
    k = make_kernel(ProcessSpec.canonical(0.5, -1.0))
    rep = psd_check(build_gram(k, standard_grid()))
    assert rep.is_psd
    assert rep.witness is None


def test_psd_white_noise():
    k = make_kernel(ProcessSpec.white_noise(0.7))
    rep = psd_check(build_gram(k, standard_grid()))
    assert rep.is_psd


def test_not_psd_above_boundary_with_witness():
    # alpha + beta = 0.5 > 0 on grid (1, 2): [[1, 2^a], [2^a, 2^(a-b)]]
    alpha, beta = 0.3, 0.2
    times = np.array([1.0, 2.0])
    from ssgm.gram import GramMatrix

    gram = GramMatrix(TimeGrid(times), _power_gram(alpha, beta, times))
    rep = psd_check(gram)
    assert not rep.is_psd
    assert rep.witness is not None
    quad = float(rep.witness @ gram.entries @ rep.witness)
    assert quad < 0.0
    assert rep.quadratic_form == pytest.approx(quad)


def test_psd_rank_one_degenerate():
    # c = -H gives the rank-one covariance (st)^H; PSD with zero eigenvalues
    k = make_kernel(ProcessSpec.canonical(0.7, -0.7))
    rep = psd_check(build_gram(k, TimeGrid(np.array([0.5, 1.0, 2.0]))))
    assert rep.is_psd


@pytest.mark.parametrize("alpha,beta", [(0.0, -1.0), (-1.0, 0.3), (-0.5, 0.5), (-2.0, 1.0)])
def test_psd_iff_boundary(alpha, beta):
    # alpha + beta <= 0 is PSD on any positive grid
    times = np.geomspace(0.5, 4.0, 7)
    from ssgm.gram import GramMatrix

    gram = GramMatrix(TimeGrid(times), _power_gram(alpha, beta, times))
    assert psd_check(gram).is_psd == (alpha + beta <= 0)


# ---------------------------------------------------------------------------
# lindstrom_minor / chain_det / minor_residual
# ---------------------------------------------------------------------------

def test_lindstrom_brownian_2x2():
    q = MinorQuery(0.0, -1.0, TimeGrid(np.array([1.0, 2.0])))
    # direct 2x2 determinant of [[1,1],[1,2]] is 1
    assert lindstrom_minor(q) == pytest.approx(1.0, rel=1e-15)


def test_lindstrom_zero_on_boundary():
    q = MinorQuery(0.4, -0.4, TimeGrid(np.array([1.0, 2.0, 3.0])))
    assert lindstrom_minor(q) == 0.0


def test_lindstrom_three_point_oracle():
    q = MinorQuery(-1.0, 0.5, TimeGrid(np.array([1.0, 2.0, 3.0])))
    expected = 3.0 ** (-1.5) * (1 - 2 ** (-0.5)) * (2 ** (-0.5) - 3 ** (-0.5)) / 2.0
    assert lindstrom_minor(q) == pytest.approx(expected, rel=1e-14)
    direct = np.linalg.det(_power_gram(-1.0, 0.5, [1.0, 2.0, 3.0]))
    assert lindstrom_minor(q) == pytest.approx(direct, rel=1e-12)


def test_lindstrom_d1():
    q = MinorQuery(0.7, -0.2, TimeGrid(np.array([3.0])))
    assert lindstrom_minor(q) == pytest.approx(3.0**0.9, rel=1e-15)


def test_lindstrom_negative_for_positive_sum_d2():
    q = MinorQuery(0.3, 0.2, TimeGrid(np.array([1.0, 2.0])))
    assert lindstrom_minor(q) < 0.0


def test_lindstrom_requires_positive_grid():
    with pytest.raises(ParameterError):
        MinorQuery(0.0, -1.0, TimeGrid(np.array([0.0, 1.0])))


def test_chain_det_trivial():
    assert chain_det(np.array([[7.0]]), TimeGrid(np.array([1.0]))) == 7.0


def test_chain_det_min_matrix():
    # f_i(x) = x reproduces the min-matrix determinant
    grid = TimeGrid(np.array([1.0, 2.0, 3.0]))
    table = np.array([[1.0, 0.0, 0.0], [1.0, 2.0, 0.0], [1.0, 2.0, 3.0]])
    got = chain_det(table, grid)
    direct = np.linalg.det(np.minimum.outer(grid.times, grid.times))
    assert got == pytest.approx(1.0, rel=1e-14)
    assert got == pytest.approx(direct, rel=1e-12)


def test_chain_det_reproduces_lindstrom():
    # f_i(t_j) = (t_i/t_j)^(alpha+beta), times (t_1...t_d)^(alpha-beta)
    rng = np.random.default_rng(8)
    for _ in range(25):
        d = int(rng.integers(2, 7))
        times = np.cumprod(rng.uniform(1.1, 2.0, size=d)) * rng.uniform(0.5, 1.5)
        alpha = rng.uniform(-2.0, 1.0)
        beta = rng.uniform(-1.5, -alpha)  # keep alpha + beta <= 0 mostly
        grid = TimeGrid(times)
        table = np.zeros((d, d))
        for i in range(d):
            table[i, : i + 1] = (times[i] / times[: i + 1]) ** (alpha + beta)
        prefactor = np.prod(times) ** (alpha - beta)
        got = prefactor * chain_det(table, grid)
        want = lindstrom_minor(MinorQuery(alpha, beta, grid))
        assert abs(got - want) <= 1e-10 * max(abs(want), 1e-300)


def test_chain_det_shape_mismatch():
    with pytest.raises(ParameterError):
        chain_det(np.zeros((2, 3)), TimeGrid(np.array([1.0, 2.0])))


def test_minor_residual_brownian():
    q = MinorQuery(0.0, -1.0, TimeGrid(np.array([1.0, 2.0, 3.0, 4.0])))
    assert minor_residual(q) <= 1e-12


def test_minor_residual_geometric_8pt():
    q = MinorQuery(-2.0, 1.0, TimeGrid.geometric(0.5, 4.0, 8))
    assert minor_residual(q) <= 1e-8


def test_minor_residual_d1():
    q = MinorQuery(-1.0, 0.3, TimeGrid(np.array([2.0])))
    assert minor_residual(q) == 0.0


def test_minor_residual_random_sweep():
    rng = np.random.default_rng(9)
    for _ in range(200):
        d = int(rng.integers(1, 9))
        ratios = rng.uniform(1.05, 2.0, size=d)
        times = 0.5 * np.cumprod(ratios)
        s = rng.uniform(-3.0, 0.0)  # alpha + beta in [-3, 0]
        alpha = rng.uniform(-2.0, 2.0)
        beta = s - alpha
        assert minor_residual(MinorQuery(alpha, beta, TimeGrid(times))) <= 1e-8


def test_leading_minors_of_canonical_nonneg():
    # principal minors of canonical Gram matrices (alpha = 2H+c, beta = c)
    rng = np.random.default_rng(10)
    for _ in range(20):
        H = rng.uniform(0.2, 1.2)
        c = -H - rng.uniform(0.0, 2.0)
        times = 0.3 * np.cumprod(rng.uniform(1.1, 1.9, size=8))
        k = make_kernel(ProcessSpec.canonical(H, float(c)))
        G = build_gram(k, TimeGrid(times)).entries
        for d in range(1, 9):
            minor = np.linalg.det(G[:d, :d])
            closed = lindstrom_minor(MinorQuery(2 * H + c, c, TimeGrid(times[:d])))
            assert minor >= -1e-10 * abs(closed) - 1e-15
            assert closed >= 0.0


def test_gram_csv_format():
    k = make_kernel(ProcessSpec.canonical(0.5, -1.0))
    g = build_gram(k, TimeGrid(np.array([1.0, 2.0])))
    text = gram_to_csv(g)
    lines = text.split("\n")
    assert lines[0] == "1.0000000000000000e+00,2.0000000000000000e+00"
    assert len(lines) == 4 and lines[-1] == ""
    assert "\r" not in text
