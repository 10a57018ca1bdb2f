import math

import numpy as np
import pytest

from ssgm import (GFunction, ProcessSpec, TimeGrid, ergodic_average,
                  gaussian_abs_moment, increment_variance, int_limit_residual,
                  pvariation_sum, pvariation_trichotomy, variation_to_csv)
from ssgm.errors import ParameterError

G1 = GFunction.const(1.0)


# ---------------------------------------------------------------------------
# pvariation_sum
# ---------------------------------------------------------------------------

def test_sum_constant_path():
    assert pvariation_sum(np.ones(17), 2.0) == 0.0


def test_sum_linear_path():
    for n in (4, 8, 64):
        path = np.linspace(0.0, 1.0, n + 1)
        assert pvariation_sum(path, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_sum_grid_validation():
    with pytest.raises(ParameterError):
        pvariation_sum(np.zeros(6), 2.0)  # 5 increments, not a power of two
    with pytest.raises(ParameterError):
        pvariation_sum(np.zeros(9), 0.5)  # p < 1


def test_sum_bm_quadratic_variation():
    # one long Brownian path: S_n ~ 1 within MC fluctuation
    from ssgm import sample_timechange

    n = 2**14
    grid = TimeGrid(np.arange(n + 1, dtype=float) / n)
    ens = sample_timechange(0.5, -1.0, grid, 4, 99)
    sums = [pvariation_sum(row, 2.0) for row in ens.values]
    assert np.mean(sums) == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------------------
# trichotomy
# ---------------------------------------------------------------------------

def test_trichotomy_bm_finite_limit():
    rep = pvariation_trichotomy(ProcessSpec.canonical(0.5, -1.0), 2.0,
                                [2**10, 2**11, 2**12, 2**13], 48, 101)
    assert rep.verdict == "FiniteLimit"
    assert abs(rep.slope_estimate) < 0.05
    assert rep.limit_value == pytest.approx(1.0, abs=0.05)
    assert rep.sigmaJ_sq == 1.0


@pytest.mark.parametrize(
    "H,p,expected",
    [
        (0.25, 1.0, "Diverging"),
        (0.25, 2.0, "Diverging"),
        (0.25, 4.0, "FiniteLimit"),
        (0.5, 1.0, "Diverging"),
        (0.5, 2.0, "FiniteLimit"),
        (0.75, 2.0, "VanishingTo0"),
        (0.75, 4.0 / 3.0, "FiniteLimit"),
        (0.75, 1.0, "Diverging"),
    ],
)
def test_trichotomy_fbm_verdicts(H, p, expected):
    rep = pvariation_trichotomy(ProcessSpec.fbm(H), p, [2**7, 2**8, 2**9, 2**10], 64, 103)
    assert rep.verdict == expected, f"H={H} p={p}: slope {rep.slope_estimate:+.3f}"
    # stationary-increment scaling: slope tracks 1 - pH
    assert rep.slope_estimate == pytest.approx(1.0 - p * H, abs=0.05)


def test_trichotomy_canonical_is_locally_diffusive():
    # X_t = t^(2H+c) W(t^(-2H-2c)) is a time-changed Brownian motion, so its
    # quadratic variation scales like n^(1 - p/2) regardless of H; the
    # 1 - pH law needs stationary increments and holds only at H = 1/2
    rep = pvariation_trichotomy(ProcessSpec.canonical(0.75, -1.5), 2.0,
                                [2**9, 2**10, 2**11, 2**12], 64, 300)
    assert rep.verdict == "FiniteLimit"
    assert abs(rep.slope_estimate) < 0.05
    assert rep.sigmaJ_sq is None  # no stationary increment law to report


def test_trichotomy_finite_limit_value_is_moment():
    # at p = 1/H the limit is E|J|^p with J standard normal (fbm increments)
    H = 0.75
    p = 1.0 / H
    rep = pvariation_trichotomy(ProcessSpec.fbm(H), p, [2**7, 2**8, 2**9, 2**10], 64, 104)
    assert rep.verdict == "FiniteLimit"
    assert rep.limit_value == pytest.approx(gaussian_abs_moment(1.0, p), rel=0.1)


def test_trichotomy_validation():
    with pytest.raises(ParameterError):
        pvariation_trichotomy(ProcessSpec.fbm(0.5), 2.0, [100, 200], 8, 1)
    with pytest.raises(ParameterError):
        pvariation_trichotomy(ProcessSpec.fbm(0.5), 2.0, [256], 8, 1)


def test_variation_csv():
    rep = pvariation_trichotomy(ProcessSpec.canonical(0.5, -1.0), 2.0, [256, 512], 8, 7)
    text = variation_to_csv(rep)
    lines = text.strip().split("\n")
    assert lines[0] == "n,mean_S_n,se_S_n"
    assert lines[1].startswith("256,")
    assert len(lines) == 3


# ---------------------------------------------------------------------------
# ergodic average
# ---------------------------------------------------------------------------

def _ito_increment_var(t, H, I0=1.0 / 3.0):
    # exact E[(Z_{t+1}-Z_t)^2] for F = 1-s via the three-term expansion
    d = 1.0 / (t + 1.0)
    Id = I0 + d / 6.0
    return (t + 1.0) ** (2 * H) * I0 + t ** (2 * H) * I0 \
        - 2.0 * (t + 1.0) ** (H - 0.5) * t ** (H + 0.5) * Id


def test_ergodic_average_tracks_true_moments():
    # the empirical mean of squared increments matches the exact covariance
    # arithmetic of the sampled process (which decays, see module docstring)
    spec = ProcessSpec.volterra_g(0.25, 1.0, G1)
    res = ergodic_average(spec, "square", 300, 60, 111)
    expected = (1.0 / 3.0 + sum(_ito_increment_var(float(k), 0.25) for k in range(1, 300))) / 300
    assert res.average == pytest.approx(expected, abs=6e-4)
    assert res.target == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert res.sigmaJ_sq == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_ergodic_abs_pow_target():
    spec = ProcessSpec.volterra_g(0.25, 1.0, G1)
    res = ergodic_average(spec, "abs-pow", 50, 5, 112, p=1.0)
    assert res.target == pytest.approx(math.sqrt(2.0 / (3.0 * math.pi)), rel=1e-12)


def test_ergodic_bm_unit_variance():
    # beta=0, g=1, H=1/2 is Brownian motion: unit-variance increments
    spec = ProcessSpec.volterra_g(0.5, 0.0, G1)
    res = ergodic_average(spec, "square", 400, 30, 113)
    assert res.average == pytest.approx(1.0, abs=0.05)
    assert not res.proven_regime  # beta = 0 sits outside the proved range


def test_ergodic_validation():
    with pytest.raises(ParameterError):
        ergodic_average(ProcessSpec.fbm(0.5), "square", 100, 5, 1)
    with pytest.raises(ParameterError):
        ergodic_average(ProcessSpec.volterra_g(0.25, 1.0, G1), "cube", 100, 5, 1)


def test_gaussian_abs_moment_identities():
    assert gaussian_abs_moment(4.0, 2.0) == pytest.approx(4.0, rel=1e-14)
    assert gaussian_abs_moment(1.0, 1.0) == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-14)
    assert gaussian_abs_moment(1.0 / 3.0, 1.0) == pytest.approx(math.sqrt(2.0 / (3.0 * math.pi)), rel=1e-14)


# ---------------------------------------------------------------------------
# increment variance (quadrature)
# ---------------------------------------------------------------------------

def _displayed_oracle(t, H, I0=1.0 / 3.0):
    # closed form of the displayed expression for F = 1-s
    d = 1.0 / (t + 1.0)
    Id = I0 + d / 6.0
    root = math.sqrt(t / (1.0 + t))
    return I0 + 2.0 * (t + 1.0) ** H * t**H * (I0 - root * Id)


def test_increment_variance_closed_form_oracle():
    for t in (10.0, 100.0, 1e3, 1e4):
        iv = increment_variance(0.25, 1.0, G1, t)
        assert iv.value == pytest.approx(_displayed_oracle(t, 0.25), abs=1e-10)
        assert iv.limit_value == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert iv.ito_exact == pytest.approx(_ito_increment_var(t, 0.25), abs=1e-10)


def test_increment_variance_monotone_approach():
    gaps = [abs(increment_variance(0.25, 1.0, G1, t).value - 1.0 / 3.0)
            for t in (10.0, 1e2, 1e3, 1e4)]
    assert gaps[0] > gaps[1] > gaps[2] > gaps[3]
    assert gaps[3] <= 0.005 * (1.0 / 3.0)


def test_increment_variance_brownian_ito_is_one():
    # H=1/2, beta=0: the exact Ito moment is 1 for every t (BM increments)
    for t in (2.0, 10.0, 1e3):
        iv = increment_variance(0.5, 0.0, G1, t)
        assert iv.ito_exact == pytest.approx(1.0, abs=1e-10)


def test_increment_variance_log_weight_limit():
    # limit = integral (1-s) log(1/(1-s))^2 ds = 1/4
    iv = increment_variance(0.25, 0.5, GFunction.log_pow(1), 1e4)
    assert iv.limit_value == pytest.approx(0.25, abs=1e-9)
    assert iv.value == pytest.approx(0.25, rel=0.005)


# ---------------------------------------------------------------------------
# integral limit residual
# ---------------------------------------------------------------------------

def test_int_limit_beta1_exactly_zero():
    # F = 1-s: t*integral F (F - F((1-1/t)s)) ds = -1/6 for every t
    for t in (10.0, 1e2, 1e4):
        assert abs(int_limit_residual(1.0, G1, t)) <= 1e-9
    assert abs(int_limit_residual(1.0, G1, 1e4)) <= 0.01 * (1.0 / 6.0)


def test_int_limit_log_weight_decreasing():
    vals = [abs(int_limit_residual(0.5, GFunction.log_pow(1), t)) for t in (1e2, 1e3, 1e4)]
    assert vals[0] > vals[1] > vals[2]


def test_int_limit_beta_zero_degenerate():
    # the bracket vanishes identically, leaving (1/2) int F^2 = 1/2 exactly
    assert int_limit_residual(0.0, G1, 100.0) == pytest.approx(0.5, abs=1e-12)


def test_int_limit_validation():
    with pytest.raises(ParameterError):
        int_limit_residual(1.0, G1, 1.0)  # t < 2
