"""Markovianity diagnostics for explicit covariance kernels.

A centered Gaussian process is Markov exactly when its covariance satisfies
the triple-product identity R(s,u) R(t,t) = R(s,t) R(t,u) for s <= t <= u.
For H-self-similar kernels this pins R down to R(1,1) (s v t)^(2H+c)
(s ^ t)^(-c) with c <= -H, or the white-noise limit.  The module quantifies
how far a kernel is from that family:

* ``doob_residual``   - relative triple-product residuals on a grid;
* ``fit_canonical``   - recover (R(1,1), c) from R(., 1) on (0, 1];
* ``multiplicative_check`` - residual of g(x+y) = g(x) g(y) for
  g(x) = R(e^-x, 1)/R(1,1);
* ``gf_factorize``    - split R(s,t) = G(s ^ t) F(s v t) anchored at the
  smallest grid time;
* ``sqrt_diag_profile``   - power structure of R(t^alpha, t) at infinity;
* ``asym_coeff_estimate`` - constant and leading power of l(u) at infinity.

Verdict thresholds are engineering choices (exact identities sit at float
noise, genuine violations far above it) and are recorded in every report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize

from .errors import NumericalError, ParameterError
from .gram import TimeGrid, build_gram, standard_grid
from .kernels import CovKernel, Family, ProcessSpec, eval_l

__all__ = [
    "MarkovReport",
    "FactorizationResult",
    "AsymReport",
    "CanonicalFit",
    "doob_residual",
    "fit_canonical",
    "multiplicative_check",
    "gf_factorize",
    "sqrt_diag_profile",
    "asym_coeff_estimate",
    "markov_test",
    "DOOB_MARKOV_MAX",
    "DOOB_NOT_MARKOV_MIN",
]

DOOB_MARKOV_MAX = 1e-8
DOOB_NOT_MARKOV_MIN = 1e-4
_DOOB_FLOOR = 1e-300
_C_DEGENERATE_SLACK = 1e-6


@dataclass(frozen=True)
class CanonicalFit:
    r11_hat: float
    c_hat: float  # may be -inf (white-noise branch)
    regression_residual: float


@dataclass(frozen=True, eq=False)
class FactorizationResult:
    """R(s,t) ~ G(s ^ t) F(s v t) on a grid, anchored by F(t_j) = R(t_1, t_j)."""

    grid: TimeGrid
    G_values: np.ndarray
    F_values: np.ndarray
    max_residual: float
    g_over_f_nondecreasing: bool


@dataclass(frozen=True)
class AsymReport:
    """Power structure of an asymptotic profile."""

    family: str
    alpha: float
    constant_term: float
    coefficient: Optional[float]
    exponent: Optional[float]
    two_power_flag: bool
    fit_residual: float
    predicted_coefficient: Optional[float] = None
    predicted_exponent: Optional[float] = None
    all_zero: bool = False
    remainder_below_noise: bool = False


@dataclass(frozen=True)
class MarkovReport:
    kernel: str
    verdict: str  # MarkovCanonical | MarkovWhiteNoise | NotMarkov | Degenerate | Indeterminate
    doob_max_residual: float
    doob_mean_residual: float
    fit: CanonicalFit
    mult_residual: float
    factorization_residual: Optional[float]
    thresholds: dict = field(default_factory=lambda: {
        "doob_markov_max": DOOB_MARKOV_MAX,
        "doob_not_markov_min": DOOB_NOT_MARKOV_MIN,
    })
    note: str = (
        "verdict thresholds separate exact identities (float noise) from "
        "genuine violations; residuals in between are reported as Indeterminate"
    )


def doob_residual(kernel: CovKernel, grid: TimeGrid) -> tuple[float, float]:
    """Max and mean relative triple-product residual over s <= t <= u.

    Residuals are |R(s,u)R(t,t) - R(s,t)R(t,u)| normalized by the larger
    product magnitude (with a tiny floor so all-zero products count as 0).
    """
    if len(grid) < 3:
        raise ParameterError("doob residual requires a grid with d >= 3")
    if np.any(grid.times <= 0):
        raise ParameterError("doob residual requires positive grid times")
    G = build_gram(kernel, grid).entries
    d = G.shape[0]
    i, j, k = np.meshgrid(np.arange(d), np.arange(d), np.arange(d), indexing="ij")
    mask = (i <= j) & (j <= k)
    a = G[i, k] * G[j, j]
    b = G[i, j] * G[j, k]
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), _DOOB_FLOOR)
    rel = np.abs(a - b) / denom
    rel = rel[mask]
    return float(np.max(rel)), float(np.mean(rel))


def fit_canonical(kernel: CovKernel, t_grid: Optional[TimeGrid] = None) -> CanonicalFit:
    """Least-squares fit of log R(t,1) against log t on a grid in (0, 1].

    The slope recovers -c and the intercept log R(1,1).  If R(t,1) vanishes
    for every t < 1 the kernel sits on the white-noise branch and c_hat is
    -inf.  Negative values of R(., 1) are rejected: they cannot occur for a
    self-similar Markov covariance.
    """
    if t_grid is None:
        t_grid = TimeGrid.geometric(0.05, 1.0, 24)
    t = t_grid.times
    if np.any(t <= 0) or np.any(t > 1.0):
        raise ParameterError("fit grid must lie in (0, 1]")
    if len(t_grid) < 10:
        raise ParameterError("fit grid needs at least 10 points")
    r = np.asarray(kernel(t, np.ones_like(t)), dtype=float)
    r11 = float(kernel(1.0, 1.0))
    if np.any(r < -1e-12 * max(abs(r11), 1.0)):
        raise ParameterError("R(., 1) takes negative values; not a self-similar Markov covariance")
    interior = t < 1.0
    if np.all(np.abs(r[interior]) <= 1e-12 * max(abs(r11), 1e-300)):
        return CanonicalFit(r11_hat=r11, c_hat=float("-inf"), regression_residual=0.0)
    if np.any(r[interior] <= 0.0):
        raise ParameterError("R(t, 1) has zeros on (0, 1); no canonical power-law fit exists")
    x = np.log(t)
    y = np.log(r)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    return CanonicalFit(r11_hat=float(np.exp(intercept)), c_hat=float(-slope), regression_residual=resid)


def multiplicative_check(
    kernel: CovKernel,
    x_grid: Optional[np.ndarray] = None,
    y_grid: Optional[np.ndarray] = None,
) -> float:
    """Max residual of g(x+y) - g(x) g(y) with g(x) = R(e^-x, 1)/R(1,1)."""
    r11 = float(kernel(1.0, 1.0))
    if not r11 > 0:
        raise ParameterError(f"multiplicative check requires R(1,1) > 0, got {r11!r}")
    if x_grid is None:
        x_grid = np.linspace(0.0, 3.0, 13)
    if y_grid is None:
        y_grid = np.linspace(0.0, 3.0, 13)
    x = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_grid, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ParameterError("x and y grids must be nonnegative")

    def g(z):
        return np.asarray(kernel(np.exp(-z), np.ones_like(z)), dtype=float) / r11

    gx = g(x)
    gy = g(y)
    xs, ys = np.meshgrid(x, y, indexing="ij")
    gxy = g((xs + ys).ravel()).reshape(xs.shape)
    return float(np.max(np.abs(gxy - np.outer(gx, gy))))


def gf_factorize(kernel: CovKernel, grid: TimeGrid) -> FactorizationResult:
    """Split R(s,t) into G(s ^ t) F(s v t) on a grid.

    The scale ambiguity (G, F) -> (G/k, kF) is fixed by anchoring
    F(t_j) = R(t_1, t_j); G then carries the constant.  Also reports whether
    G/F is non-decreasing along the grid, a structural property of positive
    Gaussian Markov covariances.
    """
    if len(grid) < 2:
        raise ParameterError("factorization requires d >= 2")
    times = grid.times
    if np.any(times <= 0):
        raise ParameterError("factorization requires positive grid times")
    G_mat = build_gram(kernel, grid).entries
    if np.any(G_mat <= 0):
        raise ParameterError("factorization requires R > 0 on the grid")
    F = G_mat[0, :].copy()
    G = np.diag(G_mat) / F
    idx = np.arange(len(grid))
    model = G[np.minimum.outer(idx, idx)] * F[np.maximum.outer(idx, idx)]
    resid = float(np.max(np.abs(G_mat - model) / np.abs(G_mat)))
    ratio = G / F
    nondec = bool(np.all(np.diff(ratio) >= -1e-12 * np.abs(ratio[:-1])))
    return FactorizationResult(grid, G, F, resid, nondec)


# ---------------------------------------------------------------------------
# asymptotic profiles
# ---------------------------------------------------------------------------

def _line_fit(logx: np.ndarray, logy: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(logx, logy, 1)
    resid = float(np.max(np.abs(logy - (slope * logx + intercept))))
    return float(slope), float(intercept), resid


def _two_power_fit(t: np.ndarray, y: np.ndarray) -> Optional[float]:
    """Best-effort max |log(model/y)| for model = A t^p + B t^q.

    Initialized by fitting the leading power on the top third of the range,
    then the second power on the remainder, then refined jointly.  Returns
    None when the remainder after the leading power is at float-noise level,
    in which case a second power is not resolvable.
    """
    n = t.size
    tail = slice(2 * n // 3, n)
    p1, logA1, _ = _line_fit(np.log(t[tail]), np.log(y[tail]))
    A1 = math.exp(logA1)
    r = y - A1 * t**p1
    noise = 1e3 * np.finfo(float).eps * np.abs(y)
    usable = np.abs(r) > noise
    if np.count_nonzero(usable) < max(4, n // 4):
        return None
    sign = 1.0 if np.median(r[usable]) > 0 else -1.0
    same_sign = usable & (np.sign(r) == sign)
    if np.count_nonzero(same_sign) < max(4, n // 4):
        return None
    p2, logA2, _ = _line_fit(np.log(t[same_sign]), np.log(np.abs(r[same_sign])))
    A2 = sign * math.exp(logA2)

    def residuals(theta):
        la1, e1, a2, e2 = theta
        model = np.exp(la1) * t**e1 + a2 * t**e2
        bad = model <= 0
        out = np.where(bad, 1e6, np.log(np.where(bad, 1.0, model) / y))
        return out

    theta0 = np.array([math.log(A1), p1, A2, p2])
    sol = scipy.optimize.least_squares(residuals, theta0, method="lm", max_nfev=400)
    return float(np.max(np.abs(residuals(sol.x))))


def sqrt_diag_profile(kernel: CovKernel, t_values, alpha: float = 0.5) -> AsymReport:
    """Fit R(t^alpha, t), t >= 1, with one- and two-power models.

    A kernel of the canonical family gives a single exact power with
    coefficient R(1,1); any second resolvable power (two-power fit at least
    100x better than the one-power fit, with the latter above float noise)
    is a structural obstruction to Markovianity.  An identically zero
    profile is the white-noise signature.
    """
    if not (0 < alpha < 1):
        raise ParameterError(f"alpha must lie in (0,1), got {alpha!r}")
    t = np.asarray(t_values, dtype=float)
    if t.size < 8:
        raise ParameterError("profile needs at least 8 points")
    if np.any(t < 1.0):
        raise ParameterError("profile times must be >= 1")
    if np.log10(t[-1] / t[0]) < 4.0 - 1e-9:
        raise ParameterError("profile must span at least 4 decades")
    fam = kernel.spec.family.value
    prof = np.asarray(kernel(t**alpha, t), dtype=float)
    if np.all(prof == 0.0):
        return AsymReport(fam, alpha, 0.0, None, None, False, 0.0, all_zero=True)
    if np.any(prof <= 0.0):
        raise NumericalError("profile takes nonpositive values; power fits unavailable")

    slope, intercept, resid1 = _line_fit(np.log(t), np.log(prof))
    resid2 = _two_power_fit(t, prof)
    flag = (
        resid1 > 1e-12
        and resid2 is not None
        and resid2 < resid1 / 100.0
    )
    return AsymReport(
        family=fam,
        alpha=alpha,
        constant_term=0.0,
        coefficient=float(np.exp(intercept)),
        exponent=float(slope),
        two_power_flag=bool(flag),
        fit_residual=float(resid1),
    )


def _predicted_pair(spec: ProcessSpec) -> tuple[Optional[float], Optional[float]]:
    """Leading (coefficient, exponent) of l(u) - lim l(u) at infinity."""
    H = spec.H
    if spec.family == Family.RIEMANN_LIOUVILLE:
        return 4.0 * H / (2.0 * H + 1.0), H - 0.5
    if spec.family == Family.SUBFBM:
        r11 = 2.0 - 2.0 ** (2 * H - 1.0)
        return H * (1.0 - 2.0 * H) / r11, 2.0 * H - 2.0
    if spec.family == Family.BIFBM:
        ht, kt = spec.htilde, spec.ktilde
        if ht < 0.5:
            return 2.0 ** (-kt) * kt, 2.0 * ht * (kt - 1.0)
        if ht == 0.5:
            return 2.0 ** (-kt) * 2.0 * kt, kt - 1.0
        return 2.0 ** (-kt) * 2.0 * ht * kt, 2.0 * ht * kt - 1.0
    return None, None


def _aitken_limit(values: np.ndarray) -> float:
    """Aitken delta-squared extrapolation from the last three entries."""
    l0, l1, l2 = values[-3], values[-2], values[-1]
    d2 = (l2 - l1) - (l1 - l0)
    if d2 == 0.0:
        return float(l2)
    return float(l2 - (l2 - l1) ** 2 / d2)


def asym_coeff_estimate(spec: ProcessSpec, u_values, tol: float = 1e-10) -> AsymReport:
    """Constant term and leading power of l(u) as u -> infinity.

    For profiles with a finite limit (all documented decaying cases) the
    constant comes from Aitken extrapolation of the geometric tail, after
    which ``coefficient * u^exponent`` is fitted to the remainder on the
    lower half of the range, where it is far above the extrapolation error.
    Diverging profiles are fitted jointly as C + A u^e.  When the remainder
    is below numerical noise only the constant is reported.
    """
    if spec.family not in (Family.RIEMANN_LIOUVILLE, Family.SUBFBM, Family.BIFBM, Family.FBM):
        raise ParameterError(f"asymptotics supported for l-form families, not {spec.family.value!r}")
    u = np.asarray(u_values, dtype=float)
    if u.size < 12:
        raise ParameterError("need at least 12 u values")
    if np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise ParameterError("u values must be positive and increasing")
    lvals = np.asarray(eval_l(spec, u, tol=tol), dtype=float)
    fam = spec.family.value
    pred_coeff, pred_exp = _predicted_pair(spec)

    # tail slope over the top decade decides between diverging and settling
    top = u >= u[-1] / 10.0
    t_slope, _, _ = _line_fit(np.log(u[top]), np.log(np.abs(lvals[top]) + 1e-300))

    if t_slope > 0.02:
        # diverging power: fit C + A u^e jointly
        e0, logA0, _ = _line_fit(np.log(u[top]), np.log(lvals[top]))

        def residuals(theta):
            cst, la, ee = theta
            model = cst + np.exp(la) * u**ee
            return (model - lvals) / np.abs(lvals)

        sol = scipy.optimize.least_squares(
            residuals, np.array([0.0, logA0, e0]), method="lm", max_nfev=400
        )
        cst, la, ee = sol.x
        resid = float(np.max(np.abs(residuals(sol.x))))
        return AsymReport(fam, 0.5, float(cst), float(np.exp(la)), float(ee), False, resid,
                          predicted_coefficient=pred_coeff, predicted_exponent=pred_exp)

    constant = _aitken_limit(lvals)
    remainder = lvals - constant
    lower = slice(0, u.size // 2)
    rem = remainder[lower]
    noise = max(1e3 * np.finfo(float).eps * float(np.max(np.abs(lvals))), 10.0 * tol)
    if np.max(np.abs(rem)) <= noise:
        return AsymReport(fam, 0.5, float(constant), None, None, False, 0.0,
                          predicted_coefficient=pred_coeff, predicted_exponent=pred_exp,
                          remainder_below_noise=True)
    sign = 1.0 if np.median(rem) > 0 else -1.0
    good = np.abs(rem) > noise
    if np.count_nonzero(good) < 6:
        raise NumericalError("too few resolvable remainder points for a power fit")
    slope, intercept, resid = _line_fit(np.log(u[lower][good]), np.log(np.abs(rem[good])))
    return AsymReport(fam, 0.5, float(constant), float(sign * np.exp(intercept)), float(slope),
                      False, resid, predicted_coefficient=pred_coeff, predicted_exponent=pred_exp)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def markov_test(kernel: CovKernel, grid: Optional[TimeGrid] = None) -> MarkovReport:
    """Run the full Markovianity battery on a kernel and classify it."""
    if grid is None:
        grid = standard_grid()
    dmax, dmean = doob_residual(kernel, grid)
    fit = fit_canonical(kernel)
    mult = multiplicative_check(kernel)
    try:
        fact_resid = gf_factorize(kernel, grid).max_residual
    except ParameterError:
        fact_resid = None  # kernels with zeros (white noise) have no G*F split

    if math.isinf(fit.c_hat):
        verdict = "MarkovWhiteNoise" if dmax <= DOOB_MARKOV_MAX else "Indeterminate"
    elif dmax <= DOOB_MARKOV_MAX:
        if abs(fit.c_hat + kernel.H) <= _C_DEGENERATE_SLACK:
            verdict = "Degenerate"
        elif fit.c_hat <= -kernel.H + _C_DEGENERATE_SLACK:
            verdict = "MarkovCanonical"
        else:
            verdict = "Indeterminate"
    elif dmax > DOOB_NOT_MARKOV_MIN:
        verdict = "NotMarkov"
    else:
        verdict = "Indeterminate"

    return MarkovReport(
        kernel=kernel.label(),
        verdict=verdict,
        doob_max_residual=dmax,
        doob_mean_residual=dmean,
        fit=fit,
        mult_residual=mult,
        factorization_residual=fact_resid,
    )
