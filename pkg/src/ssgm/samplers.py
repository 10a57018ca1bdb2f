"""Path generation for every process family, with reproducible substreams.

Randomness discipline: path ``i`` of a run draws from the counter-based
Philox generator keyed by ``(seed, i)``, and consumes its draws in grid
order.  Results are therefore bitwise independent of how paths are chunked
across workers, and aggregation uses numpy's pairwise summation in a fixed
order, so a run is reproducible for any ``--threads`` setting.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import NumericalError, ParameterError
from .gram import TimeGrid, build_gram
from .kernels import CovKernel, Family, GFunction, ProcessSpec, make_kernel

__all__ = [
    "PathEnsemble",
    "EmpiricalCov",
    "SelfSimReport",
    "sample_timechange",
    "sample_whitenoise",
    "sample_cholesky",
    "sample_volterra_canonical",
    "sample_volterra_zg",
    "sample_spec",
    "empirical_cov",
    "selfsim_check",
    "set_max_workers",
    "get_max_workers",
    "ensemble_to_csv",
    "save_ensemble",
    "load_ensemble",
]

_MASK64 = (1 << 64) - 1
_max_workers = 1


def set_max_workers(n: Optional[int]) -> None:
    """Cap the number of sampling workers (None or <=1 means serial)."""
    global _max_workers
    _max_workers = max(1, int(n)) if n else 1


def get_max_workers() -> int:
    env = os.environ.get("SSGM_THREADS")
    if _max_workers > 1:
        return _max_workers
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


def _path_rng(seed: int, path_index: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, path_index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _run_paths(n_paths: int, d: int, one_path: Callable[[int], np.ndarray]) -> np.ndarray:
    """Fill an (n_paths, d) array, one substream per path, chunked by workers."""
    values = np.empty((n_paths, d), dtype=float)

    def fill(block):
        lo, hi = block
        for i in range(lo, hi):
            values[i, :] = one_path(i)

    workers = min(get_max_workers(), n_paths) if n_paths else 1
    if workers <= 1:
        fill((0, n_paths))
    else:
        bounds = np.linspace(0, n_paths, workers + 1).astype(int)
        blocks = [(int(bounds[k]), int(bounds[k + 1])) for k in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    return values


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Sampled paths on a grid plus full seeding metadata."""

    spec: ProcessSpec
    grid: TimeGrid
    values: np.ndarray  # n_paths x d
    seed: int
    scheme: str  # "timechange" | "cholesky" | "volterra" | "whitenoise"
    inner_steps: Optional[int] = None
    jitter: float = 0.0

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.grid):
            raise ParameterError("values must be n_paths x len(grid)")

    @property
    def n_paths(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class EmpiricalCov:
    """Sample mean/covariance with delta-method standard errors."""

    grid: TimeGrid
    mean: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    n_paths: int


def _check_sampling_args(grid: TimeGrid, n_paths: int) -> None:
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1, got {n_paths!r}")
    times = grid.times
    if times[0] == 0.0 and times.size == 1:
        return
    positive = times[1:] if times[0] == 0.0 else times
    if np.any(positive <= 0):
        raise ParameterError("grid must be positive except for an optional leading t = 0")


def sample_timechange(H: float, c: float, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """Exact sampler X_t = t^(2H+c) W(t^(-2H-2c)) for finite c <= -H.

    The time change tau(t) = t^(-2H-2c) is nondecreasing, so W is built from
    independent Gaussian increments in grid order.  At c = -H all tau
    coincide and every path is the rank-one t^H W(1).
    """
    spec = ProcessSpec.canonical(H, c)
    if math.isinf(c):
        raise ParameterError("time-change sampler requires finite c; use sample_whitenoise")
    _check_sampling_args(grid, n_paths)
    times = grid.times
    has_zero = times[0] == 0.0
    pos = times[1:] if has_zero else times
    tau = pos ** (-2.0 * H - 2.0 * c)
    dtau = np.diff(np.concatenate([[0.0], tau]))
    if np.any(dtau < 0):  # theoretically impossible for c <= -H
        raise NumericalError("time change is not monotone")
    sqrt_dtau = np.sqrt(dtau)
    scale = pos ** (2.0 * H + c)
    d = times.size

    def one_path(i):
        z = _path_rng(seed, i).standard_normal(pos.size)
        w = np.cumsum(sqrt_dtau * z)
        x = scale * w
        return np.concatenate([[0.0], x]) if has_zero else x

    values = _run_paths(n_paths, d, one_path)
    return PathEnsemble(spec, grid, values, seed, "timechange")


def sample_whitenoise(H: float, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """Independent N(0, t^(2H)) draws per grid point per path."""
    spec = ProcessSpec.white_noise(H)
    _check_sampling_args(grid, n_paths)
    times = grid.times
    sd = times**H  # zero at t = 0

    def one_path(i):
        z = _path_rng(seed, i).standard_normal(times.size)
        return sd * z

    values = _run_paths(n_paths, times.size, one_path)
    return PathEnsemble(spec, grid, values, seed, "whitenoise")


_JITTER_START = 1e-12
_JITTER_MAX = 1e-6


def _cholesky_with_jitter(G: np.ndarray):
    """Lower factor of G, escalating a trace-scaled diagonal jitter if needed."""
    d = G.shape[0]
    base = float(np.trace(G)) / d if d else 0.0
    delta = 0.0
    while True:
        try:
            L = np.linalg.cholesky(G + delta * base * np.eye(d)) if delta else np.linalg.cholesky(G)
            return L, delta
        except np.linalg.LinAlgError:
            delta = _JITTER_START if delta == 0.0 else delta * 10.0
            if delta > _JITTER_MAX:
                eigs = np.linalg.eigvalsh(G)
                raise NumericalError(
                    "covariance factorization failed after maximal jitter "
                    f"{_JITTER_MAX:g}; min eigenvalue {eigs[0]:.3e}, "
                    f"max diagonal {np.max(np.diag(G)):.3e}, d={d}"
                )


def sample_cholesky(kernel: CovKernel, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """Generic Gaussian sampler from a factorized Gram matrix.

    Paths have exactly the Gram covariance up to the recorded factorization
    jitter.  A leading t = 0 grid point maps to an identically zero column.
    """
    _check_sampling_args(grid, n_paths)
    times = grid.times
    has_zero = times[0] == 0.0
    pos_grid = TimeGrid(times[1:]) if has_zero else grid
    G = build_gram(kernel, pos_grid).entries
    L, jitter = _cholesky_with_jitter(G)
    d = times.size

    def one_path(i):
        z = _path_rng(seed, i).standard_normal(len(pos_grid))
        x = L @ z
        return np.concatenate([[0.0], x]) if has_zero else x

    values = _run_paths(n_paths, d, one_path)
    return PathEnsemble(kernel.spec, grid, values, seed, "cholesky", jitter=jitter)


def _cell_partition(t_max: float, inner_steps: int, grid_times: np.ndarray) -> np.ndarray:
    """Cell boundaries: the uniform 1/inner_steps lattice refined by grid times."""
    n_cells = int(np.ceil(t_max * inner_steps))
    lattice = np.arange(n_cells + 1, dtype=float) / inner_steps
    bounds = np.union1d(lattice[lattice <= t_max], grid_times[grid_times > 0])
    if bounds[0] > 0.0:
        bounds = np.concatenate([[0.0], bounds])
    return bounds


def sample_volterra_canonical(
    H: float, c: float, grid: TimeGrid, inner_steps: int, n_paths: int, seed: int
) -> PathEnsemble:
    """Discretized Volterra sampler for the canonical family, c < -H.

    Uses exact per-cell integrals of K(u, t) (closed-form power integrals)
    against shared Brownian increments, so each X_t is the L^2 projection of
    the stochastic integral onto piecewise-constant integrands.
    """
    spec = ProcessSpec.canonical(H, c)
    if math.isinf(c) or not c < -H:
        raise ParameterError("Volterra sampler requires finite c < -H")
    if inner_steps < 64:
        raise ParameterError("inner_steps must be >= 64")
    _check_sampling_args(grid, n_paths)
    times = grid.times
    has_zero = times[0] == 0.0
    pos = times[1:] if has_zero else times
    bounds = _cell_partition(float(pos[-1]), inner_steps, pos)
    widths = np.diff(bounds)
    sqrt_w = np.sqrt(widths)
    coef = math.sqrt(-2.0 * (c + H))
    e1 = -c - H + 0.5  # exponent of the kernel antiderivative

    # weight[k, j] = integral over cell k of K(u, t_j), for cells inside [0, t_j]
    upper = np.minimum.outer(bounds[1:], pos)
    lower = np.minimum.outer(bounds[:-1], pos)
    anti = lambda u: u**e1 / e1
    kern_int = coef * pos ** (H - 0.5) * pos ** (-(-c - H - 0.5)) * (anti(upper) - anti(lower))
    weights = np.where(upper > lower, kern_int, 0.0) / sqrt_w[:, None]

    def one_path(i):
        z = _path_rng(seed, i).standard_normal(widths.size)
        x = z @ weights
        return np.concatenate([[0.0], x]) if has_zero else x

    values = _run_paths(n_paths, times.size, one_path)
    return PathEnsemble(spec, grid, values, seed, "volterra", inner_steps=inner_steps)


def _zg_discrete_var(spec: ProcessSpec, inner_steps: int) -> float:
    """Discretized Var(Z_1) for the resolution-doubling policy."""
    m = np.arange(inner_steps) / inner_steps + 0.5 / inner_steps
    F = (1.0 - m) ** spec.beta * spec.g(m)
    return float(np.sum(F * F) / inner_steps)


def sample_volterra_zg(
    H: float,
    beta: float,
    g: GFunction,
    grid: TimeGrid,
    inner_steps: Optional[int] = None,
    n_paths: int = 1,
    seed: int = 0,
) -> PathEnsemble:
    """Discretized Z_t = t^(H-1/2) integral_0^t (1-s/t)^beta g(s/t) dB_s.

    Midpoint weights F(m_k / t) on a cell partition of [0, max t] whose
    boundaries include every grid time, so cells never straddle evaluation
    points.  When ``inner_steps`` is None it starts at 256 per unit time and
    doubles until the Var(Z_1)-style Richardson gap between consecutive
    resolutions is below 1%.  ``beta <= 0`` is permitted but flagged: the
    asymptotic-stationarity theory behind downstream diagnostics is only
    proved for beta > 0.
    """
    spec = ProcessSpec.volterra_g(H, beta, g)
    _check_sampling_args(grid, n_paths)
    if inner_steps is None:
        inner_steps = 256
        while inner_steps < 4096:
            v1 = _zg_discrete_var(spec, inner_steps)
            v2 = _zg_discrete_var(spec, 2 * inner_steps)
            if abs(v2 - v1) <= 0.01 * max(abs(v2), 1e-300):
                break
            inner_steps *= 2
    if inner_steps < 64:
        raise ParameterError("inner_steps must be >= 64")
    times = grid.times
    has_zero = times[0] == 0.0
    pos = times[1:] if has_zero else times
    bounds = _cell_partition(float(pos[-1]), inner_steps, pos)
    widths = np.diff(bounds)
    sqrt_w = np.sqrt(widths)
    mids = 0.5 * (bounds[:-1] + bounds[1:])

    # weights[k, j] = t_j^(H-1/2) F(m_k / t_j) sqrt(w_k) for cells inside [0, t_j]
    n_cells = widths.size
    weights = np.zeros((n_cells, pos.size))
    for j, t in enumerate(pos):
        inside = bounds[1:] <= t + 1e-15 * t
        x = mids[inside] / t
        F = (1.0 - x) ** beta * g(x)
        weights[inside, j] = t ** (H - 0.5) * F * sqrt_w[inside]

    def one_path(i):
        z = _path_rng(seed, i).standard_normal(n_cells)
        x = z @ weights
        return np.concatenate([[0.0], x]) if has_zero else x

    values = _run_paths(n_paths, times.size, one_path)
    return PathEnsemble(spec, grid, values, seed, "volterra", inner_steps=inner_steps)


def sample_spec(
    spec: ProcessSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    scheme: Optional[str] = None,
    inner_steps: Optional[int] = None,
) -> PathEnsemble:
    """Sample a spec with its family-appropriate (or requested) scheme."""
    fam = spec.family
    if scheme is None:
        scheme = {
            Family.CANONICAL: "timechange",
            Family.WHITE_NOISE: "whitenoise",
            Family.VOLTERRA_G: "volterra",
        }.get(fam, "cholesky")
        if fam == Family.CANONICAL and math.isinf(spec.c):
            scheme = "whitenoise"
    if scheme == "timechange":
        if fam != Family.CANONICAL:
            raise ParameterError("timechange scheme applies to the canonical family")
        return sample_timechange(spec.H, spec.c, grid, n_paths, seed)
    if scheme == "whitenoise":
        if fam == Family.CANONICAL and math.isinf(spec.c):
            return sample_whitenoise(spec.H, grid, n_paths, seed)
        if fam != Family.WHITE_NOISE:
            raise ParameterError("whitenoise scheme applies to the white-noise family")
        return sample_whitenoise(spec.H, grid, n_paths, seed)
    if scheme == "volterra":
        if fam == Family.CANONICAL:
            return sample_volterra_canonical(spec.H, spec.c, grid, inner_steps or 256, n_paths, seed)
        if fam == Family.VOLTERRA_G:
            return sample_volterra_zg(spec.H, spec.beta, spec.g, grid, inner_steps, n_paths, seed)
        raise ParameterError("volterra scheme applies to canonical or volterra-g specs")
    if scheme == "cholesky":
        return sample_cholesky(make_kernel(spec), grid, n_paths, seed)
    raise ParameterError(f"unknown sampling scheme {scheme!r}")


def empirical_cov(ensemble: PathEnsemble) -> EmpiricalCov:
    """Unbiased sample covariance with delta-method standard errors.

    The standard error of cov[i, j] uses the Gaussian fourth-moment formula
    (c_ii c_jj + c_ij^2) / n with the estimated covariance plugged in.
    Accumulations are plain numpy pairwise sums in a fixed order.
    """
    n = ensemble.n_paths
    if n < 2:
        raise ParameterError("empirical covariance requires n_paths >= 2")
    X = ensemble.values
    d = X.shape[1]
    mean = np.array([float(np.sum(X[:, i])) / n for i in range(d)])
    C = X - mean
    cov = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            cij = float(np.sum(C[:, i] * C[:, j])) / (n - 1)
            cov[i, j] = cij
            cov[j, i] = cij
    var = np.diag(cov)
    se = np.sqrt(np.maximum(np.outer(var, var) + cov**2, 0.0) / n)
    return EmpiricalCov(ensemble.grid, mean, cov, se, n)


@dataclass(frozen=True, eq=False)
class SelfSimReport:
    """Elementwise scaling check between grids g and a*g."""

    a: float
    H: float
    ratios: np.ndarray  # |cov_a - a^(2H) cov| / (4 * combined SE)
    max_ratio: float
    n_exceed: int


def selfsim_check(
    spec: ProcessSpec,
    a: float,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    scheme: Optional[str] = None,
) -> SelfSimReport:
    """Compare sampled covariance on a*grid against a^(2H) times grid's.

    The two ensembles use independent substream families (seed and seed+1).
    Reported ratios are |difference| / (4 * combined SE); values <= 1 are
    within the design tolerance.
    """
    if not a > 0:
        raise ParameterError("a must be positive")
    base = empirical_cov(sample_spec(spec, grid, n_paths, seed, scheme=scheme))
    scaled = empirical_cov(sample_spec(spec, grid.scaled(a), n_paths, seed + 1, scheme=scheme))
    factor = a ** (2.0 * spec.H)
    diff = np.abs(scaled.cov - factor * base.cov)
    combined = np.sqrt(scaled.se**2 + (factor * base.se) ** 2)
    denom = 4.0 * np.where(combined > 0, combined, np.inf)
    ratios = diff / denom
    return SelfSimReport(a, spec.H, ratios, float(np.max(ratios)), int(np.sum(ratios > 1.0)))


# ---------------------------------------------------------------------------
# ensemble export
# ---------------------------------------------------------------------------

def ensemble_to_csv(ensemble: PathEnsemble) -> str:
    """CSV text: header = grid times, one row per path; 17 significant digits."""
    lines = [",".join(f"{x:.16e}" for x in ensemble.grid.times)]
    for row in ensemble.values:
        lines.append(",".join(f"{x:.16e}" for x in row))
    return "\n".join(lines) + "\n"


def save_ensemble(ensemble: PathEnsemble, path) -> None:
    """Write a column-major float64 matrix file plus a JSON sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(np.asfortranarray(ensemble.values).tobytes(order="F"))
    sidecar = {
        "spec": ensemble.spec.label(),
        "grid": [float(t) for t in ensemble.grid.times],
        "seed": ensemble.seed,
        "scheme": ensemble.scheme,
        "inner_steps": ensemble.inner_steps,
        "jitter": ensemble.jitter,
        "shape": list(ensemble.values.shape),
        "dtype": "float64",
        "order": "F",
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_ensemble(path) -> PathEnsemble:
    from .kernels import parse_spec_string

    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    shape = tuple(sidecar["shape"])
    raw = np.frombuffer(open(path, "rb").read(), dtype=np.float64)
    values = np.asarray(raw.reshape(shape, order="F"))
    return PathEnsemble(
        parse_spec_string(sidecar["spec"]),
        TimeGrid(np.asarray(sidecar["grid"], dtype=float)),
        values,
        int(sidecar["seed"]),
        sidecar["scheme"],
        inner_steps=sidecar.get("inner_steps"),
        jitter=float(sidecar.get("jitter", 0.0)),
    )
