"""Gram matrices, positive-semidefiniteness checks, and closed-form minors.

The determinant of the matrix ((t_i v t_j)^alpha / (t_i ^ t_j)^beta) over a
strictly increasing positive grid factorizes as

    t_d^(alpha-beta) * prod_{i<d} (t_i^(alpha+beta) - t_{i+1}^(alpha+beta)) / t_i^(2 beta),

a chain specialization of the determinant identity for matrices of the form
f_i(x_i ^ x_j).  Every factor is nonnegative exactly when alpha + beta <= 0,
which is also the positive-definiteness boundary of that kernel family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import NumericalError, ParameterError
from .kernels import CovKernel

__all__ = [
    "TimeGrid",
    "GramMatrix",
    "MinorQuery",
    "PosDefReport",
    "standard_grid",
    "build_gram",
    "psd_check",
    "lindstrom_minor",
    "chain_det",
    "minor_residual",
    "gram_to_csv",
]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing, nonnegative sample times."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 1:
            raise ParameterError("grid must be a nonempty 1-D sequence")
        if np.any(times < 0):
            raise ParameterError("grid times must be nonnegative")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ParameterError("grid times must be strictly increasing")

    @classmethod
    def from_times(cls, times) -> "TimeGrid":
        return cls(np.asarray(times, dtype=float))

    @classmethod
    def geometric(cls, start: float, stop: float, points: int) -> "TimeGrid":
        if not (start > 0 and stop > start and points >= 1):
            raise ParameterError(
                f"geometric grid requires 0 < start < stop and points >= 1, got {start!r}, {stop!r}, {points!r}"
            )
        return cls(np.geomspace(start, stop, points))

    def __len__(self) -> int:
        return int(self.times.size)

    def scaled(self, a: float) -> "TimeGrid":
        if not a > 0:
            raise ParameterError("scale factor must be positive")
        return TimeGrid(self.times * a)


def standard_grid() -> TimeGrid:
    """20-point geometric grid on [0.05, 5], the default for kernel diagnostics."""
    return TimeGrid.geometric(0.05, 5.0, 20)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric covariance matrix entries[i][j] = R(t_i, t_j) over a grid."""

    grid: TimeGrid
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        d = len(self.grid)
        if entries.shape != (d, d):
            raise ParameterError(f"entries must be {d}x{d}, got {entries.shape}")


@dataclass(frozen=True)
class MinorQuery:
    """(alpha, beta) kernel exponents together with a positive grid."""

    alpha: float
    beta: float
    grid: TimeGrid

    def __post_init__(self):
        if np.any(self.grid.times <= 0):
            raise ParameterError("minor queries require strictly positive grid times")


@dataclass(frozen=True)
class PosDefReport:
    """Verdict of a positive-semidefiniteness check."""

    verdict: str  # "PSD" | "NotPSD"
    min_eigenvalue_bound: float
    tol: float
    witness: Optional[np.ndarray] = None
    quadratic_form: Optional[float] = None

    @property
    def is_psd(self) -> bool:
        return self.verdict == "PSD"


def build_gram(kernel: CovKernel, grid: TimeGrid) -> GramMatrix:
    """Evaluate the kernel on the upper triangle i <= j and mirror it."""
    times = grid.times
    d = times.size
    iu, ju = np.triu_indices(d)
    try:
        vals = np.asarray(kernel(times[iu], times[ju]), dtype=float)
    except Exception as exc:
        # locate the first failing pair so the error carries (i, j) context
        for i, j in zip(iu, ju):
            try:
                kernel(float(times[i]), float(times[j]))
            except Exception as inner:
                raise NumericalError(
                    f"kernel evaluation failed at grid indices ({i},{j}), "
                    f"times ({times[i]!r}, {times[j]!r}): {inner}"
                ) from inner
        raise NumericalError(f"kernel evaluation failed on grid: {exc}") from exc
    entries = np.zeros((d, d), dtype=float)
    entries[iu, ju] = vals
    entries[ju, iu] = vals
    return GramMatrix(grid, entries)


def psd_check(gram: GramMatrix, tol: float = 1e-10) -> PosDefReport:
    """Decide positive semidefiniteness via a pivoted LDL^T factorization.

    The matrix passes when every pivot eigenvalue is at least
    ``-tol * max(diagonal)``.  On failure the report carries a witness vector
    ``a`` with ``sum_kl a_k a_l R(t_k, t_l) < 0``.
    """
    if tol < 0:
        raise ParameterError("tol must be nonnegative")
    G = gram.entries
    d = G.shape[0]
    max_diag = float(np.max(np.abs(np.diag(G)))) if d else 0.0
    threshold = -tol * max(max_diag, 1.0e-300)

    lu, dblock, perm = scipy.linalg.ldl(G, lower=True)
    min_eig = float(np.min(np.linalg.eigvalsh(G)))

    # pivot eigenvalues of the (block-)diagonal factor
    pivots = []
    i = 0
    while i < d:
        if i + 1 < d and (dblock[i + 1, i] != 0.0 or dblock[i, i + 1] != 0.0):
            pivots.extend(np.linalg.eigvalsh(dblock[i : i + 2, i : i + 2]).tolist())
            i += 2
        else:
            pivots.append(float(dblock[i, i]))
            i += 1
    min_pivot = min(pivots) if pivots else 0.0

    if min_pivot >= threshold:
        return PosDefReport("PSD", min_eig, tol)

    witness = _negative_witness(G, lu, dblock, perm)
    qform = float(witness @ G @ witness)
    if qform >= 0.0:
        # fall back to the most negative eigenvector
        w, v = np.linalg.eigh(G)
        witness = v[:, 0]
        qform = float(witness @ G @ witness)
    return PosDefReport("NotPSD", min_eig, tol, witness=witness, quadratic_form=qform)


def _negative_witness(G, lu, dblock, perm):
    """Vector a with a^T G a equal to the most negative pivot eigenvalue."""
    d = G.shape[0]
    eigs = []
    vecs = []
    i = 0
    while i < d:
        if i + 1 < d and (dblock[i + 1, i] != 0.0 or dblock[i, i + 1] != 0.0):
            w, v = np.linalg.eigh(dblock[i : i + 2, i : i + 2])
            for k in range(2):
                y = np.zeros(d)
                y[i : i + 2] = v[:, k]
                eigs.append(w[k])
                vecs.append(y)
            i += 2
        else:
            y = np.zeros(d)
            y[i] = 1.0
            eigs.append(float(dblock[i, i]))
            vecs.append(y)
            i += 1
    k_min = int(np.argmin(eigs))
    y = vecs[k_min]
    # G = P L D L^T P^T with L[perm] lower triangular; solve L^T x = y there
    Lp = lu[perm, :]
    x = scipy.linalg.solve_triangular(Lp.T, y, lower=False)
    a = np.zeros(d)
    a[perm] = x
    norm = np.linalg.norm(a)
    return a / norm if norm > 0 else a


def lindstrom_minor(q: MinorQuery) -> float:
    """Closed-form determinant of the (alpha, beta) Gram matrix.

    For d = 1 this is t_1^(alpha - beta).
    """
    t = q.grid.times
    a, b = q.alpha, q.beta
    if np.any(t <= 0):
        raise ParameterError("grid times must be strictly positive")
    result = t[-1] ** (a - b)
    if t.size > 1:
        s = t ** (a + b)
        result *= float(np.prod((s[:-1] - s[1:]) / t[:-1] ** (2.0 * b)))
    return float(result)


def chain_det(values, grid: TimeGrid) -> float:
    """Determinant of (f_i(x_i ^ x_j)) from the triangular table f_i(x_j), j <= i.

    Equals prod_i (f_i(x_i) - f_i(x_{i-1})), with the i = 1 factor f_1(x_1):
    the chain's Moebius function is 1 on the diagonal, -1 on the subdiagonal
    and 0 elsewhere.
    """
    table = np.asarray(values, dtype=float)
    d = len(grid)
    if table.shape != (d, d):
        raise ParameterError(f"values table must be {d}x{d}, got {table.shape}")
    result = table[0, 0]
    for i in range(1, d):
        result *= table[i, i] - table[i, i - 1]
    return float(result)


def minor_residual(q: MinorQuery) -> float:
    """Relative gap between the closed-form minor and a direct determinant.

    The direct determinant uses pivoted elimination; the comparison is scaled
    by the product of matrix row norms (Hadamard bound), since the minors
    themselves underflow quickly as d grows.
    """
    t = q.grid.times
    d = t.size
    if d > 12:
        raise ParameterError("direct determinants are limited to d <= 12")
    lo = np.minimum.outer(t, t)
    hi = np.maximum.outer(t, t)
    G = hi**q.alpha / lo**q.beta
    direct = float(np.linalg.det(G))
    closed = lindstrom_minor(q)
    scale = float(np.prod(np.linalg.norm(G, axis=1)))
    return abs(closed - direct) / max(scale, 1e-300)


def gram_to_csv(gram: GramMatrix) -> str:
    """CSV text: header = grid times, then matrix rows; 17 significant digits, LF."""
    lines = [",".join(f"{x:.16e}" for x in gram.grid.times)]
    for row in gram.entries:
        lines.append(",".join(f"{x:.16e}" for x in row))
    return "\n".join(lines) + "\n"
