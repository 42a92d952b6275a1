"""Dense real antisymmetric linear algebra: Pfaffian with sign, inverse columns.

The Pfaffian uses Parlett-Reid skew-symmetric tridiagonalization with partial
pivoting.  Each 2x2 elimination block contributes one super-diagonal pivot to
the Pfaffian; row/column interchanges flip its sign.  Magnitudes are
accumulated in log space so partition functions of large domains do not
overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import SingularMatrix

PIVOT_RATIO_WARN = 1e12
PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class AntisymMatrix:
    """Exactly antisymmetric real matrix of even dimension.

    ``index_map`` optionally records which oriented edge each row represents.
    """

    entries: np.ndarray
    index_map: dict | None = None

    def __post_init__(self):
        a = self.entries
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("square matrix required")
        if a.shape[0] % 2 != 0:
            raise ValueError("even dimension required")
        if not np.array_equal(a, -a.T):
            raise ValueError("matrix is not exactly antisymmetric")

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SignLog:
    """A real number ``sign * exp(log_abs)`` kept in factored form."""

    sign: float
    log_abs: float
    condition_warning: str | None = None

    @property
    def value(self) -> float:
        if self.sign == 0.0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    def __mul__(self, other: "SignLog") -> "SignLog":
        if self.sign == 0.0 or other.sign == 0.0:
            return SignLog(0.0, -math.inf)
        return SignLog(self.sign * other.sign, self.log_abs + other.log_abs,
                       self.condition_warning or other.condition_warning)

    def __truediv__(self, other: "SignLog") -> "SignLog":
        if other.sign == 0.0:
            raise ZeroDivisionError("division by zero SignLog")
        if self.sign == 0.0:
            return SignLog(0.0, -math.inf)
        return SignLog(self.sign / other.sign, self.log_abs - other.log_abs,
                       self.condition_warning or other.condition_warning)


def _parlett_reid(a: np.ndarray, monitor: bool = True) -> SignLog:
    """Tridiagonalize a skew-symmetric matrix in place; return Pf as SignLog."""
    n = a.shape[0]
    if n == 0:
        return SignLog(1.0, 0.0)
    sign = 1.0
    log_abs = 0.0
    pmax = 0.0
    pmin = math.inf
    for k in range(0, n - 1, 2):
        col = np.abs(a[k + 1:, k])
        kp = k + 1 + int(np.argmax(col))
        if kp != k + 1:
            a[[k + 1, kp], k:] = a[[kp, k + 1], k:]
            a[k:, [k + 1, kp]] = a[k:, [kp, k + 1]]
            sign = -sign
        pivot = a[k + 1, k]
        apiv = abs(pivot)
        if apiv < PIVOT_FLOOR:
            return SignLog(0.0, -math.inf)
        pmax = max(pmax, apiv)
        pmin = min(pmin, apiv)
        sign *= math.copysign(1.0, pivot)
        log_abs += math.log(apiv)
        if k + 2 < n:
            tau = a[k + 2:, k] / pivot
            w = a[k + 2:, k + 1]
            a[k + 2:, k + 2:] += np.outer(tau, w)
            a[k + 2:, k + 2:] -= np.outer(w, tau)
    warning = None
    if monitor and pmin > 0 and pmax / pmin > PIVOT_RATIO_WARN:
        warning = f"pivot ratio {pmax / pmin:.2e} exceeds {PIVOT_RATIO_WARN:.0e}"
        warnings.warn(warning, RuntimeWarning, stacklevel=3)
    # note: pivot a[k+1, k] sits on the SUB-diagonal; Pf = prod of
    # super-diagonal entries a[k, k+1] = -a[k+1, k], one flip per 2x2 block
    if (n // 2) % 2 == 1:
        sign = -sign
    return SignLog(sign, log_abs, warning)


def pfaffian_signlog(A: AntisymMatrix | np.ndarray) -> SignLog:
    a = A.entries if isinstance(A, AntisymMatrix) else np.asarray(A, dtype=float)
    res = _parlett_reid(a.astype(float, copy=True))
    if res.sign == 0.0 and a.shape[0] > 0:
        raise SingularMatrix("pivot underflow in Parlett-Reid elimination")
    return res


def pfaffian(A: AntisymMatrix | np.ndarray) -> float:
    """Pfaffian with sign.  Raises SingularMatrix on pivot collapse."""
    return pfaffian_signlog(A).value


def pfaffian_of_submatrix(entries: np.ndarray) -> float:
    """Pfaffian of a small antisymmetric block (e.g. minors of an inverse).

    Unlike :func:`pfaffian` this tolerates exact zeros (the Pfaffian of a
    correlation block may legitimately vanish).
    """
    a = np.asarray(entries, dtype=float)
    if a.shape[0] != a.shape[1] or a.shape[0] % 2 != 0:
        raise ValueError("even-order square block required")
    if not np.allclose(a, -a.T, rtol=0.0, atol=1e-12 * (1 + np.abs(a).max(initial=0.0))):
        raise ValueError("block is not antisymmetric")
    a = (a - a.T) / 2.0
    res = _parlett_reid(a, monitor=False)
    return res.value


def inverse_columns(A: AntisymMatrix, cols: Iterable[int]) -> Mapping[int, np.ndarray]:
    """Selected columns of the inverse, solved jointly from one LU factorization.

    Residuals are checked against ``1e-9 * ||A||_inf``; when at least a
    quarter of all columns is requested the full inverse is formed instead.
    """
    a = A.entries
    n = a.shape[0]
    wanted = sorted(set(int(c) for c in cols))
    if not wanted:
        return {}
    try:
        lu, piv = lu_factor(a)
    except Exception as exc:  # LinAlgError from scipy
        raise SingularMatrix(str(exc)) from exc
    if not np.all(np.isfinite(lu)):
        raise SingularMatrix("non-finite LU factors")
    norm = np.abs(a).sum(axis=1).max()
    if len(wanted) >= n // 4:
        rhs = np.eye(n)
        sol = lu_solve((lu, piv), rhs)
        out = {j: sol[:, j].copy() for j in wanted}
    else:
        rhs = np.zeros((n, len(wanted)))
        for i, j in enumerate(wanted):
            rhs[j, i] = 1.0
        sol = lu_solve((lu, piv), rhs)
        out = {j: sol[:, i].copy() for i, j in enumerate(wanted)}
    for j, x in out.items():
        ej = np.zeros(n)
        ej[j] = 1.0
        resid = np.abs(a @ x - ej).max()
        if resid > 1e-9 * max(norm, 1.0):
            raise SingularMatrix(f"inverse column {j} residual {resid:.2e}")
    return out


def slogdet_ratio(num: np.ndarray, den: np.ndarray) -> SignLog:
    """log |det(num)/det(den)| as a SignLog with unit sign.

    Used as the determinant cross-check route for Pfaffian magnitude ratios:
    |Pf(num)/Pf(den)| = sqrt(|det num / det den|).
    """
    s1, l1 = np.linalg.slogdet(num)
    s2, l2 = np.linalg.slogdet(den)
    if s1 == 0 or s2 == 0:
        raise SingularMatrix("zero determinant in ratio")
    return SignLog(1.0, 0.5 * (l1 - l2))
