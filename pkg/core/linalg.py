"""Dense LU factorization with row pivoting and a LAPACK condition estimate."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve

from core.config import NumericPolicy
from core.errors import SingularSystemError


@dataclass(frozen=True)
class Factorization:
    lu: np.ndarray
    piv: np.ndarray
    rcond: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        return lu_solve((self.lu, self.piv), b, check_finite=False)


def factorize(matrix: np.ndarray, policy: NumericPolicy | None = None, what: str = "system") -> Factorization:
    """Factorize once; reuse the result for every right-hand side.

    Raises SingularSystemError when the 1-norm condition estimate exceeds
    the policy's condition limit.
    """
    policy = policy or NumericPolicy()
    a = np.asarray(matrix, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a, check_finite=False)

    (gecon,) = get_lapack_funcs(("gecon",), (lu,))
    anorm = np.linalg.norm(a, 1)
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond * policy.condition_limit < 1.0:
        condition = None if rcond == 0 else 1.0 / float(rcond)
        shown = "inf" if condition is None else f"{condition:.3g}"
        raise SingularSystemError(
            f"The {what} is singular or near-singular (condition estimate {shown} exceeds "
            f"{policy.condition_limit:.3g}); duplicate or coincident sample locations are the likely cause",
            condition=condition,
        )
    return Factorization(lu=lu, piv=piv, rcond=float(rcond))


def max_residual(matrix: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(matrix @ x - b)))
