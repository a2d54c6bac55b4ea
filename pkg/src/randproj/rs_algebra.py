"""Closed-form algebra for replica-symmetric matrices.

A replica-symmetric matrix of order ``m`` has a common diagonal value
``rho`` and a common off-diagonal value ``q``::

    R = (rho - q) I + q 1 1^T

so its spectrum has two values: ``rho + (m - 1) q`` on the all-ones
direction and ``rho - q`` (multiplicity ``m - 1``) on its complement.
Every function of ``R`` defined through the spectrum (inverse, square
root, inverse square root) is again replica-symmetric, which is what the
helpers here exploit.  Matrices are kept in parametric form and only
densified on request.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularMatrix

__all__ = [
    "RsMatrix",
    "KronCovariance",
    "rs_build",
    "rs_eigvals",
    "rs_inverse",
    "rs_sqrt",
    "rs_inv_sqrt",
    "sigma_sqrt",
    "sigma_inv_sqrt_opnorm",
]


@dataclass(frozen=True)
class RsMatrix:
    m: int
    rho: float
    q: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"order must be a positive integer, got {self.m!r}")

    @property
    def top(self) -> float:
        """Eigenvalue on the all-ones direction."""
        return self.rho + (self.m - 1) * self.q

    @property
    def rest(self) -> float:
        """Eigenvalue on the complement of the all-ones direction."""
        return self.rho - self.q

    def is_positive_definite(self) -> bool:
        if self.m == 1:
            return self.rho > 0
        return self.rest > 0 and self.top > 0

    def dense(self) -> np.ndarray:
        out = np.full((self.m, self.m), float(self.q))
        np.fill_diagonal(out, float(self.rho))
        return out


@dataclass(frozen=True)
class KronCovariance:
    """``base ⊗ I_k``: replica-major, coordinate-minor ordering."""

    base: RsMatrix
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")

    @property
    def order(self) -> int:
        return self.base.m * self.k

    def dense(self) -> np.ndarray:
        return np.kron(self.base.dense(), np.eye(self.k))


def rs_build(m: int, rho: float, q: float) -> RsMatrix:
    return RsMatrix(int(m), float(rho), float(q))


def rs_eigvals(R: RsMatrix) -> dict:
    """Return ``{"top": (value, 1), "rest": (value, m - 1)}``."""
    return {"top": (R.top, 1), "rest": (R.rest, R.m - 1)}


def _check_pd(R: RsMatrix) -> None:
    if not R.is_positive_definite():
        raise SingularMatrix(
            f"replica-symmetric matrix (m={R.m}, rho={R.rho}, q={R.q}) "
            "is not positive definite"
        )


def rs_inverse(R: RsMatrix) -> RsMatrix:
    """Inverse of a positive-definite replica-symmetric matrix.

    For ``q > 0`` this is the Sherman-Morrison form
    ``a = 1/(rho-q) - 1/(c (rho-q)^2)``, ``b = -1/(c (rho-q)^2)`` with
    ``c = 1/q + m/(rho-q)``.  That form has a removable singularity at
    ``q = 0`` and is not defined for ``q < 0``, so those cases go through
    the equivalent rank-one expression with ``1/(c (rho-q)^2)`` replaced by
    ``q / ((rho-q)(rho+(m-1)q))``.
    """
    _check_pd(R)
    m, rho, q = R.m, R.rho, R.q
    if m == 1:
        return RsMatrix(1, 1.0 / rho, 0.0)
    d = rho - q
    if q > 0:
        c = 1.0 / q + m / d
        b = -1.0 / (c * d * d)
    else:
        b = -q / (d * (rho + (m - 1) * q))
    return RsMatrix(m, 1.0 / d + b, b)


def _rs_from_spectrum(m: int, top: float, rest: float) -> RsMatrix:
    # (rest) I + ((top - rest)/m) 1 1^T
    off = (top - rest) / m
    return RsMatrix(m, rest + off, off)


def rs_sqrt(R: RsMatrix) -> RsMatrix:
    _check_pd(R)
    if R.m == 1:
        return RsMatrix(1, float(np.sqrt(R.rho)), 0.0)
    return _rs_from_spectrum(R.m, np.sqrt(R.top), np.sqrt(R.rest))


def rs_inv_sqrt(R: RsMatrix) -> RsMatrix:
    _check_pd(R)
    if R.m == 1:
        return RsMatrix(1, 1.0 / float(np.sqrt(R.rho)), 0.0)
    return _rs_from_spectrum(R.m, 1.0 / np.sqrt(R.top), 1.0 / np.sqrt(R.rest))


def sigma_sqrt(S: KronCovariance) -> np.ndarray:
    """Dense symmetric square root of ``base ⊗ I_k``, built from the spectrum."""
    return np.kron(rs_sqrt(S.base).dense(), np.eye(S.k))


def sigma_inv_sqrt_opnorm(rho: float, q: float) -> float:
    """Operator norm of ``(R^{2p}_{rho,q} ⊗ I_k)^{-1/2}``; equals ``1/sqrt(rho-q)``.

    The value does not depend on ``p`` or ``k``: for ``0 <= q`` the smallest
    eigenvalue of the covariance is ``rho - q``.
    """
    if q < 0 or q >= rho:
        raise DomainError(f"need 0 <= q < rho, got rho={rho}, q={q}")
    return 1.0 / float(np.sqrt(rho - q))
