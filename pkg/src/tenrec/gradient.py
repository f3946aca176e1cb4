"""Cyclic temporal difference operator and its spectral linear solver.

The forward difference along the time mode maps each fiber
``(x_1, ..., x_{n2})`` to ``(x_2 - x_1, ..., x_1 - x_{n2})`` — a circulant
matrix ``D`` with ``-1`` on the diagonal and ``+1`` on the wrapped
superdiagonal.  ``D^T D`` is a circulant Laplacian with eigenvalues
``2 - 2 cos(2 pi k / n2)``; its eigendecomposition is computed once per
operator and reused to solve the per-fiber systems
``(alpha I + beta D^T D) x = w`` that the completion solver needs.
"""

from __future__ import annotations

import numpy as np

from .tensor3 import fold, unfold

__all__ = [
    "GradientOperator",
    "build_gradient_operator",
    "gradient",
    "gradient_adjoint",
    "solve_identity_plus_laplacian",
    "solve_scaled_laplacian",
]

# Eigenvalues of D^T D this close to zero (they are >= 0 in exact arithmetic)
# are clamped to exactly zero; anything more negative indicates a broken
# eigensolve and is rejected.
_EIG_CLAMP = 1e-10


class GradientOperator:
    """Cyclic forward-difference operator along the time mode.

    Attributes
    ----------
    n2 : int
        Time-mode length (must be >= 2).
    matrix : numpy.ndarray
        The dense ``(n2, n2)`` difference matrix ``D``.
    eigenvalues : numpy.ndarray
        Eigenvalues of ``D^T D``, ascending, clamped to be nonnegative.
    eigenvectors : numpy.ndarray
        Orthonormal eigenvectors of ``D^T D`` (columns), matching
        ``eigenvalues``.
    """

    def __init__(self, n2: int):
        n2 = int(n2)
        if n2 < 2:
            raise ValueError(f"the time mode must have length >= 2, got {n2}")
        self.n2 = n2
        d = -np.eye(n2) + np.eye(n2, k=1)
        d[-1, 0] = 1.0  # cyclic wrap: last gradient entry is x_1 - x_n2
        self.matrix = d
        laplacian = d.T @ d
        eigenvalues, eigenvectors = np.linalg.eigh(laplacian)
        if eigenvalues.min() < -_EIG_CLAMP:
            raise np.linalg.LinAlgError(
                f"eigendecomposition of the difference Laplacian produced eigenvalue {eigenvalues.min():g} < 0"
            )
        self.eigenvalues = np.maximum(eigenvalues, 0.0)
        self.eigenvectors = eigenvectors

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"GradientOperator(n2={self.n2})"


def build_gradient_operator(n2: int) -> GradientOperator:
    """Construct the operator (and its cached eigendecomposition) for `n2`."""
    return GradientOperator(n2)


def gradient(op: GradientOperator, t: np.ndarray) -> np.ndarray:
    """Forward cyclic difference along mode 2: entry j is ``x_{j+1} - x_j``.

    Equivalent to the time-mode product with ``op.matrix`` but computed with a
    roll, which is exact and avoids the matrix multiply.
    """
    _check_time_mode(op, t)
    return np.roll(t, -1, axis=1) - t


def gradient_adjoint(op: GradientOperator, t: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`gradient` (time-mode product with ``D^T``)."""
    _check_time_mode(op, t)
    return np.roll(t, 1, axis=1) - t


def solve_identity_plus_laplacian(op: GradientOperator, w: np.ndarray) -> np.ndarray:
    """Solve ``(I + D^T D) x = w`` independently along every time fiber.

    This is the normal-equation system of the completion solver's tensor
    update; ``I + D^T D`` is symmetric positive definite, so the solution is
    unique.

    Parameters
    ----------
    op : GradientOperator
        Operator whose ``n2`` matches ``w.shape[1]``.
    w : numpy.ndarray
        Right-hand-side tensor.

    Returns
    -------
    numpy.ndarray
        Tensor of the same shape as `w`.
    """
    return solve_scaled_laplacian(op, w, 1.0, 1.0)


def solve_scaled_laplacian(op: GradientOperator, w: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Solve ``(alpha I + beta D^T D) x = w`` along mode 2 via the eigenbasis.

    Requires ``alpha > 0`` and ``beta >= 0`` so the system is positive
    definite.  With ``D^T D = A diag(s) A^T`` the solve is a rotation, a
    diagonal scaling by ``1 / (alpha + beta s)``, and a rotation back.
    """
    _check_time_mode(op, w)
    if alpha <= 0 or beta < 0:
        raise ValueError(f"need alpha > 0 and beta >= 0, got alpha={alpha}, beta={beta}")
    denom = alpha + beta * op.eigenvalues
    a = op.eigenvectors
    w2 = unfold(w, 2)
    x2 = a @ ((a.T @ w2) / denom[:, None])
    return fold(x2, 2, w.shape)


def _check_time_mode(op: GradientOperator, t: np.ndarray) -> None:
    if t.ndim != 3:
        raise ValueError(f"expected a third-order tensor, got ndim {t.ndim}")
    if t.shape[1] != op.n2:
        raise ValueError(f"tensor time mode has size {t.shape[1]} but the operator was built for {op.n2}")
