"""Dense third-order tensor primitives: unfolding, folding, mode products.

Conventions
-----------
A tensor here is a dense ``float64`` :class:`numpy.ndarray` with ``ndim == 3``
and shape ``(n1, n2, n3)`` — location x time-of-day x day in the traffic
setting.  The flat buffer convention is Fortran order: the first index varies
fastest.

The mode-``i`` unfolding (``i`` in ``{1, 2, 3}``) is the matrix whose row
index is the mode-``i`` coordinate and whose column index enumerates the two
remaining coordinates in ascending mode order, earlier mode varying fastest.
``fold`` is the exact inverse of ``unfold``.  Observation masks are boolean
arrays of the same shape; ``project`` keeps observed entries and zeroes the
rest.
"""

from __future__ import annotations

import numpy as np

MODES = (1, 2, 3)

__all__ = [
    "MODES",
    "as_tensor3",
    "as_mask",
    "unfold",
    "fold",
    "mode2_product",
    "project",
    "norm_l1",
    "norm_fro",
    "norm_linf",
]


def as_tensor3(data, name: str = "tensor") -> np.ndarray:
    """Coerce `data` to a finite float64 array of ndim 3.

    Parameters
    ----------
    data : array_like
        Anything ``np.asarray`` accepts, with exactly three axes.
    name : str
        Label used in error messages.

    Returns
    -------
    numpy.ndarray
        ``float64`` view or copy with ``ndim == 3``.
    """
    t = np.asarray(data, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError(f"{name} must have ndim 3, got ndim {t.ndim}")
    if t.size == 0:
        raise ValueError(f"{name} must have positive dimensions, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError(f"{name} must contain only finite values")
    return t


def as_mask(mask, dims: tuple[int, int, int] | None = None) -> np.ndarray:
    """Coerce `mask` to a boolean array, optionally checking its shape."""
    m = np.asarray(mask)
    if m.dtype != np.bool_:
        m = m.astype(bool)
    if m.ndim != 3:
        raise ValueError(f"mask must have ndim 3, got ndim {m.ndim}")
    if dims is not None and m.shape != tuple(dims):
        raise ValueError(f"mask shape {m.shape} does not match tensor shape {tuple(dims)}")
    return m


def _check_mode(mode: int) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-`mode` unfolding of a third-order tensor.

    Rows index the `mode` coordinate; columns enumerate the remaining two
    coordinates in ascending mode order with the earlier one varying fastest.

    Parameters
    ----------
    t : numpy.ndarray
        Third-order tensor.
    mode : int
        One of 1, 2, 3.

    Returns
    -------
    numpy.ndarray
        Matrix of shape ``(t.shape[mode-1], prod(other dims))``.
    """
    _check_mode(mode)
    if t.ndim != 3:
        raise ValueError(f"expected a third-order tensor, got ndim {t.ndim}")
    return np.reshape(np.moveaxis(t, mode - 1, 0), (t.shape[mode - 1], -1), order="F")


def fold(mat: np.ndarray, mode: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor of shape `dims`."""
    _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError(f"dims must have length 3, got {dims}")
    rest = [d for k, d in enumerate(dims) if k != mode - 1]
    expected = (dims[mode - 1], rest[0] * rest[1])
    if mat.ndim != 2 or mat.shape != expected:
        raise ValueError(f"matrix shape {mat.shape} does not fold into {dims} along mode {mode}")
    return np.moveaxis(np.reshape(mat, (dims[mode - 1], rest[0], rest[1]), order="F"), 0, mode - 1)


def mode2_product(t: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Multiply a matrix into the time mode: ``fold_2(m @ unfold_2(t))``.

    Parameters
    ----------
    t : numpy.ndarray
        Tensor of shape ``(n1, n2, n3)``.
    m : numpy.ndarray
        Matrix with ``m.shape[1] == n2``; the result has ``m.shape[0]`` in
        place of ``n2``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"m must be a matrix, got ndim {m.ndim}")
    if m.shape[1] != t.shape[1]:
        raise ValueError(f"m has {m.shape[1]} columns but the tensor's time mode has size {t.shape[1]}")
    out_dims = (t.shape[0], m.shape[0], t.shape[2])
    return fold(m @ unfold(t, 2), 2, out_dims)


def project(t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep entries where `mask` is True, zero elsewhere."""
    mask = as_mask(mask, t.shape)
    return np.where(mask, t, 0.0)


def norm_l1(t: np.ndarray) -> float:
    """Entrywise l1 norm."""
    return float(np.abs(t).sum())


def norm_fro(t: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(t).ravel()))


def norm_linf(t: np.ndarray) -> float:
    """Entrywise max-absolute norm."""
    return float(np.abs(t).max())
