"""Unitary transforms underlying the multicarrier schemes.

Provides normalized DFT, Walsh-Hadamard, discrete Fresnel and discrete
affine Fourier matrices, FFT-backed fast appliers, the 2-D grid
transforms between the delay-Doppler and time-frequency domains, and the
row/column interleaver used by the delay-sequency scheme.

Conventions
-----------
* All matrices are unitary with unit-norm rows.  The forward DFT is
  ``F[k, m] = exp(-2j*pi*k*m/n) / sqrt(n)``.
* Grids are ``(M, N)`` arrays; vectorization stacks columns
  (``order="F"``).  The row-wise vector used by the delay-sequency
  scheme is always expressed through :func:`rowwise_to_colwise`.
* Dense matrices are always available; ``apply_*`` helpers switch to
  FFT-based application for sizes >= ``FAST_PATH_MIN``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAST_PATH_MIN = 64

_KINDS = ("dft", "wht", "dfnt", "daft")


def dft_matrix(n: int) -> np.ndarray:
    """Normalized n-point DFT matrix ``F[k, m] = e^{-2j pi k m / n} / sqrt(n)``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def wht_matrix(n: int) -> np.ndarray:
    """Normalized Walsh-Hadamard matrix in natural (Sylvester) order.

    Requires ``n`` to be a power of two.  The result is real, symmetric
    and self-inverse, so the same matrix serves as forward and inverse
    transform.
    """
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"Walsh-Hadamard size must be a power of two, got {n}")
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h / np.sqrt(n)


def dfnt_matrix(n: int) -> np.ndarray:
    """Forward discrete Fresnel transform matrix.

    Entry ``(m, k)`` is ``e^{-j pi/4} e^{j pi (m - k)^2 / n} / sqrt(n)``
    for even ``n`` and uses the half-sample shift ``(m + 1/2 - k)`` for
    odd ``n``.  The chirp scheme modulates with the conjugate transpose.
    """
    m = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    shift = 0.0 if n % 2 == 0 else 0.5
    phase = np.exp(1j * np.pi * (m + shift - k) ** 2 / n)
    return np.exp(-1j * np.pi / 4) * phase / np.sqrt(n)


def chirp_diag(n: int, c: float) -> np.ndarray:
    """Diagonal of the quadratic chirp ``e^{-2j pi c m^2}``, m = 0..n-1."""
    m = np.arange(n)
    return np.exp(-2j * np.pi * c * m**2)


def daft_matrix(n: int, c1: float, c2: float) -> np.ndarray:
    """Forward discrete affine Fourier transform ``diag(c2) @ F @ diag(c1)``.

    ``c1 = c2 = 0`` reduces to the plain DFT; the discrete Fresnel
    transform is recovered (up to the global ``e^{-j pi/4}`` factor) at
    ``c1 = c2 = -1/(2n)`` for even ``n``.
    """
    return chirp_diag(n, c2)[:, None] * dft_matrix(n) * chirp_diag(n, c1)[None, :]


@dataclass(frozen=True)
class UnitaryMatrix:
    """A sized, typed unitary transform with dense entries.

    Immutable after construction; application to vectors is pure, so
    instances can be shared freely across threads.
    """

    kind: str
    size: int
    entries: np.ndarray
    c1: float | None = None
    c2: float | None = None

    def apply(self, x: np.ndarray, axis: int = 0) -> np.ndarray:
        """Forward transform along ``axis`` (FFT path for large sizes)."""
        if self.size >= FAST_PATH_MIN:
            return _fast_apply(self, x, axis, inverse=False)
        return _dense_apply(self.entries, x, axis)

    def apply_inverse(self, x: np.ndarray, axis: int = 0) -> np.ndarray:
        """Inverse (conjugate-transpose) transform along ``axis``."""
        if self.size >= FAST_PATH_MIN:
            return _fast_apply(self, x, axis, inverse=True)
        return _dense_apply(self.entries.conj().T, x, axis)


def unitary_matrix(kind: str, size: int, c1: float | None = None, c2: float | None = None) -> UnitaryMatrix:
    """Build one of the toolkit's unitary transforms.

    Parameters
    ----------
    kind : {"dft", "wht", "dfnt", "daft"}
    size : transform length (>= 1; power of two for "wht").
    c1, c2 : chirp-rate parameters, required for "daft" only.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown transform kind {kind!r}; expected one of {_KINDS}")
    if size < 1:
        raise ValueError(f"transform size must be >= 1, got {size}")
    if kind == "dft":
        entries = dft_matrix(size)
    elif kind == "wht":
        entries = wht_matrix(size)
    elif kind == "dfnt":
        entries = dfnt_matrix(size)
    else:
        if c1 is None or c2 is None:
            raise ValueError("daft requires real parameters c1 and c2")
        entries = daft_matrix(size, float(c1), float(c2))
    return UnitaryMatrix(kind=kind, size=size, entries=entries, c1=c1, c2=c2)


def _dense_apply(mat: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
    x = np.asarray(x)
    moved = np.moveaxis(x, axis, 0)
    out = np.tensordot(mat, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)


def _fast_apply(u: UnitaryMatrix, x: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    if u.kind == "dft":
        return apply_dft(x, axis=axis, inverse=inverse)
    if u.kind == "wht":
        return apply_wht(x, axis=axis)
    if u.kind == "dfnt":
        return apply_dfnt(x, axis=axis, inverse=inverse)
    if u.kind == "daft":
        return apply_daft(x, u.c1, u.c2, axis=axis, inverse=inverse)
    raise AssertionError(u.kind)


def apply_dft(x: np.ndarray, axis: int = 0, inverse: bool = False) -> np.ndarray:
    """Normalized (I)DFT along ``axis`` via FFT."""
    if inverse:
        return np.fft.ifft(x, axis=axis, norm="ortho")
    return np.fft.fft(x, axis=axis, norm="ortho")


def apply_wht(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Fast normalized Walsh-Hadamard transform along ``axis`` (self-inverse)."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[axis]
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"Walsh-Hadamard size must be a power of two, got {n}")
    rest = np.moveaxis(x, axis, 0).shape[1:]
    y = np.moveaxis(x, axis, 0).reshape(n, -1).copy()
    h = 1
    while h < n:
        y = y.reshape(n // (2 * h), 2, h, -1)
        a = y[:, 0] + y[:, 1]
        b = y[:, 0] - y[:, 1]
        y = np.concatenate([a[:, None], b[:, None]], axis=1).reshape(n, -1)
        h *= 2
    y = (y / np.sqrt(n)).reshape(n, *rest)
    return np.moveaxis(y, 0, axis)


def apply_dfnt(x: np.ndarray, axis: int = 0, inverse: bool = False) -> np.ndarray:
    """Fast discrete Fresnel transform along ``axis`` (diag-FFT-diag route)."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[axis]
    m = np.arange(n)
    if n % 2 == 0:
        left = np.exp(1j * np.pi * m**2 / n)
        right = np.exp(1j * np.pi * m**2 / n)
    else:
        left = np.exp(1j * np.pi * (m + 0.5) ** 2 / n)
        right = np.exp(1j * np.pi * (m**2 - m) / n)
    left = left * np.exp(-1j * np.pi / 4)
    shape = [1] * x.ndim
    shape[axis] = n
    left = left.reshape(shape)
    right = right.reshape(shape)
    if not inverse:
        return left * apply_dft(right * x, axis=axis)
    return right.conj() * apply_dft(left.conj() * x, axis=axis, inverse=True)


def apply_daft(x: np.ndarray, c1: float, c2: float, axis: int = 0, inverse: bool = False) -> np.ndarray:
    """Fast discrete affine Fourier transform along ``axis``."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[axis]
    shape = [1] * x.ndim
    shape[axis] = n
    d1 = chirp_diag(n, c1).reshape(shape)
    d2 = chirp_diag(n, c2).reshape(shape)
    if not inverse:
        return d2 * apply_dft(d1 * x, axis=axis)
    return d1.conj() * apply_dft(d2.conj() * x, axis=axis, inverse=True)


def isfft(grid: np.ndarray) -> np.ndarray:
    """Delay-Doppler grid -> time-frequency grid.

    An N-point IDFT along the Doppler axis (columns) composed with an
    M-point DFT along the delay axis (rows), jointly normalized by
    ``1/sqrt(M*N)``.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError(f"expected a non-empty 2-D grid, got shape {grid.shape}")
    return apply_dft(apply_dft(grid, axis=1, inverse=True), axis=0)


def sfft(grid: np.ndarray) -> np.ndarray:
    """Time-frequency grid -> delay-Doppler grid; exact inverse of :func:`isfft`."""
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError(f"expected a non-empty 2-D grid, got shape {grid.shape}")
    return apply_dft(apply_dft(grid, axis=0, inverse=True), axis=1)


def rowwise_to_colwise(m: int, n: int) -> np.ndarray:
    """Permutation ``perm`` with ``vec_col(X) = x_row[perm]`` for an (m, n) grid."""
    idx = np.arange(m * n).reshape(m, n)
    return idx.flatten(order="F")


def colwise_to_rowwise(m: int, n: int) -> np.ndarray:
    """Inverse permutation of :func:`rowwise_to_colwise`."""
    return np.argsort(rowwise_to_colwise(m, n))
