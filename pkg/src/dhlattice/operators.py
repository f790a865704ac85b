"""The linear part of the lattice system: difference operator, coefficient
operator, truncated matrix assembly, and the Bloch symbol.

On a block sequence x the two operators act node-wise as

    (A x)(n) = ( x2(n) - x2(n-1),  x1(n) - x1(n+1) )
    (S x)(n) = -S(n) x(n)

with neighbor references resolved by the window's boundary rule.  Both are
self-adjoint for the plain l2 inner product; A has operator norm at most 2 and
S at most Lambda0, so the sum is bounded by 2 + Lambda0.

The truncated matrix of A + S is assembled in the node-major, block-minor
basis (x1 components then x2 components within a node), which keeps the
zero-pad matrix banded with scalar bandwidth 4N - 1.  Windows above
``BANDED_THRESHOLD`` nodes store the matrix in LAPACK lower-banded form;
periodic windows are always dense because the wrap-around couplings fill the
corners.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .core import (
    BlockVector,
    Boundary,
    ConfigurationError,
    DimensionMismatchError,
    PeriodicCoefficients,
    Window,
    gap_bounds_from_matrices,
)

BANDED_THRESHOLD = 512


def _neighbor(entries: np.ndarray, step: int, boundary: Boundary) -> np.ndarray:
    """Row i of the result holds row i + step of ``entries`` under the boundary rule."""
    if boundary is Boundary.PERIODIC:
        return np.roll(entries, -step, axis=0)
    out = np.zeros_like(entries)
    if step == 1:
        out[:-1] = entries[1:]
    elif step == -1:
        out[1:] = entries[:-1]
    else:
        raise ValueError("only unit steps are needed")
    return out


def apply_A(x: BlockVector) -> BlockVector:
    """First-order difference part: z(n) = (x2(n) - x2(n-1), x1(n) - x1(n+1))."""
    boundary = x.window.boundary
    x1, x2 = x.x1(), x.x2()
    z1 = x2 - _neighbor(x2, -1, boundary)
    z2 = x1 - _neighbor(x1, +1, boundary)
    return x.with_entries(np.hstack([z1, z2]))


def apply_S(x: BlockVector, coeffs: PeriodicCoefficients) -> BlockVector:
    """Coefficient part: z(n) = -S(n mod T) x(n)."""
    if coeffs.block_dim != x.block_dim:
        raise DimensionMismatchError(
            f"coefficients have block dimension {coeffs.block_dim}, vector has {x.block_dim}"
        )
    window = x.window
    if window.boundary is Boundary.PERIODIC and window.num_nodes % coeffs.period:
        raise ConfigurationError(
            f"periodic window needs a node count divisible by the period "
            f"({window.num_nodes} nodes, period {coeffs.period})"
        )
    per_node = coeffs.matrices[window.nodes % coeffs.period]
    return x.with_entries(-np.einsum("kij,kj->ki", per_node, x.entries))


def _node_blocks(coeffs: PeriodicCoefficients, window: Window):
    """Diagonal and neighbor coupling blocks of A + S in the node basis."""
    n = coeffs.block_dim
    eye = np.eye(n)
    a_diag = np.zeros((2 * n, 2 * n))
    a_diag[:n, n:] = eye
    a_diag[n:, :n] = eye
    # coupling of node m's z1 rows to node m-1's x2 columns
    c_low = np.zeros((2 * n, 2 * n))
    c_low[:n, n:] = -eye
    diags = [a_diag - coeffs.matrix_at(int(node)) for node in window.nodes]
    return diags, c_low


def _assemble_dense(window: Window, coeffs: PeriodicCoefficients) -> np.ndarray:
    diags, c_low = _node_blocks(coeffs, window)
    n2 = 2 * coeffs.block_dim
    count = window.num_nodes
    dim = count * n2
    mat = np.zeros((dim, dim))
    for i, blk in enumerate(diags):
        mat[i * n2 : (i + 1) * n2, i * n2 : (i + 1) * n2] = blk
    for i in range(count):
        j = i - 1
        if j < 0:
            if window.boundary is not Boundary.PERIODIC or count == 1:
                continue
            j = count - 1
        mat[i * n2 : (i + 1) * n2, j * n2 : (j + 1) * n2] += c_low
        mat[j * n2 : (j + 1) * n2, i * n2 : (i + 1) * n2] += c_low.T
    return mat


def _assemble_banded(window: Window, coeffs: PeriodicCoefficients) -> np.ndarray:
    """Lower-banded storage: bands[k, j] = M[j + k, j]."""
    diags, c_low = _node_blocks(coeffs, window)
    n = coeffs.block_dim
    n2 = 2 * n
    count = window.num_nodes
    dim = count * n2
    bw = 4 * n - 1
    bands = np.zeros((bw + 1, dim))
    for i, blk in enumerate(diags):
        base = i * n2
        for a in range(n2):
            for b in range(a, n2):
                bands[b - a, base + a] = blk[b, a]
    # M[rows(i+1), cols(i)] = c_low: entry (b, a) sits at offset n2 + b - a
    for i in range(count - 1):
        base = i * n2
        for a in range(n2):
            for b in range(n2):
                if c_low[b, a] != 0.0:
                    bands[n2 + b - a, base + a] = c_low[b, a]
    return bands


def banded_matvec(bands: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Product of a symmetric lower-banded matrix with a vector."""
    bw = bands.shape[0] - 1
    ab = np.ascontiguousarray(bands)
    return scipy.linalg.blas.dsbmv(bw, 1.0, ab, vec, lower=1)


def lower_band_to_full(bands: np.ndarray) -> np.ndarray:
    """Expand symmetric lower-banded storage to the (2*bw+1)-row general band form."""
    bw = bands.shape[0] - 1
    dim = bands.shape[1]
    ab = np.zeros((2 * bw + 1, dim))
    for k in range(bw + 1):
        # lower diagonal k: M[j+k, j] -> ab[bw + k, j]
        ab[bw + k, : dim - k if k else dim] = bands[k, : dim - k if k else dim]
        if k:
            # mirrored upper diagonal: M[j, j+k] -> ab[bw - k, j+k]
            ab[bw - k, k:] = bands[k, : dim - k]
    return ab


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """The matrix of A + S on a window, dense or lower-banded."""

    window: Window
    coeffs: PeriodicCoefficients
    storage: str
    matrix: Optional[np.ndarray] = None
    bands: Optional[np.ndarray] = None
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "dim", self.window.num_nodes * 2 * self.coeffs.block_dim
        )

    @property
    def block_dim(self) -> int:
        return self.coeffs.block_dim

    def matvec(self, flat: np.ndarray) -> np.ndarray:
        if self.storage == "dense":
            return self.matrix @ flat
        return banded_matvec(self.bands, flat)

    def apply(self, x: BlockVector) -> BlockVector:
        if x.window != self.window or x.block_dim != self.block_dim:
            raise DimensionMismatchError("vector does not match the operator's window")
        return BlockVector.from_flat(self.window, self.block_dim, self.matvec(x.flat))

    def to_dense(self) -> np.ndarray:
        if self.storage == "dense":
            return self.matrix
        bw = self.bands.shape[0] - 1
        mat = np.zeros((self.dim, self.dim))
        for k in range(bw + 1):
            vals = self.bands[k, : self.dim - k] if k else self.bands[0]
            idx = np.arange(self.dim - k)
            mat[idx + k, idx] = vals
            if k:
                mat[idx, idx + k] = vals
        return mat

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Full symmetric eigendecomposition, eigenvalues ascending."""
        if self.storage == "dense":
            return scipy.linalg.eigh(self.matrix)
        return scipy.linalg.eig_banded(self.bands, lower=True)


def assemble(
    window: Window, coeffs: PeriodicCoefficients, storage: str = "auto"
) -> TruncatedOperator:
    """Matrix of x -> apply_A(x) + apply_S(x, coeffs) on the window."""
    if window.boundary is Boundary.PERIODIC and window.num_nodes % coeffs.period:
        raise ConfigurationError(
            f"periodic window needs a node count divisible by the period "
            f"({window.num_nodes} nodes, period {coeffs.period})"
        )
    if storage == "auto":
        use_banded = (
            window.boundary is Boundary.ZERO_PAD and window.num_nodes > BANDED_THRESHOLD
        )
        storage = "banded" if use_banded else "dense"
    if storage == "banded":
        if window.boundary is Boundary.PERIODIC:
            raise ConfigurationError("banded storage requires a zero-pad window")
        return TruncatedOperator(window, coeffs, "banded", bands=_assemble_banded(window, coeffs))
    if storage != "dense":
        raise ConfigurationError(f"unknown storage kind {storage!r}")
    return TruncatedOperator(window, coeffs, "dense", matrix=_assemble_dense(window, coeffs))


def floquet_symbol(theta: float, coeffs: PeriodicCoefficients) -> np.ndarray:
    """Bloch symbol of A + S at quasimomentum theta.

    Restricts the operator to sequences with x(n + T) = exp(i theta) x(n) and
    expresses it on one period cell, giving a Hermitian matrix of size 2NT
    whose eigenvalues over theta in [0, 2pi) sweep out the full-lattice
    spectrum.  Assembled numerically by applying the node-wise operator to the
    canonical cell basis on three consecutive cells.
    """
    t = coeffs.period
    n = coeffs.block_dim
    n2 = 2 * n
    dim = t * n2
    phase = np.exp(1j * float(theta))
    symbol = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        cell = np.zeros((t, n2), dtype=complex)
        cell[col // n2, col % n2] = 1.0
        x = np.vstack([cell / phase, cell, cell * phase])  # nodes -T .. 2T-1
        x1, x2 = x[:, :n], x[:, n:]
        out = np.empty((t, n2), dtype=complex)
        for r in range(t):
            m = t + r  # row of node r in the 3-cell stack
            out[r, :n] = x2[m] - x2[m - 1]
            out[r, n:] = x1[m] - x1[m + 1]
            out[r] -= coeffs.matrix_at(r) @ x[m]
        symbol[:, col] = out.reshape(-1)
    return symbol


def coercivity_bounds(coeffs: PeriodicCoefficients) -> tuple[float, float]:
    """Extreme eigenvalues of J0 S(n) over one period, both positive."""
    return gap_bounds_from_matrices(coeffs.matrices)
