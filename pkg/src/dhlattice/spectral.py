"""Eigendecomposition of the truncated operator, the sign splitting of the
state space, the |A+S|^{1/2} norm, and band-structure reporting.

The splitting separates eigenvectors with negative and positive eigenvalues.
On periodic windows the truncation is spectrally exact (every eigenvalue is a
Bloch symbol sample), so the gap (-lambda0, lambda0) is certified free of
eigenvalues.  Zero-pad truncation can create boundary-localized modes inside
the gap; those are truncation artifacts and are surfaced by gap_mode_report
rather than treated as spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BlockVector,
    Boundary,
    DimensionMismatchError,
    NumericalError,
    PeriodicCoefficients,
    SpectralGapError,
    Window,
)
from .operators import TruncatedOperator, floquet_symbol

GAP_EIGENVALUE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Full eigensystem of a truncated operator with its sign splitting."""

    window: Window
    block_dim: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    split_index: int
    lambda0: float
    Lambda0: float

    @property
    def boundary(self) -> Boundary:
        return self.window.boundary

    def coords(self, x: BlockVector) -> np.ndarray:
        """Coordinates of x in the orthonormal eigenbasis."""
        if x.window != self.window or x.block_dim != self.block_dim:
            raise DimensionMismatchError("vector does not match the decomposition's window")
        return self.eigenvectors.T @ x.flat

    def _check_gap(self) -> None:
        closest = np.abs(self.eigenvalues).min()
        if closest < GAP_EIGENVALUE_TOL:
            raise SpectralGapError(
                f"eigenvalue {closest:.3e} within {GAP_EIGENVALUE_TOL:.0e} of zero; "
                "the sign splitting is ill-defined"
            )


def eigendecompose(op: TruncatedOperator) -> SpectralDecomposition:
    """Symmetric eigendecomposition of the truncated operator, ascending order."""
    try:
        eigenvalues, eigenvectors = op.eigh()
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(
            f"eigensolver failed on a {op.dim}x{op.dim} matrix "
            f"({op.window.boundary.value} window): {exc}"
        ) from exc
    eigenvalues = np.ascontiguousarray(eigenvalues)
    eigenvalues.flags.writeable = False
    eigenvectors = np.ascontiguousarray(eigenvectors)
    eigenvectors.flags.writeable = False
    split = int(np.searchsorted(eigenvalues, 0.0, side="right"))
    return SpectralDecomposition(
        window=op.window,
        block_dim=op.block_dim,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        split_index=split,
        lambda0=op.coeffs.lambda0,
        Lambda0=op.coeffs.Lambda0,
    )


def projectors(
    dec: SpectralDecomposition, x: BlockVector
) -> tuple[BlockVector, BlockVector]:
    """Split x = x_minus + x_plus along negative and positive eigenvectors."""
    dec._check_gap()
    c = dec.coords(x)
    s = dec.split_index
    minus_flat = dec.eigenvectors[:, :s] @ c[:s]
    plus_flat = dec.eigenvectors[:, s:] @ c[s:]
    return (
        BlockVector.from_flat(dec.window, dec.block_dim, minus_flat),
        BlockVector.from_flat(dec.window, dec.block_dim, plus_flat),
    )


def e_norm(dec: SpectralDecomposition, x: BlockVector) -> float:
    """The norm (sum_i |lambda_i| c_i^2)^{1/2} induced by |A+S|^{1/2}."""
    dec._check_gap()
    c = dec.coords(x)
    return float(np.sqrt(np.sum(np.abs(dec.eigenvalues) * c * c)))


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Bloch symbol eigenvalues on a quasimomentum grid, bands sorted per theta."""

    thetas: np.ndarray
    bands: np.ndarray  # shape (grid_size, 2NT)
    lambda0: float
    Lambda0: float

    @property
    def band_min(self) -> float:
        return float(self.bands.min())

    @property
    def band_max(self) -> float:
        return float(self.bands.max())

    def extrema(self) -> dict[str, float]:
        """Extreme band values split by sign."""
        neg = self.bands[self.bands < 0.0]
        pos = self.bands[self.bands > 0.0]
        out: dict[str, float] = {}
        if neg.size:
            out["negative_min"] = float(neg.min())
            out["negative_max"] = float(neg.max())
        if pos.size:
            out["positive_min"] = float(pos.min())
            out["positive_max"] = float(pos.max())
        return out


def band_structure(coeffs: PeriodicCoefficients, grid_size: int) -> BandStructure:
    """Symbol eigenvalues at theta_j = 2 pi j / grid_size for j = 0..grid_size-1."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    thetas = 2.0 * np.pi * np.arange(grid_size) / grid_size
    bands = np.empty((grid_size, 2 * coeffs.block_dim * coeffs.period))
    for j, theta in enumerate(thetas):
        bands[j] = np.linalg.eigvalsh(floquet_symbol(theta, coeffs))
    return BandStructure(
        thetas=thetas, bands=bands, lambda0=coeffs.lambda0, Lambda0=coeffs.Lambda0
    )


@dataclass(frozen=True)
class GapMode:
    index: int
    eigenvalue: float
    boundary_mass_fraction: float


@dataclass(frozen=True, eq=False)
class GapModeReport:
    """Eigenvalues found inside the spectral gap of a truncated operator.

    Periodic truncation cannot place eigenvalues in the gap, so its report is
    empty by construction.  Under zero padding each entry carries the fraction
    of eigenvector mass within ``boundary_layer`` nodes of either window edge,
    which identifies the mode as a truncation artifact when close to 1.
    """

    modes: tuple[GapMode, ...]
    lambda0: float
    boundary: Boundary
    num_nodes: int
    tol: float
    boundary_layer: int

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "boundary": self.boundary.value,
            "num_nodes": self.num_nodes,
            "tol": self.tol,
            "boundary_layer": self.boundary_layer,
            "modes": [
                {
                    "index": m.index,
                    "eigenvalue": m.eigenvalue,
                    "boundary_mass_fraction": m.boundary_mass_fraction,
                }
                for m in self.modes
            ],
        }


def gap_mode_report(
    dec: SpectralDecomposition, tol: float = 1e-9, boundary_layer: int = 5
) -> GapModeReport:
    """List eigenvalues inside (-lambda0 + tol, lambda0 - tol) with edge-mass data."""
    modes: list[GapMode] = []
    if dec.boundary is not Boundary.PERIODIC:
        count = dec.window.num_nodes
        layer = min(boundary_layer, count)
        inside = np.nonzero(np.abs(dec.eigenvalues) < dec.lambda0 - tol)[0]
        for idx in inside:
            vec = dec.eigenvectors[:, idx].reshape(count, 2 * dec.block_dim)
            mass = np.sum(vec * vec, axis=1)
            edge = mass[:layer].sum() + (mass[-layer:].sum() if count > layer else 0.0)
            modes.append(
                GapMode(
                    index=int(idx),
                    eigenvalue=float(dec.eigenvalues[idx]),
                    boundary_mass_fraction=float(edge / mass.sum()),
                )
            )
    return GapModeReport(
        modes=tuple(modes),
        lambda0=dec.lambda0,
        boundary=dec.boundary,
        num_nodes=dec.window.num_nodes,
        tol=tol,
        boundary_layer=boundary_layer,
    )
