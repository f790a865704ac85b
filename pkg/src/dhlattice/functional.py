"""The action functional whose critical points are the truncated orbits.

With H0 the truncated operator A + S and Psi the lattice sum of the
interaction density, the functional and its l2 gradient are

    Phi(x)      = (1/2) (H0 x, x) - Psi(x)
    grad Phi(x) = H0 x - grad R(., x(.))            (node-wise gradient)

so grad Phi = 0 is exactly the truncated difference system.  Given a spectral
decomposition the same value splits as

    Phi(x) = (1/2) ||x+||^2 - (1/2) ||x-||^2 - Psi(x)

in the |A+S|^{1/2} norm, which exhibits the saddle structure: the quadratic
part is positive definite on the span of positive eigenvectors and negative
definite on the rest.  The identity

    Phi(x) - (1/2) (grad Phi(x), x) = sum_n tildeR(n, x(n))

holds exactly because the quadratic part cancels; energy_defect returns its
floating-point residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BlockVector, ConfigurationError, DimensionMismatchError, l2_inner
from .nonlinearity import Nonlinearity, eval_tildeR
from .operators import TruncatedOperator, apply_A, apply_S
from .spectral import SpectralDecomposition, e_norm, eigendecompose, projectors


@dataclass(frozen=True, eq=False)
class FunctionalContext:
    """Operator, nonlinearity, and optional spectral data for one problem."""

    op: TruncatedOperator
    nl: Nonlinearity
    dec: Optional[SpectralDecomposition] = None

    def __post_init__(self) -> None:
        if self.op.block_dim != self.nl.block_dim:
            raise DimensionMismatchError(
                f"operator block dimension {self.op.block_dim} != "
                f"nonlinearity block dimension {self.nl.block_dim}"
            )
        if self.op.coeffs.period % self.nl.period:
            raise DimensionMismatchError(
                f"coefficient period {self.op.coeffs.period} is not a multiple of "
                f"the nonlinearity period {self.nl.period}"
            )
        if self.dec is not None and self.dec.window != self.op.window:
            raise DimensionMismatchError("decomposition window does not match operator")

    @property
    def window(self):
        return self.op.window

    def with_decomposition(self) -> "FunctionalContext":
        if self.dec is not None:
            return self
        return FunctionalContext(op=self.op, nl=self.nl, dec=eigendecompose(self.op))

    def _check(self, x: BlockVector) -> None:
        if x.window != self.op.window or x.block_dim != self.op.block_dim:
            raise DimensionMismatchError("vector does not match the context's window")

    def linear_apply(self, x: BlockVector) -> BlockVector:
        """(A + S) x via the node-wise formulas (no assembled matrix involved)."""
        return x.with_entries(apply_A(x).entries + apply_S(x, self.op.coeffs).entries)

    def gradient_entries(self, x: BlockVector) -> np.ndarray:
        """Per-node rows of grad Phi(x)."""
        lin = apply_A(x).entries + apply_S(x, self.op.coeffs).entries
        out = np.array(lin)
        for i, n in enumerate(self.window.nodes):
            out[i] -= self.nl.gradient(int(n), x.entries[i])
        return out


def Psi(ctx: FunctionalContext, x: BlockVector) -> float:
    """Sum over window nodes of the interaction density R(n, x(n))."""
    ctx._check(x)
    return float(
        sum(ctx.nl.value(int(n), x.entries[i]) for i, n in enumerate(ctx.window.nodes))
    )


def Phi(ctx: FunctionalContext, x: BlockVector) -> float:
    """Action value (1/2)((A+S)x, x) - Psi(x)."""
    ctx._check(x)
    lin = apply_A(x).entries + apply_S(x, ctx.op.coeffs).entries
    return 0.5 * float(np.vdot(lin, x.entries)) - Psi(ctx, x)


def grad_Phi(ctx: FunctionalContext, x: BlockVector) -> BlockVector:
    """l2 representer of the derivative: (A+S)x - grad R(., x(.)) node-wise."""
    ctx._check(x)
    return x.with_entries(ctx.gradient_entries(x))


def Phi_split(ctx: FunctionalContext, x: BlockVector) -> tuple[float, float, float]:
    """The three terms ((1/2)||x+||^2, (1/2)||x-||^2, Psi(x)) of the saddle form."""
    if ctx.dec is None:
        raise ConfigurationError(
            "Phi_split needs a FunctionalContext carrying a spectral decomposition"
        )
    ctx._check(x)
    x_minus, x_plus = projectors(ctx.dec, x)
    return (
        0.5 * e_norm(ctx.dec, x_plus) ** 2,
        0.5 * e_norm(ctx.dec, x_minus) ** 2,
        Psi(ctx, x),
    )


def energy_defect(ctx: FunctionalContext, x: BlockVector) -> float:
    """Residual of the exact identity Phi - (1/2)(grad Phi, x) = sum tildeR."""
    ctx._check(x)
    tilde_sum = float(
        sum(eval_tildeR(ctx.nl, int(n), x.entries[i]) for i, n in enumerate(ctx.window.nodes))
    )
    return Phi(ctx, x) - 0.5 * l2_inner(grad_Phi(ctx, x), x) - tilde_sum
