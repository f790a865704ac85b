"""Damped Newton search for nontrivial critical points of the action.

The root problem is F(x) = (A+S)x - grad R(., x(.)) = 0.  Each step solves

    [H0 - HessR(x)] delta = -F(x)

with the assembled operator matrix H0 and the block-diagonal Hessian of the
interaction sum (the interaction couples nodes only through themselves, so its
Hessian is one 2N x 2N block per node).  Backtracking damps steps on the
squared residual norm; a singular Newton matrix is regularized by adding tau I
with tau doubling on repeats, and if regularized steps keep stalling the
iteration falls back to plain descent on (1/2)||F||^2 as a rescue path.

Zero is always a root, so converged points below a smallness threshold are
rejected as trivial; accepted orbits are handed to the verification module
(difference-equation residual, decay fit, energy identity, window doubling)
and only fully verified results count as successes.

Initial guesses recycle the saddle geometry of the functional: the eigenvector
of the smallest positive eigenvalue is the flattest ascent direction of the
quadratic part, along which the action rises first and eventually falls once
the interaction takes over, so scaled copies of it bracket interesting
amplitudes.  Bump and random starts cover orbits the delocalized eigenvector
misses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .core import (
    BlockVector,
    Boundary,
    ConfigurationError,
    NumericalError,
    Window,
    lp_norm,
    shift,
)
from .functional import FunctionalContext, Phi
from .operators import TruncatedOperator, assemble, lower_band_to_full
from .spectral import eigendecompose
from .verify import VerificationReport, VerifyThresholds, verify_orbit

POLISH_FLOOR = 1e-13
BACKTRACK_MIN = 2.0**-40


@dataclass(frozen=True)
class StartStrategy:
    """One initial-guess recipe for the multi-start driver."""

    kind: str  # 'linking' | 'gaussian' | 'random'
    amplitude: float
    width: Optional[float] = None

    @property
    def tag(self) -> str:
        extra = f",w={self.width:g}" if self.width is not None else ""
        return f"{self.kind}(a={self.amplitude:g}{extra})"


def default_starts() -> tuple[StartStrategy, ...]:
    """A mix of eigenvector rays, bumps at orbit-like widths, and random seeds.

    Localized orbits are a few nodes wide, so narrow bumps carry most of the
    success probability; the wide bump and the eigenvector rays cover
    delocalized basins and the random seeds hedge against symmetry traps.
    """
    starts = [StartStrategy("linking", a) for a in (0.1, 1.0, 10.0)]
    starts += [StartStrategy("gaussian", a, width=2.0) for a in (0.5, 1.0, 2.0, 4.0)]
    starts += [StartStrategy("gaussian", 1.0)]
    starts += [StartStrategy("random", 1.0), StartStrategy("random", 3.0)]
    return tuple(starts)


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 200
    grad_tol: float = 1e-10
    trivial_tol: float = 1e-6
    damping_shrink: float = 0.5
    armijo: float = 1e-4
    starts: tuple[StartStrategy, ...] = field(default_factory=default_starts)
    seed: int = 0
    regularization_tau: float = 1e-8
    thresholds: VerifyThresholds = field(default_factory=VerifyThresholds)

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")
        for name in ("grad_tol", "trivial_tol", "damping_shrink", "armijo"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")


@dataclass(eq=False)
class SolveResult:
    """A candidate orbit with its convergence and verification record."""

    orbit: BlockVector
    phi_value: float
    grad_inf_norm: float
    iterations: int
    start_used: str
    status: str  # 'verified' | 'converged' | 'trivial' | 'unverified' | 'no_convergence'
    verification: Optional[VerificationReport] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status == "verified"

    def to_dict(self) -> dict:
        return {
            "phi": self.phi_value,
            "grad_inf_norm": self.grad_inf_norm,
            "iterations": self.iterations,
            "start_used": self.start_used,
            "status": self.status,
            "verification": self.verification.to_dict() if self.verification else None,
            "diagnostics": {
                k: v for k, v in self.diagnostics.items() if k != "residual_history"
            },
            "residual_history": [float(v) for v in self.diagnostics.get("residual_history", [])],
        }


def initial_guess(
    strategy,
    ctx: FunctionalContext,
    amplitude: float,
    *,
    width: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> BlockVector:
    """Build a starting vector; ``strategy`` is a StartStrategy or its kind string."""
    if isinstance(strategy, StartStrategy):
        width = strategy.width if width is None else width
        strategy = strategy.kind
    if amplitude < 0:
        raise ConfigurationError("amplitude must be nonnegative")
    window = ctx.window
    n2 = 2 * ctx.op.block_dim
    if strategy == "linking":
        dec = ctx.dec or eigendecompose(ctx.op)
        positive = dec.eigenvalues > 0
        if not positive.any():
            raise NumericalError("operator has no positive eigenvalues")
        idx = int(np.argmax(positive))  # smallest positive eigenvalue
        flat = dec.eigenvectors[:, idx]
        flat = amplitude * flat / np.linalg.norm(flat)
        return BlockVector.from_flat(window, ctx.op.block_dim, flat)
    if strategy == "gaussian":
        w = width if width is not None else max(window.half_width, 1) / 8.0
        direction = np.ones(n2) / np.sqrt(n2)
        profile = amplitude * np.exp(-((window.nodes / w) ** 2))
        return BlockVector(window, ctx.op.block_dim, np.outer(profile, direction))
    if strategy == "random":
        rng = rng or np.random.default_rng(0)
        entries = rng.standard_normal((window.num_nodes, n2))
        norm = np.linalg.norm(entries)
        if norm > 0 and amplitude > 0:
            entries *= amplitude / norm
        else:
            entries *= 0.0
        return BlockVector(window, ctx.op.block_dim, entries)
    raise ConfigurationError(f"unknown start strategy {strategy!r}")


def _node_hessians(ctx: FunctionalContext, x: BlockVector) -> list[np.ndarray]:
    nl = ctx.nl
    n2 = 2 * x.block_dim
    blocks = []
    for i, n in enumerate(ctx.window.nodes):
        n = int(n)
        z = x.entries[i]
        if nl.hessian is not None:
            blocks.append(np.asarray(nl.hessian(n, z), dtype=float))
            continue
        h = 1e-6 * (1.0 + float(np.linalg.norm(z)))
        cols = np.empty((n2, n2))
        for j in range(n2):
            zp = z.copy()
            zm = z.copy()
            zp[j] += h
            zm[j] -= h
            cols[:, j] = (
                np.asarray(nl.gradient(n, zp), float) - np.asarray(nl.gradient(n, zm), float)
            ) / (2.0 * h)
        blocks.append(0.5 * (cols + cols.T))
    return blocks


def _jacobian(op: TruncatedOperator, hess_blocks: list[np.ndarray]):
    n2 = 2 * op.block_dim
    if op.storage == "dense":
        jac = op.matrix.copy()
        for i, blk in enumerate(hess_blocks):
            base = i * n2
            jac[base : base + n2, base : base + n2] -= blk
        return jac
    bands = op.bands.copy()
    for i, blk in enumerate(hess_blocks):
        base = i * n2
        for a in range(n2):
            for b in range(a, n2):
                bands[b - a, base + a] -= blk[b, a]
    return bands


def _solve_linear(op_storage: str, jac, rhs: np.ndarray, tau: float) -> np.ndarray:
    with warnings.catch_warnings():
        # an ill-conditioned solve is a retry signal for the caller
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        if op_storage == "dense":
            mat = jac if tau == 0.0 else jac + tau * np.eye(jac.shape[0])
            return scipy.linalg.solve(mat, rhs, assume_a="sym")
        bands = jac if tau == 0.0 else jac.copy()
        if tau != 0.0:
            bands[0] += tau
        bw = bands.shape[0] - 1
        return scipy.linalg.solve_banded((bw, bw), lower_band_to_full(bands), rhs)


def _jacobian_matvec(op_storage: str, jac, vec: np.ndarray) -> np.ndarray:
    if op_storage == "dense":
        return jac @ vec
    from .operators import banded_matvec

    return banded_matvec(jac, vec)


def newton_solve(
    ctx: FunctionalContext,
    x0: BlockVector,
    opts: Optional[SolveOptions] = None,
    *,
    start_tag: str = "given",
    run_verification: bool = True,
) -> SolveResult:
    """Damped Newton iteration on the gradient from a single starting vector.

    Convergence requires the max block norm of the gradient to fall below
    ``grad_tol``; once there the iteration keeps polishing while each step
    still halves the residual, down to the floating-point floor, so tail
    entries of the orbit stay meaningful well below the tolerance.
    """
    opts = opts or SolveOptions()
    ctx._check(x0)
    window = ctx.window

    def grad(entries: np.ndarray) -> np.ndarray:
        return ctx.gradient_entries(BlockVector(window, ctx.op.block_dim, entries))

    def inf_norm(rows: np.ndarray) -> float:
        return float(np.linalg.norm(rows, axis=1).max(initial=0.0))

    x = np.array(x0.entries)
    g = grad(x)
    g_inf = inf_norm(g)
    history = [g_inf]
    regularizations = 0
    fallback_steps = 0
    polish = 0
    converged = g_inf <= opts.grad_tol
    iterations = 0

    for iterations in range(1, opts.max_iter + 1):
        if converged and (g_inf <= POLISH_FLOOR or polish >= 6):
            iterations -= 1
            break
        bv = BlockVector(window, ctx.op.block_dim, x)
        jac = _jacobian(ctx.op, _node_hessians(ctx, bv))
        rhs = -g.reshape(-1)
        tau = 0.0
        delta = None
        for _ in range(9):
            try:
                cand = _solve_linear(ctx.op.storage, jac, rhs, tau)
            except (
                scipy.linalg.LinAlgError,
                scipy.linalg.LinAlgWarning,
                np.linalg.LinAlgError,
                ValueError,
            ):
                cand = None
            if cand is not None and np.all(np.isfinite(cand)):
                delta = cand
                break
            regularizations += 1
            tau = opts.regularization_tau if tau == 0.0 else 2.0 * tau
        if delta is None:
            break
        delta_rows = delta.reshape(x.shape)
        g_sq = float(np.vdot(g, g))
        t = 1.0
        accepted = False
        while t >= BACKTRACK_MIN:
            x_trial = x + t * delta_rows
            g_trial = grad(x_trial)
            if float(np.vdot(g_trial, g_trial)) <= (1.0 - 2.0 * opts.armijo * t) * g_sq:
                accepted = True
                break
            t *= opts.damping_shrink
        if not accepted:
            # rescue path: steepest descent on (1/2)||F||^2, gradient J^T F
            d = _jacobian_matvec(ctx.op.storage, jac, g.reshape(-1))
            jd = _jacobian_matvec(ctx.op.storage, jac, d)
            jd_sq = float(np.vdot(jd, jd))
            if jd_sq == 0.0:
                break
            t = float(np.vdot(d, d)) / jd_sq  # Cauchy step for the quadratic model
            for _ in range(60):
                x_trial = x - t * d.reshape(x.shape)
                g_trial = grad(x_trial)
                if float(np.vdot(g_trial, g_trial)) < g_sq:
                    accepted = True
                    fallback_steps += 1
                    break
                t *= opts.damping_shrink
            if not accepted:
                break
        new_inf = inf_norm(g_trial)
        if converged:
            if new_inf >= 0.5 * g_inf:
                break
            polish += 1
        x, g, g_inf = x_trial, g_trial, new_inf
        history.append(g_inf)
        if g_inf <= opts.grad_tol:
            converged = True

    orbit = BlockVector(window, ctx.op.block_dim, x)
    diagnostics = {
        "residual_history": history,
        "regularizations": regularizations,
        "fallback_steps": fallback_steps,
        "polish_iterations": polish,
    }
    phi_value = Phi(ctx, orbit)

    if not converged:
        return SolveResult(
            orbit, phi_value, g_inf, iterations, start_tag, "no_convergence", None, diagnostics
        )
    if lp_norm(orbit, np.inf) <= opts.trivial_tol:
        return SolveResult(
            orbit, phi_value, g_inf, iterations, start_tag, "trivial", None, diagnostics
        )
    if not run_verification:
        return SolveResult(
            orbit, phi_value, g_inf, iterations, start_tag, "converged", None, diagnostics
        )

    coeffs = ctx.op.coeffs
    nl = ctx.nl

    def ctx_builder(w: Window) -> FunctionalContext:
        return FunctionalContext(assemble(w, coeffs), nl)

    inner_opts = replace(opts, starts=())
    report = verify_orbit(
        ctx,
        orbit,
        replace(opts.thresholds, trivial_tol=opts.trivial_tol),
        ctx_builder=ctx_builder,
        solve_opts=inner_opts,
        window_check=window.boundary is Boundary.ZERO_PAD,
    )
    status = "verified" if report.passed else "unverified"
    return SolveResult(
        orbit, phi_value, g_inf, iterations, start_tag, status, report, diagnostics
    )


def _aligned_distance(a: BlockVector, b: BlockVector, period: int) -> float:
    """Min over integer multiples of the period of the shifted l-inf distance."""
    count = a.window.num_nodes
    best = np.inf
    for k in range(-(count // period), count // period + 1):
        shifted = shift(b, k * period)
        diff = float(np.linalg.norm(a.entries - shifted.entries, axis=1).max(initial=0.0))
        best = min(best, diff)
    return best


def deduplicate_results(
    results: Sequence[SolveResult], period: int, tol: float = 1e-6
) -> list[SolveResult]:
    """Collapse orbits equal up to a period shift, keeping the cleanest copy."""
    ordered = sorted(results, key=lambda r: (r.phi_value, r.grad_inf_norm, r.start_used))
    kept: list[SolveResult] = []
    for res in ordered:
        dup_at = None
        for i, existing in enumerate(kept):
            if _aligned_distance(existing.orbit, res.orbit, period) < tol:
                dup_at = i
                break
        if dup_at is None:
            kept.append(res)
        elif res.grad_inf_norm < kept[dup_at].grad_inf_norm:
            kept[dup_at] = res
    kept.sort(key=lambda r: (r.phi_value, r.grad_inf_norm, r.start_used))
    return kept


def multi_start(ctx: FunctionalContext, opts: Optional[SolveOptions] = None) -> list[SolveResult]:
    """Run one Newton solve per start, keep verified orbits, deduplicate, sort by action."""
    opts = opts or SolveOptions()
    if not opts.starts:
        raise ConfigurationError("opts.starts must not be empty")
    if any(s.kind == "linking" for s in opts.starts):
        ctx = ctx.with_decomposition()
    rng = np.random.default_rng(opts.seed)
    successes: list[SolveResult] = []
    for strategy in opts.starts:
        x0 = initial_guess(strategy, ctx, strategy.amplitude, rng=rng)
        result = newton_solve(ctx, x0, opts, start_tag=strategy.tag)
        if result.success:
            successes.append(result)
    return deduplicate_results(successes, ctx.op.coeffs.period)


def continuation(
    ctx_family: Callable[[float], FunctionalContext],
    nu_from: float,
    nu_to: float,
    steps: int,
    opts: Optional[SolveOptions] = None,
) -> list[tuple[float, SolveResult]]:
    """Walk a parameter geometrically, reseeding each solve with the last orbit.

    The first parameter value is solved from the configured starts and must
    succeed; later steps are seeded with the previous orbit and the walk stops
    at the first non-success, so the last entry records the last good value.
    """
    opts = opts or SolveOptions()
    if steps < 1:
        raise ConfigurationError("steps must be at least 1")
    if nu_from <= 0 or nu_to <= 0:
        raise ConfigurationError("geometric continuation needs positive parameter values")
    nus = np.geomspace(nu_from, nu_to, steps)
    first = multi_start(ctx_family(float(nus[0])), opts)
    if not first:
        raise NumericalError(f"no verified orbit found at the starting value {nu_from:g}")
    entries: list[tuple[float, SolveResult]] = [(float(nus[0]), first[0])]
    for nu in nus[1:]:
        ctx = ctx_family(float(nu))
        result = newton_solve(ctx, entries[-1][1].orbit, opts, start_tag=f"continuation(nu={nu:g})")
        if not result.success:
            break
        entries.append((float(nu), result))
    return entries
