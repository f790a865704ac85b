"""Nonlinear interaction terms and the structured sampling checker for the
standing hypotheses (R0)-(R4).

A nonlinearity bundles the node-wise energy density R(n, z), its gradient,
an optional Hessian, and the asymptotic matrices S_inf(n) that describe the
linear behavior of the gradient at large amplitude.  The built-in families are
radial (functions of r = |z|^2 only):

* radial_rational:  R = (nu/2) r^2 / (1 + r),     grad = nu (r^2 + 2r)/(1+r)^2 z
* log_saturating:   R = (nu/2) (r - log(1 + r)),  grad = nu r/(1+r) z
* quadratic:        R = (c/2) r,                  grad = c z

The first two satisfy all of (R1)-(R4) with S_inf = nu I whenever the gap
condition nu > 2 + Lambda0 holds; the quadratic family deliberately breaks the
small-amplitude condition (R2) and is used as a negative control.

The hypotheses quantify over all of R^{2N}, so the checker is a sampling-based
falsifier, not a proof: a "pass" only means no violation was found under the
given sampling plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import PeriodicCoefficients, SYMMETRY_TOL
from .operators import coercivity_bounds

ORIGIN_TOL = 1e-12
NONNEGATIVITY_TOL = 1e-12
VANISHING_RATIO_TOL = 1e-6
VANISHING_SLOPE_MIN = 0.1

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Node-wise interaction term R(n, z) with gradient and asymptotic data.

    ``value`` and ``gradient`` take the node label n and a 2N-vector z; they
    must be T-periodic in n, vanish at z = 0, and be pure reentrant functions.
    ``hessian`` is optional; solvers fall back to finite differences.
    """

    block_dim: int
    period: int
    value: Callable[[int, np.ndarray], float]
    gradient: Callable[[int, np.ndarray], np.ndarray]
    s_infinity: np.ndarray
    hessian: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    label: str = "custom"
    lambda_infinity: float = field(init=False)

    def __post_init__(self) -> None:
        s_inf = np.array(self.s_infinity, dtype=float)
        expected = (self.period, 2 * self.block_dim, 2 * self.block_dim)
        if s_inf.shape != expected:
            raise ValueError(f"s_infinity must have shape {expected}, got {s_inf.shape}")
        for n, s in enumerate(s_inf):
            if np.abs(s - s.T).max() > SYMMETRY_TOL:
                raise ValueError(f"s_infinity[{n}] is not symmetric")
        s_inf.flags.writeable = False
        object.__setattr__(self, "s_infinity", s_inf)
        object.__setattr__(
            self,
            "lambda_infinity",
            float(min(np.linalg.eigvalsh(s)[0] for s in s_inf)),
        )
        origin = np.zeros(2 * self.block_dim)
        for n in range(self.period):
            if abs(self.value(n, origin)) > ORIGIN_TOL:
                raise ValueError(f"value({n}, 0) = {self.value(n, origin)!r}, expected 0")
            g0 = np.asarray(self.gradient(n, origin), dtype=float)
            if np.abs(g0).max() > ORIGIN_TOL:
                raise ValueError(f"gradient({n}, 0) is nonzero")


def eval_tildeR(nl: Nonlinearity, n: int, z: np.ndarray) -> float:
    """The density (1/2) grad R(n,z) . z - R(n,z); vanishes for quadratic R."""
    z = np.asarray(z, dtype=float)
    return 0.5 * float(np.dot(nl.gradient(n, z), z)) - nl.value(n, z)


def _radial_family(
    nu: float,
    block_dim: int,
    label: str,
    f: Callable[[float], float],
    fp: Callable[[float], float],
    fpp: Callable[[float], float],
) -> Nonlinearity:
    """Build a radial nonlinearity R(z) = f(|z|^2) from scalar profiles."""

    def value(n: int, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return f(float(np.dot(z, z)))

    def gradient(n: int, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return 2.0 * fp(float(np.dot(z, z))) * z

    def hessian(n: int, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = float(np.dot(z, z))
        return 2.0 * fp(r) * np.eye(z.size) + 4.0 * fpp(r) * np.outer(z, z)

    s_inf = np.tile(nu * np.eye(2 * block_dim), (1, 1, 1))
    return Nonlinearity(
        block_dim=block_dim,
        period=1,
        value=value,
        gradient=gradient,
        hessian=hessian,
        s_infinity=s_inf,
        label=label,
    )


def family_radial_rational(nu: float, block_dim: int = 1) -> Nonlinearity:
    """R = (nu/2) |z|^4 / (1 + |z|^2); asymptotically nu I with remainder nu/(1+r)^2."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return _radial_family(
        nu,
        block_dim,
        f"radial_rational(nu={nu:g})",
        f=lambda r: 0.5 * nu * r * r / (1.0 + r),
        fp=lambda r: 0.5 * nu * (r * r + 2.0 * r) / (1.0 + r) ** 2,
        fpp=lambda r: nu / (1.0 + r) ** 3,
    )


def family_log_saturating(nu: float, block_dim: int = 1) -> Nonlinearity:
    """R = (nu/2) (|z|^2 - log(1 + |z|^2)); asymptotically nu I with remainder nu/(1+r)."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return _radial_family(
        nu,
        block_dim,
        f"log_saturating(nu={nu:g})",
        f=lambda r: 0.5 * nu * (r - math.log1p(r)),
        fp=lambda r: 0.5 * nu * r / (1.0 + r),
        fpp=lambda r: 0.5 * nu / (1.0 + r) ** 2,
    )


def family_quadratic(strength: float, block_dim: int = 1) -> Nonlinearity:
    """Pure quadratic R = (c/2)|z|^2; breaks (R2) because |grad R|/|z| = c at 0."""
    if strength < 0:
        raise ValueError(f"strength must be nonnegative, got {strength}")
    c = float(strength)
    return _radial_family(
        c,
        block_dim,
        f"quadratic(strength={c:g})",
        f=lambda r: 0.5 * c * r,
        fp=lambda r: 0.5 * c,
        fpp=lambda r: 0.0,
    )


FAMILIES = {
    "radial_rational": family_radial_rational,
    "log_saturating": family_log_saturating,
    "quadratic": family_quadratic,
}


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """Radial/directional grid over which the hypotheses are falsified."""

    radii: np.ndarray
    directions_per_radius: int = 32
    seed: int = 0
    delta_grid_size: int = 50
    periodicity_tol: float = 1e-12

    @classmethod
    def default(cls, seed: int = 0) -> "SamplingPlan":
        return cls(radii=np.geomspace(1e-8, 1e8, 64), seed=seed)


@dataclass
class HypothesisCheck:
    status: str
    detail: str
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {"status": self.status, "detail": self.detail}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass(eq=False)
class HypothesisReport:
    """Sampling-based falsification outcome for (R0)-(R4).

    A "pass" records that no violation was found under the sampling plan; it
    is not a proof.  Every "fail" carries a concrete witness sample.
    """

    checks: dict[str, HypothesisCheck]
    delta0_estimate: Optional[float]
    growth_envelope: dict
    note: str = (
        "statuses are sampling-based: pass means no violation found on the plan"
    )

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if v.status == FAIL]

    @property
    def all_pass(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "delta0_estimate": self.delta0_estimate,
            "growth_envelope": self.growth_envelope,
            "all_pass": self.all_pass,
            "failed": self.failed,
            "note": self.note,
        }


def _loglog_slope(radii: np.ndarray, values: np.ndarray) -> float:
    safe = np.clip(values, 1e-280, None)
    return float(np.polyfit(np.log(radii), np.log(safe), 1)[0])


def _vanishing_status(
    ratios_by_radius: np.ndarray, radii: np.ndarray, at_small: bool
) -> tuple[str, str]:
    """Decide whether max-over-direction gradient ratios vanish in the sampled limit.

    ``at_small`` tests the |z| -> 0 end, otherwise |z| -> infinity; the slope of
    the log-log trend over the outer quarter of radii guards against slowly
    varying ratios being mistaken for convergent ones.
    """
    quarter = max(4, len(radii) // 4)
    if at_small:
        sel = slice(0, quarter)
        limit_value = float(ratios_by_radius[0])
        want_slope_sign = 1.0
    else:
        sel = slice(len(radii) - quarter, len(radii))
        limit_value = float(ratios_by_radius[-1])
        want_slope_sign = -1.0
    slope = _loglog_slope(radii[sel], ratios_by_radius[sel]) * want_slope_sign
    if limit_value <= VANISHING_RATIO_TOL:
        return PASS, f"limit ratio {limit_value:.3e} below {VANISHING_RATIO_TOL:.0e}"
    if slope < VANISHING_SLOPE_MIN and limit_value > 1e-3:
        return (
            FAIL,
            f"ratio {limit_value:.3e} at the sampled limit with log-log slope "
            f"{want_slope_sign * slope:.3f} shows no decay",
        )
    return (
        INCONCLUSIVE,
        f"ratio {limit_value:.3e} still decaying (slope {want_slope_sign * slope:.3f}); "
        "extend the radial grid to decide",
    )


def growth_envelope_constant(
    nl: Nonlinearity,
    plan: SamplingPlan,
    p: float = 4.0,
    eps: float = 0.1,
) -> dict:
    """Fit the smallest C with |grad R(n,z)| <= eps |z| + C |z|^(p-1) on the plan grid."""
    rng = np.random.default_rng(plan.seed + 1)
    worst = 0.0
    for n in range(nl.period):
        for radius in plan.radii:
            dirs = rng.standard_normal((plan.directions_per_radius, 2 * nl.block_dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            for u in dirs:
                z = radius * u
                excess = float(np.linalg.norm(nl.gradient(n, z))) - eps * radius
                if excess > 0.0:
                    worst = max(worst, excess / radius ** (p - 1.0))
    return {"p": p, "eps": eps, "constant": worst}


def _sample_grid(nl: Nonlinearity, plan: SamplingPlan):
    """Evaluate R, |grad R|/|z|, tilde R, and the S_inf remainder on the plan.

    tilde R is the difference of two terms that both grow like |z|^2, so its
    floating-point value carries a cancellation error proportional to their
    size; ``tilde_floor`` records that per-sample noise level so sign and
    threshold tests do not misread roundoff as a violation.
    """
    rng = np.random.default_rng(plan.seed)
    radii = np.asarray(plan.radii, dtype=float)
    n_dirs = plan.directions_per_radius
    shape = (nl.period, len(radii), n_dirs)
    r_vals = np.empty(shape)
    tilde_vals = np.empty(shape)
    tilde_floor = np.empty(shape)
    grad_ratio = np.empty(shape)
    asym_ratio = np.empty(shape)
    dirs_all = rng.standard_normal((len(radii), n_dirs, 2 * nl.block_dim))
    dirs_all /= np.linalg.norm(dirs_all, axis=2, keepdims=True)
    eps_guard = 64.0 * np.finfo(float).eps
    for n in range(nl.period):
        s_inf = nl.s_infinity[n % nl.period]
        for i, radius in enumerate(radii):
            for j in range(n_dirs):
                z = radius * dirs_all[i, j]
                g = np.asarray(nl.gradient(n, z), dtype=float)
                half_gz = 0.5 * float(np.dot(g, z))
                r_vals[n, i, j] = nl.value(n, z)
                tilde_vals[n, i, j] = half_gz - r_vals[n, i, j]
                tilde_floor[n, i, j] = eps_guard * (
                    1.0 + abs(half_gz) + abs(r_vals[n, i, j])
                )
                grad_ratio[n, i, j] = np.linalg.norm(g) / radius
                asym_ratio[n, i, j] = np.linalg.norm(g - s_inf @ z) / radius
    return radii, dirs_all, r_vals, tilde_vals, tilde_floor, grad_ratio, asym_ratio


def _worst_witness(
    values: np.ndarray, radii: np.ndarray, dirs: np.ndarray, pick_min: bool
) -> dict:
    flat = int(values.argmin() if pick_min else values.argmax())
    n, i, j = np.unravel_index(flat, values.shape)
    return {
        "n": int(n),
        "radius": float(radii[i]),
        "direction": [float(v) for v in dirs[i, j]],
        "value": float(values[n, i, j]),
    }


def check_hypotheses(
    nl: Nonlinearity,
    coeffs: PeriodicCoefficients,
    plan: Optional[SamplingPlan] = None,
) -> HypothesisReport:
    """Falsify the hypotheses (R0)-(R4) on a structured sample grid.

    Failures are report entries carrying witnesses, never exceptions.  The
    (R4) scan looks for a single delta that works uniformly over all sampled
    nodes and amplitudes (the strong reading); the estimate is the largest
    grid value for which every sample with |grad R| >= (lambda0 - delta)|z|
    also has tilde R >= delta.
    """
    plan = plan or SamplingPlan.default()
    checks: dict[str, HypothesisCheck] = {}

    # (R0): exact check on the coefficients.
    lam0, lam1 = coercivity_bounds(coeffs)
    checks["R0"] = HypothesisCheck(
        PASS,
        f"J0*S(n) symmetric positive definite for all n; "
        f"lambda0 = {lam0:.6g}, Lambda0 = {lam1:.6g}",
    )

    radii, dirs_all, r_vals, tilde_vals, tilde_floor, grad_ratio, asym_ratio = _sample_grid(
        nl, plan
    )

    # (R1): periodicity in n on a thinned subsample.
    worst_period = 0.0
    origin_shift = nl.period
    for n in range(nl.period):
        for i in range(0, len(radii), 4):
            for j in range(0, plan.directions_per_radius, 8):
                z = radii[i] * dirs_all[i, j]
                scale = max(1.0, abs(nl.value(n, z)))
                dv = abs(nl.value(n + origin_shift, z) - nl.value(n, z)) / scale
                gn = np.asarray(nl.gradient(n, z), dtype=float)
                gshift = np.asarray(nl.gradient(n + origin_shift, z), dtype=float)
                dg = float(np.abs(gshift - gn).max()) / max(1.0, float(np.abs(gn).max()))
                worst_period = max(worst_period, dv, dg)
    if worst_period <= plan.periodicity_tol:
        checks["R1"] = HypothesisCheck(
            PASS, f"periodicity residual {worst_period:.3e} within {plan.periodicity_tol:.0e}"
        )
    else:
        checks["R1"] = HypothesisCheck(
            FAIL,
            f"periodicity residual {worst_period:.3e} exceeds {plan.periodicity_tol:.0e}",
            witness={"residual": worst_period},
        )

    # (R2): nonnegativity of R plus vanishing gradient ratio at the origin.
    min_r = float(r_vals.min())
    if min_r < -NONNEGATIVITY_TOL:
        checks["R2"] = HypothesisCheck(
            FAIL,
            f"R takes the negative value {min_r:.3e}",
            witness=_worst_witness(r_vals, radii, dirs_all, pick_min=True),
        )
    else:
        ratio_by_radius = grad_ratio.max(axis=(0, 2))
        status, detail = _vanishing_status(ratio_by_radius, radii, at_small=True)
        witness = None
        if status == FAIL:
            witness = _worst_witness(
                grad_ratio[:, :1, :], radii[:1], dirs_all[:1], pick_min=False
            )
        checks["R2"] = HypothesisCheck(status, "|grad R|/|z| near 0: " + detail, witness)

    # (R3): asymptotic linearity plus the spectral gap condition.
    gap_bound = 2.0 + lam1
    if nl.lambda_infinity <= gap_bound:
        checks["R3"] = HypothesisCheck(
            FAIL,
            f"gap test failed: lambda_infinity = {nl.lambda_infinity:.6g} must exceed "
            f"2 + Lambda0 = {gap_bound:.6g}",
            witness={"lambda_infinity": nl.lambda_infinity, "required_bound": gap_bound},
        )
    else:
        asym_by_radius = asym_ratio.max(axis=(0, 2))
        status, detail = _vanishing_status(asym_by_radius, radii, at_small=False)
        witness = None
        if status == FAIL:
            witness = _worst_witness(
                asym_ratio[:, -1:, :], radii[-1:], dirs_all[-1:], pick_min=False
            )
        checks["R3"] = HypothesisCheck(
            status,
            f"gap test passed ({nl.lambda_infinity:.6g} > {gap_bound:.6g}); "
            "|grad R - S_inf z|/|z| at infinity: " + detail,
            witness,
        )

    # (R4): tilde R >= 0 plus the uniform delta scan.  Both comparisons allow
    # the per-sample cancellation floor, since tilde R is computed as a
    # difference of terms that can dwarf it at large amplitude.
    delta0 = None
    slack = tilde_vals + np.maximum(tilde_floor, NONNEGATIVITY_TOL)
    if float(slack.min()) < 0.0:
        checks["R4"] = HypothesisCheck(
            FAIL,
            f"tilde R takes the negative value {float(tilde_vals.min()):.3e} "
            "(beyond the cancellation noise floor)",
            witness=_worst_witness(tilde_vals, radii, dirs_all, pick_min=True),
        )
    else:
        lam0_coeff = coeffs.lambda0
        ratios = grad_ratio.ravel()
        tildes_slack = (tilde_vals + tilde_floor).ravel()
        deltas = np.geomspace(1e-4 * lam0_coeff, 0.999 * lam0_coeff, plan.delta_grid_size)
        for delta in deltas[::-1]:
            mask = ratios >= lam0_coeff - delta
            if not mask.any() or tildes_slack[mask].min() >= delta:
                delta0 = float(delta)
                break
        if delta0 is None:
            checks["R4"] = HypothesisCheck(
                INCONCLUSIVE,
                "tilde R >= 0 on all samples, but no uniform delta on the scan grid "
                "satisfies the implication |grad R| >= (lambda0-delta)|z| "
                "=> tilde R >= delta",
            )
        else:
            checks["R4"] = HypothesisCheck(
                PASS,
                f"tilde R >= 0 on all samples; uniform delta0 estimate {delta0:.6g} "
                f"(scan over (0, lambda0) with lambda0 = {lam0_coeff:.6g})",
            )

    envelope = growth_envelope_constant(nl, plan)
    return HypothesisReport(checks=checks, delta0_estimate=delta0, growth_envelope=envelope)
