"""Quadratic losses for real phase retrieval, bare and activation-weighted.

With s_k = a_k^T z, b_k = a_k^T x and y_k = b_k^2, the bare loss is

    F(z) = (1/2m) sum_k (s_k^2 - y_k)^2

and the activated loss multiplies each term by two data-driven weights

    f(z) = (1/2m) sum_k (s_k^2 - y_k)^2 h(s_k^2 / ||z||^2) h(m y_k / ||y||_1),

which suppress exactly the terms whose fourth-power Gaussian factors are
heavy-tailed.  This module evaluates f, its gradient and its dense
Hessian in closed form (the Hessian is a sum of three per-term Jacobians
with twelve displayed terms overall), the radial slope z^T grad f, and
central-difference validators for both derivative orders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activation import ActivationProfile, evaluate
from .ensemble import MeasurementEnsemble, RngSpec

__all__ = [
    "LossEval",
    "PerTermSample",
    "SingularityError",
    "fd_check",
    "gradient",
    "hessian",
    "per_term_samples",
    "radial_derivative",
    "value",
    "vanilla_value_grad",
]

# f is singular at z = 0 (the z-side activation argument divides by
# ||z||^2); points this close to the origin are rejected outright.
SINGULARITY_GUARD = 1e-12

DEFAULT_HESSIAN_CAP = 1024


class SingularityError(ValueError):
    """Raised when z is too close to the origin for the activated loss."""


@dataclass
class LossEval:
    """Loss value with derivatives at a point z.

    ``hess`` is only populated by :func:`hessian` and is always returned
    exactly symmetric; ``hess_asymmetry`` records the relative max-norm
    asymmetry of the raw twelve-term sum before symmetrization (a
    diagnostic, analytically zero).
    """

    value: float
    grad: np.ndarray
    z: np.ndarray
    hess: np.ndarray | None = None
    hess_asymmetry: float | None = None


@dataclass
class PerTermSample:
    """Scalar-case per-term derivatives of both losses (one sensing draw)."""

    k: int
    d1_vanilla: float
    d1_activated: float
    d2_vanilla: float
    d2_activated: float


def _check_point(ensemble: MeasurementEnsemble, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (ensemble.n,):
        raise ValueError(f"z must have length {ensemble.n}, got shape {z.shape}")
    return z


def _guarded_norm_sq(ensemble: MeasurementEnsemble, z: np.ndarray) -> float:
    nz2 = float(z @ z)
    if not np.isfinite(nz2) or nz2 < (SINGULARITY_GUARD * ensemble.x_norm) ** 2:
        raise SingularityError(
            "activated loss is undefined this close to the origin: "
            f"||z|| = {np.sqrt(max(nz2, 0.0)):.3e} vs guard "
            f"{SINGULARITY_GUARD:g} * ||x||"
        )
    return nz2


def activation_weights_x(ensemble: MeasurementEnsemble, profile: ActivationProfile) -> np.ndarray:
    """Measurement-side weights h(m y_k / ||y||_1); fixed per instance."""
    return evaluate(profile, ensemble.y / ensemble.y1_over_m)[0]


# ---------------------------------------------------------------------------
# Bare quadratic loss
# ---------------------------------------------------------------------------


def vanilla_value_grad(ensemble: MeasurementEnsemble, z) -> LossEval:
    """Value and gradient of the bare loss F(z) = (1/2m) sum (s^2 - y)^2."""
    z = _check_point(ensemble, z)
    s = ensemble.A @ z
    resid = s * s - ensemble.y
    val = 0.5 * float(np.mean(resid * resid))
    grad = (ensemble.A.T @ (2.0 * resid * s)) / ensemble.m
    return LossEval(value=val, grad=grad, z=z)


def _vanilla_grad(A: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    s = A @ z
    return (A.T @ (2.0 * (s * s - y) * s)) / y.shape[0]


# ---------------------------------------------------------------------------
# Activated loss
# ---------------------------------------------------------------------------


def value(ensemble: MeasurementEnsemble, profile: ActivationProfile, z) -> float:
    """Activated loss value; equals the bare loss whenever both activation
    arguments stay on the plateau (all below beta)."""
    z = _check_point(ensemble, z)
    nz2 = _guarded_norm_sq(ensemble, z)
    s = ensemble.A @ z
    r = s * s - ensemble.y
    hz = evaluate(profile, (s * s) / nz2)[0]
    hx = activation_weights_x(ensemble, profile)
    return 0.5 * float(np.mean(r * r * hz * hx))


def _activated_grad(
    A: np.ndarray,
    y: np.ndarray,
    hx: np.ndarray,
    profile: ActivationProfile,
    z: np.ndarray,
    nz2: float,
) -> np.ndarray:
    """Gradient of f via the three chain-rule terms.

    Term 1 differentiates the residual, terms 2 and 3 differentiate the
    z-side activation argument s^2/||z||^2 through its numerator and
    denominator; the h' terms cancel exactly along z itself.
    """
    m = y.shape[0]
    s = A @ z
    r = s * s - y
    u = (s * s) / nz2
    hz, dhz, _ = evaluate(profile, u)
    c1 = 2.0 * r * hz * hx * s
    c2 = r * r * dhz * hx * s
    return (A.T @ (c1 + c2 / nz2) - (float(np.sum(c2 * s)) / nz2**2) * z) / m


def gradient(ensemble: MeasurementEnsemble, profile: ActivationProfile, z) -> LossEval:
    """Activated loss value and gradient."""
    z = _check_point(ensemble, z)
    nz2 = _guarded_norm_sq(ensemble, z)
    hx = activation_weights_x(ensemble, profile)
    grad = _activated_grad(ensemble.A, ensemble.y, hx, profile, z, nz2)
    s = ensemble.A @ z
    r = s * s - ensemble.y
    hz = evaluate(profile, (s * s) / nz2)[0]
    val = 0.5 * float(np.mean(r * r * hz * hx))
    return LossEval(value=val, grad=grad, z=z)


def radial_derivative(ensemble: MeasurementEnsemble, profile: ActivationProfile, z) -> float:
    """The radial slope z^T grad f(z) evaluated directly.

    Because the z-side activation argument is scale invariant, the h'
    contributions vanish along z and the slope collapses to
    (1/m) sum 2 (s^2 - y) s^2 h(s^2/||z||^2) h(m y/||y||_1).  Agreement
    with z . gradient(...) certifies that cancellation numerically.
    """
    z = _check_point(ensemble, z)
    nz2 = _guarded_norm_sq(ensemble, z)
    s = ensemble.A @ z
    r = s * s - ensemble.y
    hz = evaluate(profile, (s * s) / nz2)[0]
    hx = activation_weights_x(ensemble, profile)
    return float(np.mean(2.0 * r * s * s * hz * hx))


def hessian(
    ensemble: MeasurementEnsemble,
    profile: ActivationProfile,
    z,
    cap: int = DEFAULT_HESSIAN_CAP,
) -> LossEval:
    """Dense Hessian of the activated loss (plus value and gradient).

    Accumulates the twelve closed-form terms grouped by their outer-product
    structure (a a^T, a z^T, z a^T, z z^T and the identity) and returns the
    symmetrized matrix (H + H^T)/2.  The raw sum is symmetric analytically;
    its floating-point asymmetry is reported in ``hess_asymmetry``.
    """
    z = _check_point(ensemble, z)
    if ensemble.n > cap:
        raise ValueError(
            f"dense Hessian capped at n <= {cap}; got n = {ensemble.n} "
            "(raise `cap` explicitly for larger problems)"
        )
    nz2 = _guarded_norm_sq(ensemble, z)
    A, y, m = ensemble.A, ensemble.y, ensemble.m
    s = A @ z
    s2 = s * s
    r = s2 - y
    hz, dhz, d2hz = evaluate(profile, s2 / nz2)
    hx = activation_weights_x(ensemble, profile)
    dw = dhz * hx
    d2w = d2hz * hx
    r2 = r * r
    s3 = s2 * s

    ca = (
        2.0 * (3.0 * s2 - y) * hz * hx
        + (4.0 * r * s2 / nz2) * dw
        + ((5.0 * s2 * s2 - 6.0 * s2 * y + y * y) / nz2) * dw
        + (2.0 * r2 * s2 / nz2**2) * d2w
    )
    caz = (
        -(4.0 * r * s3 / nz2**2) * dw
        - (2.0 * r2 * s3 / nz2**3) * d2w
        - (2.0 * r2 * s / nz2**2) * dw
    )
    cza = (
        -((6.0 * s3 * s2 - 8.0 * s3 * y + 2.0 * s * y * y) / nz2**2) * dw
        - (2.0 * r2 * s3 / nz2**3) * d2w
    )
    czz = (2.0 * r2 * s2 * s2 / nz2**4) * d2w + (4.0 * r2 * s2 / nz2**3) * dw
    c_eye = -(r2 * s2 / nz2**2) * dw

    raw = A.T @ (ca[:, None] * A)
    raw += np.outer(A.T @ caz, z)
    raw += np.outer(z, A.T @ cza)
    raw += float(np.sum(czz)) * np.outer(z, z)
    raw += float(np.sum(c_eye)) * np.eye(ensemble.n)
    raw /= m

    scale = float(np.max(np.abs(raw)))
    asym = float(np.max(np.abs(raw - raw.T))) / scale if scale > 0 else 0.0
    hess = 0.5 * (raw + raw.T)

    grad = _activated_grad(A, y, hx, profile, z, nz2)
    val = 0.5 * float(np.mean(r2 * hz * hx))
    return LossEval(value=val, grad=grad, z=z, hess=hess, hess_asymmetry=asym)


# ---------------------------------------------------------------------------
# Finite-difference validation
# ---------------------------------------------------------------------------


def fd_check(
    ensemble: MeasurementEnsemble,
    profile: ActivationProfile,
    z,
    eps: float = 1e-5,
) -> dict:
    """Central-difference check of the analytic gradient and Hessian.

    The gradient is compared against (f(z+eps e_i) - f(z-eps e_i))/(2 eps)
    per coordinate, the Hessian column-wise against the same scheme applied
    to the analytic gradient.  Errors are relative with denominator
    max(|analytic|, 1) so critical points do not divide by zero.
    """
    z = _check_point(ensemble, z)
    n = ensemble.n
    res = gradient(ensemble, profile, z)
    hess_res = hessian(ensemble, profile, z)

    fd_grad = np.empty(n)
    fd_hess = np.empty((n, n))
    for i in range(n):
        step = np.zeros(n)
        step[i] = eps
        fd_grad[i] = (
            value(ensemble, profile, z + step) - value(ensemble, profile, z - step)
        ) / (2.0 * eps)
        gp = gradient(ensemble, profile, z + step).grad
        gm = gradient(ensemble, profile, z - step).grad
        fd_hess[:, i] = (gp - gm) / (2.0 * eps)

    grad_err = np.abs(fd_grad - res.grad) / np.maximum(np.abs(res.grad), 1.0)
    hess_err = np.abs(fd_hess - hess_res.hess) / np.maximum(np.abs(hess_res.hess), 1.0)
    return {
        "max_rel_grad_err": float(np.max(grad_err)),
        "max_rel_hess_err": float(np.max(hess_err)),
    }


# ---------------------------------------------------------------------------
# Scalar-case per-term derivatives
# ---------------------------------------------------------------------------


def _per_term_arrays(
    x_scalar: float,
    z_scalar: float,
    m: int,
    profile: ActivationProfile,
    seed: int,
    stream_id: int = 0,
):
    """Vectorized backend for :func:`per_term_samples`; returns four arrays.

    In the scalar case the z-side activation argument (a z)^2 / z^2 does
    not depend on z, so the per-term activated derivatives are exactly the
    bare ones times the (constant) weight product.
    """
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if z_scalar == 0.0 or x_scalar == 0.0:
        raise ValueError("x and z must be nonzero scalars")
    a = RngSpec(seed, stream_id).generator().standard_normal(m)
    y = (a * x_scalar) ** 2
    y1m = float(np.mean(y))
    s = a * z_scalar
    r = s * s - y
    d1_v = 2.0 * r * s * a
    d2_v = 2.0 * (3.0 * s * s - y) * a * a
    w = evaluate(profile, (s * s) / (z_scalar * z_scalar))[0] * evaluate(
        profile, y / y1m
    )[0]
    return d1_v, d1_v * w, d2_v, d2_v * w


def per_term_samples(
    x_scalar: float,
    z_scalar: float,
    m: int,
    profile: ActivationProfile,
    seed: int,
) -> list[PerTermSample]:
    """Per-term first and second derivatives of both losses, scalar case.

    Each of the m Gaussian draws contributes one term to each loss; the
    returned samples expose the term derivatives with and without the
    activation weights, the raw material for tail comparisons.
    """
    d1_v, d1_a, d2_v, d2_a = _per_term_arrays(x_scalar, z_scalar, m, profile, seed)
    return [
        PerTermSample(
            k=k,
            d1_vanilla=float(d1_v[k]),
            d1_activated=float(d1_a[k]),
            d2_vanilla=float(d2_v[k]),
            d2_activated=float(d2_a[k]),
        )
        for k in range(m)
    ]
