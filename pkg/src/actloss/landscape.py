"""Region partition of R^n and numerical certificates for the activated loss.

The space is split by the relative energy t = ||z||^2/||x||^2 and the
phase-invariant relative distance d = dist(z, x)/||x|| into five regions:

  R1   d <= 1/5                        (near the truth, up to sign)
  R2a  1/3 - delta < t < 99/100, d > 1/5
  R2b  99/100 <= t <= 101/100,   d > 1/5
  R2c  t > 101/100,              d > 1/5
  R3   0 < t <= 1/3 - delta      (near the origin)

with delta in (0, 1/100].  Inside R2a the thin slab where additionally
|z^T x| < delta ||x||^2 and t stays within delta of 1/3 is labelled
R2aSub; it is the only place saddle points can live.  Each region carries
a quantitative certificate (a curvature or radial-slope bound) that this
module evaluates pointwise and over random samples.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .activation import ActivationProfile
from .descent import dist, worker_count
from .ensemble import MeasurementEnsemble, RngSpec
from .loss import hessian, radial_derivative

__all__ = [
    "BoundCheck",
    "RegionLabel",
    "TheoremReport",
    "classify",
    "min_eigenpair",
    "min_eigenvalue",
    "moment_identity_check",
    "sample_point",
    "sample_region",
    "verify_point",
]

R1 = "R1"
R2A = "R2a"
R2A_SUB = "R2aSub"
R2B = "R2b"
R2C = "R2c"
R3 = "R3"
UNDEFINED = "Undefined"

REGIONS = (R1, R2A, R2A_SUB, R2B, R2C, R3)

_D_R1 = 1.0 / 5.0
_T_LO = 99.0 / 100.0
_T_HI = 101.0 / 100.0
_T_THIRD = 1.0 / 3.0

# Certificate coefficients: R1 lower-bounds the smallest Hessian eigenvalue
# by ||x||^2/25; R2aSub upper-bounds x^T H x by -3||x||^4 and lower-bounds
# z^T H z by ||x||^4; R2b/R2c lower-bound the radial slope by
# (9/1000)||x||^4 and (49/1000)||z||^4; R3 upper-bounds it by
# -5 delta ||z||^2 ||x||^2.
R1_CURVATURE_COEFF = 1.0 / 25.0
R2A_SUB_TRUTH_COEFF = -3.0
R2A_SUB_SELF_COEFF = 1.0
R2B_RADIAL_COEFF = 9.0 / 1000.0
R2C_RADIAL_COEFF = 49.0 / 1000.0
R3_RADIAL_COEFF = -5.0

_MAX_SAMPLER_REJECTIONS = 1_000_000


@dataclass(frozen=True)
class RegionLabel:
    """Classification of a point together with its measured coordinates."""

    label: str
    t: float
    d: float
    c: float

    @property
    def in_r2a(self) -> bool:
        return self.label in (R2A, R2A_SUB)


@dataclass(frozen=True)
class BoundCheck:
    """One inequality: ``computed`` vs ``bound`` with direction ``kind``."""

    name: str
    computed: float
    bound: float
    kind: str  # "lower": computed >= bound; "upper": computed <= bound
    satisfied: bool

    @property
    def margin(self) -> float:
        if self.kind == "lower":
            return self.computed - self.bound
        return self.bound - self.computed


@dataclass
class TheoremReport:
    """All certificate checks at one point.

    ``satisfied`` is the conjunction over checks, or None in plain R2a
    where no pointwise bound applies (only the saddle slab R2aSub carries
    curvature certificates).
    """

    region: str
    checks: list[BoundCheck]
    satisfied: bool | None
    t: float
    d: float
    c: float
    z: np.ndarray


def _check(name, computed, bound, kind) -> BoundCheck:
    ok = computed >= bound if kind == "lower" else computed <= bound
    return BoundCheck(name, float(computed), float(bound), kind, bool(ok))


def _validate_delta(delta: float) -> None:
    if not 0.0 < delta <= 0.01:
        raise ValueError(f"delta must lie in (0, 1/100], got {delta}")


def _label_from_measurements(t: float, d: float, c: float, delta: float) -> str:
    """Pure label decision; boundary ties follow the <=/< conventions of the
    region definitions exactly (R1 wins wherever d <= 1/5)."""
    if t == 0.0:
        return UNDEFINED
    if d <= _D_R1:
        return R1
    if t <= _T_THIRD - delta:
        return R3
    if t < _T_LO:
        if (_T_THIRD - delta < t < _T_THIRD + delta) and c < delta:
            return R2A_SUB
        return R2A
    if t <= _T_HI:
        return R2B
    return R2C


def classify(z, x, delta: float = 0.01) -> RegionLabel:
    """Assign z to its region relative to the ground truth x."""
    _validate_delta(delta)
    z = np.asarray(z, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if z.shape != x.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {x.shape}")
    nx2 = float(x @ x)
    if not nx2 > 0:
        raise ValueError("x must be nonzero")
    t = float(z @ z) / nx2
    if t == 0.0:
        return RegionLabel(UNDEFINED, 0.0, 1.0, 0.0)
    d = dist(z, x) / np.sqrt(nx2)
    c = abs(float(z @ x)) / nx2
    return RegionLabel(_label_from_measurements(t, d, c, delta), t, d, c)


# ---------------------------------------------------------------------------
# Spectral helpers
# ---------------------------------------------------------------------------


def min_eigenpair(H: np.ndarray, asym_tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of a symmetric matrix via full eigendecomposition."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"H must be square, got {H.shape}")
    scale = float(np.max(np.abs(H)))
    if scale > 0 and float(np.max(np.abs(H - H.T))) > asym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (H + H.T))
    return float(w[0]), V[:, 0]


def min_eigenvalue(H: np.ndarray, asym_tol: float = 1e-9) -> float:
    return min_eigenpair(H, asym_tol)[0]


# ---------------------------------------------------------------------------
# Pointwise certificates
# ---------------------------------------------------------------------------


def verify_point(
    ensemble: MeasurementEnsemble,
    profile: ActivationProfile,
    z,
    delta: float = 0.01,
    hessian_cap: int = 1024,
) -> TheoremReport:
    """Evaluate the certificate of z's region at z.

    R1 checks the smallest Hessian eigenvalue, R2aSub the two directional
    curvatures along x and z, and R2b/R2c/R3 the sign-definite radial
    slope.  Points in R2a outside the saddle slab get an empty report
    (satisfied is None): no pointwise bound is claimed there.
    """
    z = np.asarray(z, dtype=np.float64)
    label = classify(z, ensemble.x, delta)
    if label.label == UNDEFINED:
        raise ValueError("certificates are undefined at z = 0")
    nx2 = float(ensemble.x @ ensemble.x)
    nz2 = float(z @ z)
    checks: list[BoundCheck] = []

    if label.label == R1:
        lam = min_eigenvalue(hessian(ensemble, profile, z, cap=hessian_cap).hess)
        checks.append(_check("min_curvature", lam, R1_CURVATURE_COEFF * nx2, "lower"))
    elif label.label == R2A_SUB:
        H = hessian(ensemble, profile, z, cap=hessian_cap).hess
        truth_curv = float(ensemble.x @ (H @ ensemble.x))
        self_curv = float(z @ (H @ z))
        checks.append(
            _check("truth_curvature", truth_curv, R2A_SUB_TRUTH_COEFF * nx2**2, "upper")
        )
        checks.append(
            _check("self_curvature", self_curv, R2A_SUB_SELF_COEFF * nx2**2, "lower")
        )
    elif label.label == R2B:
        rad = radial_derivative(ensemble, profile, z)
        checks.append(_check("radial_slope", rad, R2B_RADIAL_COEFF * nx2**2, "lower"))
    elif label.label == R2C:
        rad = radial_derivative(ensemble, profile, z)
        checks.append(_check("radial_slope", rad, R2C_RADIAL_COEFF * nz2**2, "lower"))
    elif label.label == R3:
        rad = radial_derivative(ensemble, profile, z)
        checks.append(
            _check("radial_slope", rad, R3_RADIAL_COEFF * delta * nz2 * nx2, "upper")
        )

    satisfied = all(c.satisfied for c in checks) if checks else None
    return TheoremReport(
        region=label.label,
        checks=checks,
        satisfied=satisfied,
        t=label.t,
        d=label.d,
        c=label.c,
        z=z,
    )


# ---------------------------------------------------------------------------
# Region sampling
# ---------------------------------------------------------------------------


def _unit_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal(n)
    norm = np.linalg.norm(g)
    while norm == 0.0:
        g = rng.standard_normal(n)
        norm = np.linalg.norm(g)
    return g / norm


def sample_point(
    region: str,
    x: np.ndarray,
    delta: float = 0.01,
    rng: np.random.Generator | None = None,
    max_radius_factor: float = 2.0,
) -> np.ndarray:
    """Draw one point uniformly-in-(direction, radius) from a region.

    Directions are uniform on the sphere; the radius (and, for R2aSub, the
    overlap z^T x) is uniform within the region's constraints; the full
    membership predicate is then rejection-tested.  R2c is clipped to the
    ball ||z|| <= max_radius_factor ||x||.
    """
    _validate_delta(delta)
    if region not in REGIONS:
        raise ValueError(f"cannot sample region {region!r}")
    if rng is None:
        rng = np.random.default_rng()
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    nx = float(np.linalg.norm(x))
    if not nx > 0:
        raise ValueError("x must be nonzero")
    if region in (R2A_SUB, R2B) and n < 2:
        raise ValueError(f"region {region} is empty for n = 1")

    for _ in range(_MAX_SAMPLER_REJECTIONS):
        if region == R1:
            center = x if rng.integers(2) == 0 else -x
            z = center + rng.uniform(0.0, _D_R1) * nx * _unit_direction(rng, n)
        elif region == R2A_SUB:
            radius = nx * np.sqrt(
                rng.uniform(_T_THIRD - delta, _T_THIRD + delta)
            )
            c = rng.uniform(-delta, delta)
            w = _unit_direction(rng, n)
            w -= (w @ x) / nx**2 * x
            wn = np.linalg.norm(w)
            if wn == 0.0:
                continue
            w /= wn
            ortho_sq = radius**2 - (c * nx) ** 2
            if ortho_sq <= 0.0:
                continue
            z = c * x + np.sqrt(ortho_sq) * w
        else:
            lo, hi = {
                R2A: (np.sqrt(_T_THIRD - delta), np.sqrt(_T_LO)),
                R2B: (np.sqrt(_T_LO), np.sqrt(_T_HI)),
                R2C: (np.sqrt(_T_HI), max_radius_factor),
                R3: (0.0, np.sqrt(_T_THIRD - delta)),
            }[region]
            z = rng.uniform(lo, hi) * nx * _unit_direction(rng, n)
        got = classify(z, x, delta).label
        if got == region or (region == R2A and got == R2A_SUB):
            return z
    raise RuntimeError(
        f"sampler failed to hit region {region} after "
        f"{_MAX_SAMPLER_REJECTIONS} rejections"
    )


def sample_region(
    ensemble: MeasurementEnsemble,
    profile: ActivationProfile,
    region: str,
    count: int,
    delta: float = 0.01,
    sampler_seed: int = 0,
    max_radius_factor: float = 2.0,
    hessian_cap: int = 1024,
) -> tuple[list[TheoremReport], dict]:
    """Verify the region certificate on ``count`` sampled points.

    Each sample uses its own RNG substream of ``sampler_seed``, so results
    are independent of evaluation order and of the thread pool size.  The
    summary reports the pass fraction and the worst (smallest) margin.
    """
    if count < 1:
        raise ValueError(f"need count >= 1, got {count}")
    reports: list[TheoremReport | None] = [None] * count

    def run(i: int):
        rng = RngSpec(sampler_seed, i).generator()
        z = sample_point(
            region, ensemble.x, delta, rng, max_radius_factor=max_radius_factor
        )
        reports[i] = verify_point(
            ensemble, profile, z, delta, hessian_cap=hessian_cap
        )

    workers = worker_count()
    if workers > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(count)))
    else:
        for i in range(count):
            run(i)

    checked = [r for r in reports if r.satisfied is not None]
    margins = [c.margin for r in checked for c in r.checks]
    summary = {
        "region": region,
        "count": count,
        "pass_fraction": (
            sum(r.satisfied for r in checked) / len(checked) if checked else None
        ),
        "min_margin": min(margins) if margins else None,
    }
    return list(reports), summary


# ---------------------------------------------------------------------------
# Gaussian moment identity
# ---------------------------------------------------------------------------


def moment_identity_check(u, v, samples: int = 1_000_000, seed: int = 0) -> dict:
    """Monte Carlo check of E[(a^T u)^2 (a^T v)^2] = ||u||^2||v||^2 + 2(u^T v)^2.

    This fourth-moment identity for a ~ N(0, I_n) is what fixes the
    expected curvature and radial-slope values behind every region bound.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("u and v must be 1-d vectors of equal length")
    if not (np.linalg.norm(u) > 0 and np.linalg.norm(v) > 0):
        raise ValueError("u and v must be nonzero")
    if samples < 1:
        raise ValueError(f"need samples >= 1, got {samples}")
    rng = RngSpec(seed, 0).generator()
    n = u.shape[0]
    total = 0.0
    remaining = samples
    block = 100_000
    while remaining > 0:
        b = min(block, remaining)
        g = rng.standard_normal((b, n))
        total += float(np.sum((g @ u) ** 2 * (g @ v) ** 2))
        remaining -= b
    empirical = total / samples
    analytic = float(u @ u) * float(v @ v) + 2.0 * float(u @ v) ** 2
    return {
        "empirical": empirical,
        "analytic": analytic,
        "rel_err": abs(empirical - analytic) / analytic,
    }
