"""Gradient descent for both losses with energy-normalized stepsizes.

The iteration is z <- z - (mu / (2 ||y||_1 / m)) * grad(loss)(z) from a
standard Gaussian start.  Normalizing the nominal stepsize mu by the mean
measurement makes the update scale-appropriate: for the activated loss,
whose weight arguments are scale invariant, the whole trajectory is
exactly equivariant under x -> c x, z0 -> c z0.

The extra factor 2 in the denominator fixes the convention for the
nominal mu values 0.1/0.2/0.3 used throughout the recovery experiments.
It is forced by local stability: at the recovery target the largest
curvature of either loss is about 12 ||x||^2 in expectation (and larger
at m = 6n sample sizes), so a step of mu / (||y||_1/m) with mu >= 0.2
would satisfy mu * lambda_max > 2 and provably oscillate instead of
converging; under the halved step the nominal pairings behave exactly as
intended (mu = 0.1 converges for both losses, mu = 0.3 converges for the
activated loss and sends the bare loss into divergence or limit cycles).

Success means the phase-invariant relative error
min{||z - x||, ||z + x||} / ||x|| falls below the tolerance; runs whose
iterates blow past 1e6 ||x|| or go non-finite are recorded as diverged.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .activation import ActivationProfile
from .ensemble import MeasurementEnsemble, RngSpec, generate
from .loss import (
    SingularityError,
    _activated_grad,
    _vanilla_grad,
    SINGULARITY_GUARD,
    activation_weights_x,
)

__all__ = [
    "SolveConfig",
    "TrialRecord",
    "descend",
    "dist",
    "success_curve",
]

DIVERGENCE_FACTOR = 1e6

# Stepsize/plateau pairings used by the transition experiments: stricter
# activation for larger steps, with gamma = 1.5 beta throughout.
STEPSIZE_BETA_PAIRINGS = {0.1: 20.0, 0.2: 10.0, 0.3: 5.0}
TRANSITION_GAMMA_RATIO = 1.5


def dist(z, x) -> float:
    """Phase-invariant distance min{||z - x||, ||z + x||}."""
    z = np.asarray(z, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if z.shape != x.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {x.shape}")
    return float(min(np.linalg.norm(z - x), np.linalg.norm(z + x)))


@dataclass(frozen=True)
class SolveConfig:
    """Settings for one descent run.

    ``mu`` is the dimensionless stepsize numerator; the effective step is
    mu / (2 ||y||_1 / m).  ``init_seed``/``init_stream`` key the Gaussian
    starting point.
    """

    mu: float
    max_iters: int = 2500
    tol: float = 1e-3
    loss_kind: str = "activated"
    profile: ActivationProfile | None = None
    init_seed: int = 0
    init_stream: int = 1

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.loss_kind not in ("vanilla", "activated"):
            raise ValueError(f"unknown loss_kind {self.loss_kind!r}")
        if self.loss_kind == "activated" and self.profile is None:
            raise ValueError("activated runs need an activation profile")


@dataclass
class TrialRecord:
    """Outcome of one descent run."""

    config: SolveConfig
    iterations_run: int
    final_rel_err: float
    success: bool
    diverged: bool = False
    z_final: np.ndarray | None = None
    trajectory: list[float] | None = None


def _draw_init(
    ensemble: MeasurementEnsemble, config: SolveConfig
) -> np.ndarray:
    rng = RngSpec(config.init_seed, config.init_stream).generator()
    guard = SINGULARITY_GUARD * ensemble.x_norm
    z0 = rng.standard_normal(ensemble.n)
    while config.loss_kind == "activated" and np.linalg.norm(z0) < guard:
        z0 = rng.standard_normal(ensemble.n)
    return z0


def descend(
    ensemble: MeasurementEnsemble,
    config: SolveConfig,
    z0: np.ndarray | None = None,
    record_trajectory: bool = False,
) -> TrialRecord:
    """Run gradient descent until success, divergence, or the iteration cap.

    The starting point is drawn from (init_seed, init_stream) unless given
    explicitly.  Gradient evaluation failures (e.g. an iterate collapsing
    onto the origin) are recorded as divergence, not raised.
    """
    A, y, x = ensemble.A, ensemble.y, ensemble.x
    nx = ensemble.x_norm
    step = 0.5 * config.mu / ensemble.y1_over_m
    if z0 is None:
        z = _draw_init(ensemble, config)
    else:
        z = np.asarray(z0, dtype=np.float64).copy()
        if z.shape != (ensemble.n,):
            raise ValueError(f"z0 must have length {ensemble.n}")

    if config.loss_kind == "activated":
        hx = activation_weights_x(ensemble, config.profile)

        def grad(zv):
            return _activated_grad(A, y, hx, config.profile, zv, float(zv @ zv))

    else:
        def grad(zv):
            return _vanilla_grad(A, y, zv)

    trajectory: list[float] | None = [] if record_trajectory else None
    rel = dist(z, x) / nx
    iterations = 0
    diverged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(config.max_iters):
            if rel <= config.tol:
                break
            if not np.all(np.isfinite(z)) or np.linalg.norm(z) > DIVERGENCE_FACTOR * nx:
                diverged = True
                rel = float("inf") if not np.all(np.isfinite(z)) else rel
                break
            try:
                z = z - step * grad(z)
            except (SingularityError, FloatingPointError):
                diverged = True
                break
            iterations = it + 1
            rel = dist(z, x) / nx
            if trajectory is not None:
                trajectory.append(rel)
    if not np.isfinite(rel):
        diverged = True
    success = bool(np.isfinite(rel) and rel <= config.tol and not diverged)
    return TrialRecord(
        config=config,
        iterations_run=iterations,
        final_rel_err=float(rel),
        success=success,
        diverged=diverged,
        z_final=z,
        trajectory=trajectory,
    )


# ---------------------------------------------------------------------------
# Monte Carlo transition curves
# ---------------------------------------------------------------------------


def trial_streams(ratio: float, trial: int) -> tuple[int, int]:
    """Substream ids for one (ratio, trial) cell: (ensemble, init).

    Keyed by the ratio value and trial index so that extending the trial
    count or the ratio grid never perturbs existing cells, and so that
    vanilla and activated runs of the same cell share instance and start.
    """
    base = (int(round(ratio * 1000)) << 28) | (trial << 2)
    return base, base + 1


def worker_count() -> int:
    env = os.environ.get("ARTIFACT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def _run_cell(
    n: int,
    ratio: float,
    trial: int,
    config: SolveConfig,
    master_seed: int,
    x_mode: str,
) -> TrialRecord:
    ens_stream, init_stream = trial_streams(ratio, trial)
    m = int(round(ratio * n))
    ens = generate(n, m, master_seed, x_mode=x_mode, stream_id=ens_stream)
    cfg = replace(config, init_seed=master_seed, init_stream=init_stream)
    return descend(ens, cfg)


def success_curve(
    n: int,
    ratios,
    trials: int,
    config: SolveConfig,
    master_seed: int = 0,
    x_mode: str = "gaussian",
    return_records: bool = False,
):
    """Empirical success probability per sampling ratio m/n.

    Each (ratio, trial) cell gets an independent instance and start drawn
    from its own substream of ``master_seed``.  Trials fan out across a
    thread pool capped by ARTIFACT_THREADS; aggregation is by counts, so
    the result does not depend on scheduling.
    """
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    ratios = [float(r) for r in ratios]
    cells = [(ri, r, t) for ri, r in enumerate(ratios) for t in range(trials)]
    records: list[TrialRecord | None] = [None] * len(cells)

    def run(idx_cell):
        idx, (_, r, t) = idx_cell
        records[idx] = _run_cell(n, r, t, config, master_seed, x_mode)

    workers = worker_count()
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, enumerate(cells)))
    else:
        for item in enumerate(cells):
            run(item)

    curve = []
    per_ratio_records = []
    for ri, r in enumerate(ratios):
        recs = [records[ri * trials + t] for t in range(trials)]
        successes = sum(rec.success for rec in recs)
        curve.append((r, successes / trials))
        per_ratio_records.append(recs)
    if return_records:
        return curve, per_ratio_records
    return curve
