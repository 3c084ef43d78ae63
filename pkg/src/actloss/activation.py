"""Plateau-to-cutoff activation profiles with two bounded derivatives.

A profile h(u) equals 1 on [0, beta], decays inside (beta, gamma), and is
identically 0 from gamma on, with h, h' and h'' continuous across every
junction.  Two kinds are implemented:

  h1 - a single quintic ramp  -6 t^5 + 15 t^4 - 10 t^3 + 1  in the scaled
       coordinate t = (u - beta) / (gamma - beta);
  h2 - a near-linear ramp 1 - t spliced to quintic shoulders on t in
       [0, 0.1) and (0.9, 1].

Used as multiplicative weights that zero out the heavy-tailed terms of a
quadratic loss while leaving typical terms untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ActivationProfile",
    "evaluate",
    "junction_report",
    "profile_from_spec",
    "sup_norms",
]

_D2SUP_GRID_POINTS = 200_001
_KINDS = ("h1", "h2")


def _h1_interior(t):
    h = ((-6.0 * t + 15.0) * t - 10.0) * t**3 + 1.0
    dh = -30.0 * t**2 * (t - 1.0) ** 2
    d2h = ((-120.0 * t + 180.0) * t - 60.0) * t
    return h, dh, d2h


def _h2_shoulder_low(t):
    h = ((-30000.0 * t + 8000.0) * t - 600.0) * t**3 + 1.0
    dh = ((-150000.0 * t + 32000.0) * t - 1800.0) * t**2
    d2h = ((-600000.0 * t + 96000.0) * t - 3600.0) * t
    return h, dh, d2h


def _h2_linear(t):
    one = np.ones_like(t)
    return 1.0 - t, -one, 0.0 * one


def _h2_shoulder_high(t):
    v = t - 1.0
    h = ((-30000.0 * v - 8000.0) * v - 600.0) * v**3
    dh = ((-150000.0 * v - 32000.0) * v - 1800.0) * v**2
    d2h = ((-600000.0 * v - 96000.0) * v - 3600.0) * v
    return h, dh, d2h


def _plateau(t):
    one = np.ones_like(t)
    return one, 0.0 * one, 0.0 * one


def _cutoff(t):
    zero = np.zeros_like(t)
    return zero, zero, zero


# Interior pieces per kind as (t_lo, t_hi, include_lo, include_hi, fn).
# The half-open conventions keep junction values single-valued: for h2 the
# linear piece owns both of its endpoints, t in [0.1, 0.9].
_PIECES = {
    "h1": ((0.0, 1.0, False, False, _h1_interior),),
    "h2": (
        (0.0, 0.1, False, False, _h2_shoulder_low),
        (0.1, 0.9, True, True, _h2_linear),
        (0.9, 1.0, False, False, _h2_shoulder_high),
    ),
}

# Junctions per kind as (t, left piece, right piece), outer pieces included.
_JUNCTIONS = {
    "h1": (
        (0.0, _plateau, _h1_interior),
        (1.0, _h1_interior, _cutoff),
    ),
    "h2": (
        (0.0, _plateau, _h2_shoulder_low),
        (0.1, _h2_shoulder_low, _h2_linear),
        (0.9, _h2_linear, _h2_shoulder_high),
        (1.0, _h2_shoulder_high, _cutoff),
    ),
}


@dataclass(frozen=True)
class ActivationProfile:
    """Immutable activation profile of a given kind with its sup-norm bounds.

    ``dsup`` and ``d2sup`` bound |h'| and |h''| everywhere: for h1 both are
    closed forms (the ramp derivative peaks at t = 1/2, its second
    derivative at t = (3 +- sqrt(3))/6); for h2 the first-derivative peak
    -1.512 at t = 0.06 is exact while |h''| is maximized on a dense grid.
    """

    kind: str
    beta: float
    gamma: float
    dsup: float = field(init=False)
    d2sup: float = field(init=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if not self.beta > 1.0:
            raise ValueError(f"beta must exceed 1, got {self.beta}")
        if not self.gamma > self.beta:
            raise ValueError(
                f"gamma must exceed beta, got beta={self.beta}, gamma={self.gamma}"
            )
        width = self.gamma - self.beta
        if self.kind == "h1":
            dsup = 1.875 / width
            d2sup = (10.0 / np.sqrt(3.0)) / width**2
        else:
            dsup = 1.512 / width
            t = np.linspace(0.0, 1.0, _D2SUP_GRID_POINTS)
            d2 = np.empty_like(t)
            for lo, hi, inc_lo, inc_hi, fn in _PIECES["h2"]:
                mask = (t >= lo if inc_lo else t > lo) & (t <= hi if inc_hi else t < hi)
                d2[mask] = fn(t[mask])[2]
            d2[0] = d2[-1] = 0.0
            d2sup = float(np.max(np.abs(d2))) * (1.0 + 1e-6) / width**2
        object.__setattr__(self, "dsup", float(dsup))
        object.__setattr__(self, "d2sup", float(d2sup))

    @property
    def width(self) -> float:
        return self.gamma - self.beta

    def evaluate(self, u):
        return evaluate(self, u)

    def spec_string(self) -> str:
        return f"{self.kind}:beta={self.beta!r},gamma={self.gamma!r}"


def evaluate(profile: ActivationProfile, u):
    """Evaluate (h(u), h'(u), h''(u)) elementwise for u >= 0.

    Scalar input yields scalar floats.  Negative arguments are rejected,
    the weights are only defined on [0, inf).
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr < 0):
        raise ValueError("activation argument must be nonnegative")
    scalar = u_arr.ndim == 0
    u_arr = np.atleast_1d(u_arr)
    width = profile.width
    t = (u_arr - profile.beta) / width

    h = np.empty_like(t)
    dh = np.zeros_like(t)
    d2h = np.zeros_like(t)
    h[t <= 0.0] = 1.0
    h[t >= 1.0] = 0.0
    for lo, hi, inc_lo, inc_hi, fn in _PIECES[profile.kind]:
        mask = (t >= lo if inc_lo else t > lo) & (t <= hi if inc_hi else t < hi)
        if np.any(mask):
            hp, dp, d2p = fn(t[mask])
            h[mask] = hp
            dh[mask] = dp / width
            d2h[mask] = d2p / width**2
    if scalar:
        return float(h[0]), float(dh[0]), float(d2h[0])
    return h, dh, d2h


def sup_norms(profile: ActivationProfile) -> tuple[float, float]:
    """Upper bounds (sup|h'|, sup|h''|) for the profile."""
    return profile.dsup, profile.d2sup


def junction_report(profile: ActivationProfile) -> list[tuple[float, float, float, float]]:
    """One-sided continuity check at every junction of the profile.

    Returns (u_location, h_jump, dh_jump, d2h_jump) per junction, where
    each jump is the right-piece value minus the left-piece value taken at
    the junction itself.  All jumps vanish analytically.
    """
    width = profile.width
    report = []
    for t_j, left, right in _JUNCTIONS[profile.kind]:
        t_arr = np.array([t_j])
        hl, dl, d2l = (v[0] for v in left(t_arr))
        hr, dr, d2r = (v[0] for v in right(t_arr))
        report.append(
            (
                profile.beta + t_j * width,
                float(hr - hl),
                float(dr - dl) / width,
                float(d2r - d2l) / width**2,
            )
        )
    return report


def profile_from_spec(spec: str, default_gamma_ratio: float | None = None) -> ActivationProfile:
    """Parse a profile spec string such as ``h1:beta=10,gamma=20``.

    ``gamma`` may be omitted when ``default_gamma_ratio`` is supplied, in
    which case gamma = ratio * beta.
    """
    kind, _, params = spec.partition(":")
    kind = kind.strip().lower()
    if kind not in _KINDS:
        raise ValueError(f"unknown activation kind {kind!r} in spec {spec!r}")
    values: dict[str, float] = {}
    if params.strip():
        for item in params.split(","):
            key, eq, val = item.partition("=")
            key = key.strip().lower()
            if not eq or key not in ("beta", "gamma"):
                raise ValueError(f"bad profile parameter {item!r} in spec {spec!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise ValueError(f"non-numeric value in {item!r}") from None
    if "beta" not in values:
        raise ValueError(f"profile spec {spec!r} must set beta")
    if "gamma" not in values:
        if default_gamma_ratio is None:
            raise ValueError(f"profile spec {spec!r} must set gamma")
        values["gamma"] = default_gamma_ratio * values["beta"]
    return ActivationProfile(kind=kind, beta=values["beta"], gamma=values["gamma"])
