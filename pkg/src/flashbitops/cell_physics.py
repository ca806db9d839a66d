"""Threshold-voltage model for four-level (MLC) NAND cells.

Each level L0..L3 is a Gaussian threshold-voltage population truncated at
+/- k_sigma standard deviations. Truncation keeps the fresh populations
strictly disjoint around the default read references, which is what lets
a fresh device decode every cell exactly, at any sample size. The same
k_sigma defines the population edges used for valley placement and for
zero-error window analysis.

Wear model (all coefficients live in the config file):

    sigma(n_pe)  = sigma0 * (1 + c * (n_pe / pe_ref) ** e)
    mean(t_ret)  = mean0 - a * ln(1 + t_ret / tau)     programmed levels
    mean(t_ret)  = mean0 + a * ln(1 + t_ret / tau)     erased level (L0)

Cycling widens the populations; retention drifts the programmed means
downward (the top level fastest) and the erased mean slightly upward.
All functions here are pure; randomness enters only through a caller
supplied numpy Generator, so concurrent experiments each own a stream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

_SQRT2 = math.sqrt(2.0)


class Level(enum.IntEnum):
    """The four threshold-voltage levels of a two-bit cell."""

    L0 = 0  # erased
    L1 = 1
    L2 = 2
    L3 = 3


# Gray mapping between levels and (lsb, msb) page bits. Adjacent levels
# differ in exactly one bit.
LSB_OF_LEVEL = (1, 1, 0, 0)
MSB_OF_LEVEL = (1, 0, 0, 1)

_LEVEL_OF_BITS = {(1, 1): Level.L0, (1, 0): Level.L1, (0, 0): Level.L2, (0, 1): Level.L3}


def level_from_bits(lsb: int, msb: int) -> Level:
    return _LEVEL_OF_BITS[(int(lsb), int(msb))]


def levels_from_pages(lsb: np.ndarray, msb: np.ndarray) -> np.ndarray:
    """Vectorized Gray decode of an (lsb, msb) page pair into levels."""
    lsb = np.asarray(lsb, dtype=np.uint8)
    msb = np.asarray(msb, dtype=np.uint8)
    return (2 * (1 - lsb) + (lsb ^ msb)).astype(np.uint8)


@dataclass(frozen=True)
class WearState:
    """Per-block degradation state."""

    pe_cycles: int = 0
    retention_hours: float = 0.0

    def __post_init__(self):
        if self.pe_cycles < 0:
            raise ValueError("pe_cycles must be >= 0")
        if self.retention_hours < 0:
            raise ValueError("retention_hours must be >= 0")


@dataclass(frozen=True)
class StateDistribution:
    mean: float
    sigma: float


@dataclass(frozen=True)
class CellParams:
    """Fresh distribution table plus wear coefficients for all four levels."""

    means_v: tuple[float, float, float, float]
    sigmas_v: tuple[float, float, float, float]
    k_sigma: float
    sigma_growth_coeff: tuple[float, float, float, float]
    sigma_growth_exp: tuple[float, float, float, float]
    pe_ref: int
    retention_shift_v: tuple[float, float, float, float]
    retention_tau_hours: float

    def __post_init__(self):
        m = self.means_v
        if not (m[0] < m[1] < m[2] < m[3]):
            raise ValueError("fresh means must be strictly increasing")
        s = self.sigmas_v
        if any(x <= 0 for x in s):
            raise ValueError("sigmas must be positive")
        if not all(s[0] > s[i] for i in (1, 2, 3)):
            raise ValueError("erased-level sigma must exceed the programmed sigmas")
        a = self.retention_shift_v
        if not (abs(a[3]) > abs(a[2]) > abs(a[1])):
            raise ValueError("retention shifts must satisfy |a3| > |a2| > |a1|")

    @classmethod
    def from_config(cls, cfg: dict) -> "CellParams":
        cp = cfg["cell_physics"]
        wear = cp["wear"]
        return cls(
            means_v=tuple(cp["means_v"]),
            sigmas_v=tuple(cp["sigmas_v"]),
            k_sigma=float(cp["k_sigma"]),
            sigma_growth_coeff=tuple(wear["sigma_growth_coeff"]),
            sigma_growth_exp=tuple(wear["sigma_growth_exp"]),
            pe_ref=int(wear["pe_ref"]),
            retention_shift_v=tuple(wear["retention_shift_v"]),
            retention_tau_hours=float(wear["retention_tau_hours"]),
        )


def distribution_params(level: Level | int, wear: WearState, params: CellParams) -> StateDistribution:
    """Mean/sigma of a level's population after applying the wear model.

    Deterministic, total over valid inputs. Cycling only ever widens
    sigma; retention only ever grows the magnitude of the mean shift.
    """
    i = int(level)
    growth = params.sigma_growth_coeff[i] * (wear.pe_cycles / params.pe_ref) ** params.sigma_growth_exp[i]
    sigma = params.sigmas_v[i] * (1.0 + growth)
    shift = params.retention_shift_v[i] * math.log1p(wear.retention_hours / params.retention_tau_hours)
    if i == 0:
        mean = params.means_v[i] + shift  # erased level drifts up as it regains charge
    else:
        mean = params.means_v[i] - shift
    return StateDistribution(mean=mean, sigma=sigma)


def retention_shift_delta(level: Level | int, wear: WearState, extra_hours: float, params: CellParams) -> float:
    """Mean displacement caused by extending retention from t to t + extra."""
    before = distribution_params(level, wear, params).mean
    after = distribution_params(
        level, WearState(wear.pe_cycles, wear.retention_hours + extra_hours), params
    ).mean
    return after - before


def sample_vth(
    level: Level | int,
    wear: WearState,
    params: CellParams,
    rng: np.random.Generator,
    n: int | None = None,
):
    """Draw threshold voltages for cells programmed to one level.

    Truncated-Gaussian draws (|z| <= k_sigma) via rejection; identical
    seed and call sequence give bit-identical values. Returns a scalar
    when ``n`` is None, else an ndarray of length n.
    """
    dist = distribution_params(level, wear, params)
    count = 1 if n is None else int(n)
    z = _truncated_standard_normal(count, params.k_sigma, rng)
    out = dist.mean + dist.sigma * z
    return float(out[0]) if n is None else out


def sample_vth_for_levels(
    levels: np.ndarray,
    wear: WearState,
    params: CellParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized draw for a whole wordline of mixed levels.

    One truncated-normal draw per cell, scaled per cell by its level's
    wear-adjusted mean/sigma.
    """
    levels = np.asarray(levels, dtype=np.uint8)
    dists = [distribution_params(i, wear, params) for i in range(4)]
    means = np.array([d.mean for d in dists])
    sigmas = np.array([d.sigma for d in dists])
    z = _truncated_standard_normal(levels.size, params.k_sigma, rng)
    return means[levels] + sigmas[levels] * z


def _truncated_standard_normal(n: int, k: float, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(n)
    bad = np.abs(z) > k
    # ~5e-4 rejection rate at k = 3.5; a few rounds at most.
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > k
    return z


def level_edges(level: Level | int, wear: WearState, params: CellParams) -> tuple[float, float]:
    """(low, high) support edges of a level's truncated population."""
    d = distribution_params(level, wear, params)
    return d.mean - params.k_sigma * d.sigma, d.mean + params.k_sigma * d.sigma


def valley_midpoint(lower: Level | int, upper: Level | int, params: CellParams, k_sigma: float | None = None) -> float:
    """Midpoint of the gap between two adjacent fresh populations.

    The gap is [mean_lo + k*sigma_lo, mean_hi - k*sigma_hi]; the offset
    planner targets these midpoints. Rejects non-adjacent level pairs.
    """
    lo, hi = int(lower), int(upper)
    if hi != lo + 1:
        raise ValueError(f"levels must be adjacent, got L{lo} and L{hi}")
    k = params.k_sigma if k_sigma is None else k_sigma
    left = params.means_v[lo] + k * params.sigmas_v[lo]
    right = params.means_v[hi] - k * params.sigmas_v[hi]
    return 0.5 * (left + right)


def valley_window(lower: Level | int, upper: Level | int, wear: WearState, params: CellParams) -> tuple[float, float]:
    """Zero-error reference window between two adjacent populations at a
    given wear point. Empty (lo >= hi) once the populations overlap."""
    lo, hi = int(lower), int(upper)
    if hi != lo + 1:
        raise ValueError(f"levels must be adjacent, got L{lo} and L{hi}")
    return level_edges(lo, wear, params)[1], level_edges(hi, wear, params)[0]


# ---------------------------------------------------------------------------
# Truncated-normal probability helpers (used by the analytic error model)

def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


def truncated_cdf(x: float, mean: float, sigma: float, k: float) -> float:
    """P(vth < x) for a Gaussian truncated at mean +/- k*sigma."""
    z = (x - mean) / sigma
    if z <= -k:
        return 0.0
    if z >= k:
        return 1.0
    norm = 2.0 * _phi(k) - 1.0
    return (_phi(z) - _phi(-k)) / norm


def truncated_mass(a: float, b: float, mean: float, sigma: float, k: float) -> float:
    """P(a <= vth < b) under the truncated population."""
    if b <= a:
        return 0.0
    return truncated_cdf(b, mean, sigma, k) - truncated_cdf(a, mean, sigma, k)
