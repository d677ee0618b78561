"""Wireless link model: pathloss, Rayleigh fading, SNR and achievable rates.

Rates are spectral efficiencies in bits/s/Hz scaled by the per-RB bandwidth,
so with bandwidth in MHz they come out in data units (Mbit) per second.
Fading is block fading, i.i.d. across resource blocks and scheduling slots;
the game consumes the long-run mean rate of each link.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .model import Scenario

INV_LN2 = 1.0 / math.log(2.0)


def pathloss(distance: float, exponent: float, ref_power: float = 1.0) -> float:
    """Power-law pathloss gain ref_power * d^(-exponent)."""
    if distance <= 0.0:
        raise ValueError(f"distance must be positive, got {distance}")
    if exponent <= 0.0:
        raise ValueError(f"pathloss exponent must be positive, got {exponent}")
    if ref_power <= 0.0:
        raise ValueError(f"reference power must be positive, got {ref_power}")
    return ref_power * distance ** (-exponent)


def calibrate_power(edge_distance: float, exponent: float, noise_power: float,
                    target_edge_snr_db: float = 0.0) -> float:
    """Transmit power that puts the mean SNR at the farthest distance on target.

    Fading power has unit mean, so E[snr] = p * d^(-a) / sigma2 inverts exactly:
    p = sigma2 * 10^(target/10) * d^a.
    """
    if noise_power <= 0.0:
        raise ValueError(f"noise power must be positive, got {noise_power}")
    return noise_power * 10.0 ** (target_edge_snr_db / 10.0) * edge_distance ** exponent


def draw_fading(rng: np.random.Generator, shape=None):
    """Circularly-symmetric complex Gaussian fading coefficient(s), unit variance."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def fading_power(rng: np.random.Generator, shape=None):
    """|h|^2 draws for unit-variance complex Gaussian h: exponential, mean 1."""
    return rng.standard_exponential(shape)


@dataclass(frozen=True)
class McsTable:
    """Quantized rate table: SNR threshold (dB, ascending) -> spectral efficiency.

    Must be capacity-conforming: each efficiency may not exceed the Shannon
    efficiency at its own threshold, so the quantized rate never exceeds
    log2(1+snr) anywhere. Below the first threshold the rate is zero.
    """
    snr_db_thresholds: tuple
    efficiencies: tuple

    def __post_init__(self):
        thr = tuple(float(t) for t in self.snr_db_thresholds)
        eff = tuple(float(e) for e in self.efficiencies)
        if len(thr) == 0 or len(thr) != len(eff):
            raise ValueError("table needs one efficiency per threshold")
        if any(b <= a for a, b in zip(thr, thr[1:])):
            raise ValueError("SNR thresholds must be strictly ascending")
        if any(e < 0 for e in eff) or any(b < a for a, b in zip(eff, eff[1:])):
            raise ValueError("efficiencies must be nonnegative and nondecreasing")
        for t, e in zip(thr, eff):
            cap = math.log2(1.0 + 10.0 ** (t / 10.0))
            if e > cap + 1e-12:
                raise ValueError(
                    f"efficiency {e} at {t} dB exceeds the Shannon limit {cap:.6f}")
        object.__setattr__(self, "snr_db_thresholds", thr)
        object.__setattr__(self, "efficiencies", eff)

    @classmethod
    def from_csv(cls, path) -> "McsTable":
        """Load `snr_db_threshold,spectral_efficiency` rows (header optional)."""
        thr, eff = [], []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if not row or not row[0].strip():
                    continue
                try:
                    t, e = float(row[0]), float(row[1])
                except ValueError:
                    continue  # header row
                thr.append(t)
                eff.append(e)
        return cls(tuple(thr), tuple(eff))

    def efficiency(self, snr):
        """Quantized spectral efficiency for linear SNR (scalar or array)."""
        snr = np.asarray(snr, dtype=float)
        thr_lin = 10.0 ** (np.array(self.snr_db_thresholds) / 10.0)
        idx = np.searchsorted(thr_lin, snr, side="right") - 1
        eff = np.where(idx >= 0, np.array(self.efficiencies)[np.maximum(idx, 0)], 0.0)
        return eff if eff.ndim else float(eff)


@dataclass(frozen=True)
class LinkState:
    """One link realization: fading coefficient, pathloss gain and resulting SNR."""
    fading_coeff: complex
    pathloss_gain: float
    snr: float

    def __post_init__(self):
        if self.snr < 0.0:
            raise ValueError("SNR cannot be negative")

    @classmethod
    def realize(cls, tx_power: float, distance: float, exponent: float,
                noise_power: float, fading_coeff: complex) -> "LinkState":
        gain = pathloss(distance, exponent)
        snr = tx_power * gain * abs(fading_coeff) ** 2 / noise_power
        return cls(fading_coeff, gain, snr)


def shannon_efficiency(snr):
    """log2(1 + snr), elementwise."""
    return np.log1p(snr) * INV_LN2


def single_link_rate(tx_power: float, fading_coeff, gain: float,
                     noise_power: float, scale: float = 1.0) -> float:
    """Rate of one link for one fading realization: scale * log2(1 + SNR)."""
    if noise_power <= 0.0:
        raise ValueError(f"noise power must be positive, got {noise_power}")
    snr = tx_power * gain * abs(fading_coeff) ** 2 / noise_power
    return scale * float(shannon_efficiency(snr))


def _allocation_matrix(allocation) -> np.ndarray:
    mat = np.asarray(getattr(allocation, "matrix", allocation))
    if mat.ndim != 2:
        raise ValueError("allocation must be a (n_rb, n_providers) matrix")
    if not np.isin(mat, (0, 1)).all():
        raise ValueError("allocation entries must be 0 or 1")
    if (mat.sum(axis=1) > 1).any():
        raise ValueError("a resource block is assigned to more than one provider")
    return mat


def multi_rp_rate(allocation, rb_rates) -> np.ndarray:
    """Per-provider rate: sum of per-RB rates over the RBs assigned to each one.

    `rb_rates[k, j]` is provider j's rate on resource block k; providers that
    hold no RB get rate zero.
    """
    mat = _allocation_matrix(allocation)
    rb_rates = np.asarray(rb_rates, dtype=float)
    if rb_rates.shape != mat.shape:
        raise ValueError(f"rb_rates shape {rb_rates.shape} != allocation {mat.shape}")
    return (mat * rb_rates).sum(axis=0)


def snr_scales(scenario: "Scenario") -> np.ndarray:
    """Mean-SNR factor p_c * d_j^(-alpha) / sigma^2 per provider."""
    p_c = scenario.consumer.tx_power
    return np.array([
        p_c * pathloss(p.distance_to_ap, scenario.pathloss_exponent) / scenario.noise_power
        for p in scenario.providers
    ])


def _se(snr, scenario: "Scenario"):
    if scenario.rate_model == "mcs_table":
        return scenario.mcs_table.efficiency(snr)
    return shannon_efficiency(snr)


def mean_rb_spectral_efficiency(scenario: "Scenario", rng: np.random.Generator,
                                n_draws: int = 1000, fading: bool = True) -> np.ndarray:
    """Empirical mean spectral efficiency per (RB, provider) over fading draws.

    With fading=False the fading power is pinned at its mean 1 and the result
    is deterministic regardless of n_draws.
    """
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    scales = snr_scales(scenario)
    if fading:
        x = rng.standard_exponential((n_draws, scenario.n_rb, len(scales)))
    else:
        x = np.ones((1, scenario.n_rb, len(scales)))
    return _se(scales * x, scenario).mean(axis=0)


def effective_rates(scenario: "Scenario", allocation,
                    rng: np.random.Generator | None = None,
                    n_draws: int = 1000, fading: bool = True) -> np.ndarray:
    """Mean per-provider rate over i.i.d. fading realizations of the allocation.

    The game treats each link's rate as constant; transmissions span many
    scheduling slots, so the long-run mean over slot fading is the operative
    value. Deterministic given the scenario seed (or an explicit rng).
    """
    from .model import FADING_STREAM, substream  # local import avoids a cycle
    if rng is None:
        rng = substream(scenario.rng_seed, FADING_STREAM)
    mat = _allocation_matrix(allocation)
    se_mean = mean_rb_spectral_efficiency(scenario, rng, n_draws, fading=fading)
    return scenario.rb_bandwidth * (mat * se_mean).sum(axis=0)


def rb_rate_draw(scenario: "Scenario", rng: np.random.Generator) -> np.ndarray:
    """One-slot per-RB, per-provider rates (used by MaxWeight scheduling)."""
    scales = snr_scales(scenario)
    x = rng.standard_exponential((scenario.n_rb, len(scales)))
    return scenario.rb_bandwidth * _se(scales * x, scenario)
