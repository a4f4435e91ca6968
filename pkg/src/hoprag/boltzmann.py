"""Numerics for truncated Boltzmann policies over finite reward landscapes.

A landscape is a discrete set of (reward, multiplicity) atoms. Weighting
each trajectory by exp(reward / temperature) gives the softmax policy with
normalizer Z; keeping only rewards strictly above a threshold k gives the
truncated policy with normalizer Z^{>k}. Because the truncated policy is
exactly the conditional of the full one, the KL divergence between them
collapses to log(Z / Z^{>k}), which this module verifies numerically on
every call. All partition arithmetic runs in log space: exp(r / t)
overflows float64 for temperatures below roughly 0.05 otherwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

_IDENTITY_TOL = 1e-9


class NonPositiveAlphaError(ValueError):
    """The softmax temperature must be strictly positive."""


class EmptyTruncationError(ValueError):
    """No atom's reward exceeds the requested threshold."""


@dataclass(frozen=True)
class RewardLandscape:
    """Finite reward support: atoms of (reward value, multiplicity)."""

    atoms: tuple[tuple[float, int], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValueError("a landscape needs at least one atom")
        for reward, multiplicity in self.atoms:
            if not math.isfinite(reward):
                raise ValueError(f"non-finite reward: {reward}")
            if multiplicity < 1:
                raise ValueError(f"multiplicity must be positive, got {multiplicity}")

    @property
    def sup(self) -> float:
        return max(reward for reward, _ in self.atoms)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r for r, _ in self.atoms], dtype=np.float64)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=np.float64)


def _check_temperature(temperature: float) -> None:
    if temperature <= 0:
        raise NonPositiveAlphaError(f"temperature must be > 0, got {temperature}")


def log_partition(landscape: RewardLandscape, temperature: float) -> float:
    """log Z = log sum over atoms of multiplicity * exp(reward / temperature)."""
    _check_temperature(temperature)
    return float(
        logsumexp(landscape.rewards / temperature, b=landscape.multiplicities)
    )


def _surviving(landscape: RewardLandscape, threshold: float) -> np.ndarray:
    mask = landscape.rewards > threshold
    if not mask.any():
        raise EmptyTruncationError(f"no atom with reward > {threshold}")
    return mask


def log_truncated_partition(
    landscape: RewardLandscape, temperature: float, threshold: float
) -> float:
    """log Z^{>k}: the partition restricted to rewards strictly above k."""
    _check_temperature(temperature)
    mask = _surviving(landscape, threshold)
    return float(
        logsumexp(
            landscape.rewards[mask] / temperature, b=landscape.multiplicities[mask]
        )
    )


def truncated_weights(
    landscape: RewardLandscape, temperature: float, threshold: float
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized truncated-softmax weights and their reward values."""
    _check_temperature(temperature)
    mask = _surviving(landscape, threshold)
    rewards = landscape.rewards[mask]
    mults = landscape.multiplicities[mask]
    log_zk = logsumexp(rewards / temperature, b=mults)
    weights = mults * np.exp(rewards / temperature - log_zk)
    return weights, rewards


def kl_truncated(landscape: RewardLandscape, temperature: float, threshold: float) -> float:
    """KL(truncated policy || full policy), verified two ways.

    Computed both from the definition (expected log weight ratio over the
    surviving atoms) and from the conditional-probability identity
    log Z - log Z^{>k}; the two must agree to 1e-9 or this raises.
    """
    log_z = log_partition(landscape, temperature)
    log_zk = log_truncated_partition(landscape, temperature, threshold)
    mask = _surviving(landscape, threshold)
    rewards = landscape.rewards[mask]
    mults = landscape.multiplicities[mask]
    # Per trajectory: log p_trunc - log p_full = log Z - log Z^{>k}; summing
    # weight * ratio over atoms re-derives the identity from raw weights.
    log_w_trunc = rewards / temperature - log_zk
    log_w_full = rewards / temperature - log_z
    by_definition = float(np.sum(mults * np.exp(log_w_trunc) * (log_w_trunc - log_w_full)))
    by_identity = log_z - log_zk
    if abs(by_definition - by_identity) >= _IDENTITY_TOL:
        raise AssertionError(
            f"KL identity violated: definition={by_definition!r}, identity={by_identity!r}"
        )
    return by_identity


def min_threshold_for_delta(
    landscape: RewardLandscape, temperature: float, delta: float
) -> float:
    """Largest atom-boundary threshold whose truncation stays within KL < delta.

    Candidate thresholds are the distinct reward values below the supremum,
    plus a value just below the minimum reward (which truncates nothing and
    gives KL = 0, so a solution always exists for delta > 0).
    """
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    _check_temperature(temperature)
    distinct = sorted({r for r, _ in landscape.atoms})
    candidates = [math.nextafter(distinct[0], -math.inf)]
    candidates.extend(r for r in distinct if r < landscape.sup)
    for threshold in sorted(candidates, reverse=True):
        if kl_truncated(landscape, temperature, threshold) < delta:
            return threshold
    raise AssertionError("unreachable: the no-truncation candidate has KL = 0")


def truncated_variance(
    landscape: RewardLandscape, temperature: float, threshold: float
) -> float:
    """Var[reward] under the truncated softmax weights."""
    weights, rewards = truncated_weights(landscape, temperature, threshold)
    mean = float(np.sum(weights * rewards))
    second = float(np.sum(weights * rewards**2))
    return max(second - mean * mean, 0.0)


def load_landscape(path: str | Path) -> RewardLandscape:
    """Read a landscape file: JSON {"atoms": [[reward, multiplicity], ...]}."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return RewardLandscape(
        atoms=tuple((float(r), int(m)) for r, m in payload["atoms"])
    )


def report_grid(
    landscape: RewardLandscape, temperatures: Sequence[float], threshold: float
) -> list[dict]:
    """Rows of (temperature, threshold, log Z, log Z^{>k}, KL, variance)."""
    rows = []
    for temperature in temperatures:
        rows.append(
            {
                "alpha": temperature,
                "k": threshold,
                "log_z": log_partition(landscape, temperature),
                "log_z_trunc": log_truncated_partition(landscape, temperature, threshold),
                "kl": kl_truncated(landscape, temperature, threshold),
                "var": truncated_variance(landscape, temperature, threshold),
            }
        )
    return rows


def format_report(rows: Sequence[dict]) -> str:
    header = f"{'alpha':>10} {'k':>8} {'log_z':>14} {'log_z_trunc':>14} {'kl':>14} {'var':>14}"
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['alpha']:>10.4g} {row['k']:>8.4g} {row['log_z']:>14.6e} "
            f"{row['log_z_trunc']:>14.6e} {row['kl']:>14.6e} {row['var']:>14.6e}"
        )
    return "\n".join(lines)
