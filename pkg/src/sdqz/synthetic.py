"""Deterministic synthetic fields for self-contained testing and demos.

Profiles mimic the behavior classes seen in real simulation output: smooth
multi-wave fields, linear ramps, fields that are overwhelmingly a constant
floor with localized features, flat fields, and pure noise.
"""

from __future__ import annotations

import math

import numpy as np

from .core import SdqzError

PROFILES = ("smooth", "ramp", "sparse-near-zero", "constant", "gaussian-noise")


def _axes(dims: tuple[int, ...]) -> list[np.ndarray]:
    """Normalized open-grid coordinates in [0, 1) per axis."""
    grids = np.ix_(*(np.arange(d, dtype=np.float64) / d for d in dims))
    return list(grids)


def _smooth(rng: np.random.Generator, dims: tuple[int, ...]) -> np.ndarray:
    axes = _axes(dims)
    field = np.zeros(dims)
    for _ in range(6):
        amp = rng.uniform(0.5, 1.0)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        arg = phase
        for t in axes:
            arg = arg + rng.uniform(1.0, 4.0) * 2.0 * math.pi * t
        field += amp * np.sin(arg)
    return field


def _ramp(rng: np.random.Generator, dims: tuple[int, ...]) -> np.ndarray:
    field = rng.uniform(-0.5, 0.5) * np.ones(dims)
    for t in _axes(dims):
        field = field + rng.uniform(0.5, 1.5) * t
    return field


def _sparse_near_zero(rng: np.random.Generator, dims: tuple[int, ...]) -> np.ndarray:
    """~90% exact zeros plus a few smooth positive features, peak 1.0."""
    axes = _axes(dims)
    bumps = np.zeros(dims)
    for _ in range(8):
        center = [rng.uniform(0.0, 1.0) for _ in dims]
        width = rng.uniform(0.04, 0.12)
        dist2 = np.zeros(dims)
        for t, c in zip(axes, center):
            d = np.abs(t - c)
            d = np.minimum(d, 1.0 - d)  # wrap so features never clip at edges
            dist2 = dist2 + d * d
        bumps += rng.uniform(0.5, 1.0) * np.exp(-dist2 / (2.0 * width * width))
    floor = np.quantile(bumps, 0.90)
    field = np.maximum(bumps - floor, 0.0)
    return field / field.max()


def _constant(rng: np.random.Generator, dims: tuple[int, ...], value: float) -> np.ndarray:
    return np.full(dims, float(value))


def _gaussian_noise(rng: np.random.Generator, dims: tuple[int, ...]) -> np.ndarray:
    return rng.normal(0.0, 1.0, size=dims)


def generate_field(profile: str, dims, seed: int = 0, value: float = 0.0) -> np.ndarray:
    """Generate one shaped float64 field; identical (profile, dims, seed, value)
    arguments always produce identical values."""
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or not 1 <= len(dims) <= 3:
        raise SdqzError(f"profile fields are rank 1-3 with positive extents, got {dims}")
    rng = np.random.default_rng(seed)
    if profile == "smooth":
        return _smooth(rng, dims)
    if profile == "ramp":
        return _ramp(rng, dims)
    if profile == "sparse-near-zero":
        return _sparse_near_zero(rng, dims)
    if profile == "constant":
        return _constant(rng, dims, value)
    if profile == "gaussian-noise":
        return _gaussian_noise(rng, dims)
    raise SdqzError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
