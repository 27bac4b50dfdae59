"""Observation models that share a planted frame: matrix denoising, spiked
covariance, symmetric noise, and two-group clustering.

Families and shapes:

- "denoising":  Y = U diag(spectrum) V' + sigma * Z, Y is p1 x p2
- "wishart":    n rows iid N(mean, U diag(spectrum) U' + sigma^2 I), Y is n x p
- "wigner":     Y = U diag(spectrum) U' + sigma * Z symmetric, Y is p x p
- "clustering": Y = sqrt(n) u theta' + sigma * Z, Y is n x p, u = labels/sqrt(n)

All randomness flows through a counter-based generator keyed by
(seed, trial_index), so any trial can be regenerated bit for bit without
replaying the ones before it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constraints
from .errors import (ConstraintViolation, DimensionMismatch, NotPositiveDefinite,
                     TooFewRows)
from .geometry import OrthonormalFrame, SpectrumSpec, procrustes_align

DENOISING = "denoising"
WISHART = "wishart"
WIGNER = "wigner"
CLUSTERING = "clustering"

FAMILIES = (DENOISING, WISHART, WIGNER, CLUSTERING)


@dataclass(frozen=True)
class ModelSpec:
    """Family, dimensions, planted spectrum, noise level, and master seed."""

    family: str
    rank: int
    spectrum: SpectrumSpec
    noise_sd: float
    seed: int
    p1: int | None = None
    p2: int | None = None
    n: int | None = None
    p: int | None = None
    mean: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.spectrum.rank != self.rank:
            raise DimensionMismatch("spectrum length must equal rank")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.family == DENOISING:
            if not (self.p1 and self.p2):
                raise DimensionMismatch("denoising needs p1 and p2")
            if self.rank > min(self.p1, self.p2):
                raise DimensionMismatch("rank exceeds min(p1, p2)")
        elif self.family in (WISHART, CLUSTERING):
            if not (self.n and self.p):
                raise DimensionMismatch(f"{self.family} needs n and p")
            ambient = self.p if self.family == WISHART else self.n
            if self.rank > ambient:
                raise DimensionMismatch("rank exceeds the frame dimension")
            if self.family == CLUSTERING and self.rank != 1:
                raise ValueError("clustering is a rank-one family")
        else:  # wigner
            if not self.p:
                raise DimensionMismatch("wigner needs p")
            if self.rank > self.p:
                raise DimensionMismatch("rank exceeds p")
        if self.mean is not None:
            if self.family != WISHART:
                raise ValueError("mean applies only to the wishart family")
            if len(self.mean) != self.p:
                raise DimensionMismatch("mean length must equal p")
            object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))

    @property
    def frame_dim(self) -> int:
        """Ambient dimension of the planted frame."""
        if self.family == DENOISING:
            return self.p1
        if self.family == CLUSTERING:
            return self.n
        return self.p


@dataclass
class SampledInstance:
    """One draw from a model: the observation plus the planted truth."""

    spec: ModelSpec
    observation: np.ndarray
    truth_left: OrthonormalFrame
    truth_spectrum: SpectrumSpec
    truth_right: OrthonormalFrame | None = None
    labels: np.ndarray | None = None


def instance_rng(seed: int, trial_index: int = 0) -> np.random.Generator:
    """Counter-based stream for one trial, independent of every other trial."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.Philox(ss))


def sample_instance(spec: ModelSpec, cset: constraints.ConstraintSet,
                    truth_frame: OrthonormalFrame | None = None,
                    right_frame: OrthonormalFrame | None = None,
                    trial_index: int = 0) -> SampledInstance:
    """Draw one observation with the planted frame taken from cset.

    Draw order within the trial stream is fixed (truth, then the right frame
    where one exists, then noise), so identical specs reproduce the identical
    instance.  A provided truth_frame is membership-checked instead of drawn.
    """
    if cset.p != spec.frame_dim or cset.r != spec.rank:
        raise DimensionMismatch(
            f"constraint ambient {cset.p} x {cset.r} does not match model "
            f"({spec.frame_dim} x {spec.rank})")
    rng = instance_rng(spec.seed, trial_index)
    if truth_frame is not None:
        if not constraints.contains(cset, truth_frame, tol=1e-8):
            raise ConstraintViolation("truth_frame is not a member of the constraint")
        truth = truth_frame
    else:
        truth = constraints.random_member(cset, rng)
    lam = spec.spectrum.array
    sigma = spec.noise_sd

    if spec.family == DENOISING:
        if right_frame is not None:
            if right_frame.p != spec.p2 or right_frame.r != spec.rank:
                raise DimensionMismatch("right_frame shape does not match (p2, rank)")
            right = right_frame
        else:
            right = constraints.random_member(
                constraints.unconstrained(spec.p2, spec.rank), rng)
        noise = rng.standard_normal((spec.p1, spec.p2))
        y = (truth.values * lam) @ right.values.T + sigma * noise
        return SampledInstance(spec, y, truth, spec.spectrum, truth_right=right)

    if spec.family == WISHART:
        scores = rng.standard_normal((spec.n, spec.rank))
        noise = rng.standard_normal((spec.n, spec.p))
        y = (scores * np.sqrt(lam)) @ truth.values.T + sigma * noise
        if spec.mean is not None:
            y = y + np.asarray(spec.mean)
        return SampledInstance(spec, y, truth, spec.spectrum)

    if spec.family == WIGNER:
        raw = rng.standard_normal((spec.p, spec.p))
        z = np.triu(raw) + np.triu(raw, 1).T
        y = (truth.values * lam) @ truth.values.T + sigma * z
        return SampledInstance(spec, y, truth, spec.spectrum, truth_right=truth)

    # clustering: labels are the signs of the planted unit vector
    right = constraints.random_member(
        constraints.unconstrained(spec.p, 1), rng)
    noise = rng.standard_normal((spec.n, spec.p))
    y = lam[0] * truth.values @ right.values.T + sigma * noise
    labels = np.where(truth.values[:, 0] >= 0, 1, -1)
    return SampledInstance(spec, y, truth, spec.spectrum, truth_right=right,
                           labels=labels)


def sample_covariance(rows: np.ndarray) -> np.ndarray:
    """Centered second-moment matrix with divisor n (not n - 1)."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise DimensionMismatch(f"expected an n x p matrix, got shape {rows.shape}")
    n = rows.shape[0]
    if n < 2:
        raise TooFewRows("need at least two rows")
    centered = rows - rows.mean(axis=0)
    cov = centered.T @ centered / n
    return (cov + cov.T) / 2.0


def kl_spiked_wishart(ui: OrthonormalFrame, uj: OrthonormalFrame, t: float,
                      sigma: float, n: int) -> float:
    """KL divergence between n-sample spiked covariance models with flat
    spectra t and frames ui, uj:  n t^2 (r - ||ui' uj||_F^2) / (2 s^2 (s^2 + t))."""
    if ui.values.shape != uj.values.shape:
        raise DimensionMismatch("frames must share a shape")
    gram = ui.values.T @ uj.values
    gap = max(ui.r - float(np.sum(gram * gram)), 0.0)
    s2 = sigma * sigma
    return n * t * t * gap / (2.0 * s2 * (s2 + t))


def _check_spd(cov: np.ndarray, name: str) -> None:
    ev = np.linalg.eigvalsh(cov)
    if ev[0] <= 1e-12 * max(ev[-1], 0.0) or ev[-1] <= 0.0:
        raise NotPositiveDefinite(f"{name} is not positive definite")


def kl_gaussian_generic(mean0, cov0, mean1, cov1) -> float:
    """KL(N(mean0, cov0) || N(mean1, cov1)), the standard closed form
    (trace + quadratic + log-determinant terms)."""
    mean0 = np.asarray(mean0, dtype=float).ravel()
    mean1 = np.asarray(mean1, dtype=float).ravel()
    cov0 = np.asarray(cov0, dtype=float)
    cov1 = np.asarray(cov1, dtype=float)
    p = mean0.size
    if mean1.size != p or cov0.shape != (p, p) or cov1.shape != (p, p):
        raise DimensionMismatch("mean/covariance shapes are inconsistent")
    _check_spd(cov0, "cov0")
    _check_spd(cov1, "cov1")
    solve = np.linalg.solve
    trace_term = float(np.trace(solve(cov1, cov0)))
    delta = mean1 - mean0
    quad = float(delta @ solve(cov1, delta))
    _, logdet0 = np.linalg.slogdet(cov0)
    _, logdet1 = np.linalg.slogdet(cov1)
    return 0.5 * (trace_term + quad - p + logdet1 - logdet0)


def kl_denoising_fixed(ui: OrthonormalFrame, uj: OrthonormalFrame,
                       v0: OrthonormalFrame, spectrum: SpectrumSpec,
                       sigma: float) -> float:
    """KL divergence between denoising models sharing the right frame v0,
    after rotating uj onto ui:  ||(ui - uj O) diag(spectrum) v0'||_F^2 / (2 s^2)."""
    if ui.values.shape != uj.values.shape:
        raise DimensionMismatch("frames must share a shape")
    if v0.r != ui.r:
        raise DimensionMismatch("right frame width must match rank")
    rotation, residual = procrustes_align(ui, uj)
    diff = (ui.values - uj.values @ rotation) * spectrum.array
    value = float(np.sum(diff * diff)) / (2.0 * sigma * sigma)
    lam1 = spectrum.values[0]
    assert value <= (lam1 * residual) ** 2 / (2.0 * sigma * sigma) + 1e-9
    return value
