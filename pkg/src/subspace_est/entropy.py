"""Metric entropy tools: packing constructions, greedy covering estimates, and
entropy-integral summaries for constraint sets.

Conventions.  A packing of a ball B(center, eps) is a set of members of the
constraint set inside the ball whose pairwise distances exceed alpha * eps.
Covering numbers are estimated from random draws by a greedy net, so every
reported count is a lower estimate of the true covering number at that scale.
The normalized projector differences

    T(C, U) = { (W W' - U U') / ||W W' - U U'||_F : W in C, W not aligned with U }

carry the Frobenius metric; entropy integrals over T summarize how rich the
constraint set looks from U.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import constraints
from .errors import BudgetExhausted, DimensionMismatch, InfeasibleParameters
from .geometry import OrthonormalFrame, subspace_distance
from .matio import write_matrix

_SLACK = 1e-9


@dataclass
class PackingSet:
    """Members of a constraint set packed inside a metric ball.

    Invariants (checked by validate): every member lies within radius + 1e-9
    of the center, distinct members are separated by more than
    separation - 1e-9, and separation = alpha * radius with alpha in (0, 1).
    """

    center: OrthonormalFrame
    radius: float
    separation: float
    members: list
    alpha: float

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if abs(self.separation - self.alpha * self.radius) > _SLACK:
            raise ValueError("separation must equal alpha * radius")
        for i, m in enumerate(self.members):
            dist = subspace_distance(m, self.center)
            if dist > self.radius + _SLACK:
                raise ValueError(
                    f"member {i} at distance {dist:.6g} exceeds radius {self.radius:.6g}")
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                dist = subspace_distance(self.members[i], self.members[j])
                if dist <= self.separation - _SLACK:
                    raise ValueError(
                        f"members {i}, {j} at distance {dist:.6g} are closer than "
                        f"the separation {self.separation:.6g}")

    def min_pairwise_distance(self) -> float:
        best = math.inf
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                best = min(best, subspace_distance(self.members[i], self.members[j]))
        return best

    def export(self, directory) -> None:
        """One CSV per member plus a JSON manifest."""
        os.makedirs(directory, exist_ok=True)
        write_matrix(os.path.join(directory, "center.csv"), self.center.values)
        names = []
        for i, m in enumerate(self.members):
            name = f"member_{i:04d}.csv"
            names.append(name)
            values = m.values if isinstance(m, OrthonormalFrame) else m
            write_matrix(os.path.join(directory, name), values)
        manifest = {
            "alpha": self.alpha,
            "center": "center.csv",
            "member_count": len(self.members),
            "members": names,
            "min_pairwise_distance": self.min_pairwise_distance()
            if len(self.members) > 1 else None,
            "radius": self.radius,
            "separation": self.separation,
        }
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class EntropyEstimate:
    """Greedy covering counts over an epsilon grid plus entropy integrals.

    dudley_value integrates sqrt(log N(eps)) over the grid, dudley_prime
    integrates log N(eps); both by the trapezoid rule on the given grid.
    """

    epsilons: tuple
    log_covering: tuple
    dudley_value: float
    dudley_prime: float
    budget: int

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        logs = tuple(float(v) for v in self.log_covering)
        if len(eps) != len(logs):
            raise DimensionMismatch("epsilons and log_covering lengths differ")
        if any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly increasing")
        if any(b > a + _SLACK for a, b in zip(logs, logs[1:])):
            raise ValueError("log_covering must be non-increasing in epsilon")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "log_covering", logs)


def vg_codebook(n: int, d: int, budget: int = 10 ** 6, seed: int = 0,
                target: int | None = None) -> np.ndarray:
    """Constant-weight binary codebook by randomized greedy rejection.

    Draws weight-d vectors in {0,1}^n and keeps one whenever its Hamming
    distance to everything kept so far is at least d/2 (equivalently, support
    overlap at most 3d/4).  The default target size is
    ceil(exp(0.233 d log(n/d))), which such a code always admits; raises
    BudgetExhausted if the draw budget runs out first (retry with a fresh
    seed).  Requires d <= n/4.
    """
    if d < 1 or d > n / 4:
        raise InfeasibleParameters(f"need 1 <= d <= n/4, got n={n} d={d}")
    if target is None:
        target = math.ceil(math.exp(0.233 * d * math.log(n / d)))
    rng = constraints.as_generator(seed)
    max_overlap = (3 * d) // 4
    kept = np.zeros((target, n), dtype=np.int64)
    count = 0
    for _ in range(budget):
        vec = np.zeros(n, dtype=np.int64)
        vec[rng.choice(n, size=d, replace=False)] = 1
        if count and np.max(kept[:count] @ vec) > max_overlap:
            continue
        kept[count] = vec
        count += 1
        if count >= target:
            return kept.copy()
    raise BudgetExhausted(
        f"found {count} of {target} codewords within {budget} draws")


def _pad_identity_columns(first_col: np.ndarray, p: int, r: int) -> np.ndarray:
    """Embed a first column plus a trailing identity block into a p x r frame."""
    out = np.zeros((p, r))
    out[: first_col.size, 0] = first_col
    for j in range(1, r):
        out[p - r + j, j] = 1.0
    return out


def sparse_packing_construction(p1: int, r: int, k: int, epsilon: float,
                                budget: int = 10 ** 6, seed: int = 0) -> PackingSet:
    """Explicit packing of a radius sqrt(2) eps ball inside the k-sparse frames.

    Each member embeds a unit vector (sqrt(1 - eps^2), eps w / sqrt(d)) built
    from a constant-weight codeword w, alongside a fixed identity block for
    the remaining r - 1 columns, giving pairwise distances above eps / 2 at
    distance exactly sqrt(2) eps from the center.  Feasibility needs
    k / e <= (p1 - r - 1) / 4 and room for the codeword weight inside k.
    """
    if not 0.0 < epsilon <= 1.0:
        raise InfeasibleParameters("epsilon must lie in (0, 1]")
    if r < 1 or k < r or p1 <= r + 1:
        raise InfeasibleParameters(f"bad dimensions p1={p1} r={r} k={k}")
    n_code = p1 - r - 1
    if k / math.e > n_code / 4.0:
        raise InfeasibleParameters(
            f"need k/e <= (p1 - r - 1)/4, got k={k}, p1={p1}, r={r}")
    weight = max(1, math.floor(k / math.e))
    if 1 + weight > k:
        raise InfeasibleParameters(f"k={k} leaves no room for the codeword weight")
    target = math.ceil(math.exp(0.233 * (k / math.e) * math.log(math.e * n_code / k)))
    code = vg_codebook(n_code, weight, budget=budget, seed=seed, target=target)
    head = math.sqrt(1.0 - epsilon * epsilon)
    members = []
    for row in code:
        vec = np.concatenate(([head], epsilon * row / math.sqrt(weight)))
        members.append(OrthonormalFrame(_pad_identity_columns(vec, p1, r)))
    center_vec = np.zeros(n_code + 1)
    center_vec[0] = 1.0
    center = OrthonormalFrame(_pad_identity_columns(center_vec, p1, r))
    return PackingSet(center=center, radius=math.sqrt(2.0) * epsilon,
                      separation=epsilon / 2.0, members=members,
                      alpha=1.0 / (2.0 * math.sqrt(2.0)))


def sign_packing_construction(n: int, d: int, budget: int = 10 ** 6,
                              seed: int = 0) -> PackingSet:
    """Packing of sign vectors around the all-negative corner.

    Members flip the coordinates of a weight-d codeword, i.e.
    u = (2w - 1) / sqrt(n); the all-negative vector itself (w = 0) is
    included.  Euclidean gaps of 2 sqrt(d/n) translate, through the rotation
    sandwich, to a containment radius 2 sqrt(2 d / n) and a pairwise
    separation sqrt(d/n) in the projector distance.
    """
    code = vg_codebook(n, d, budget=budget, seed=seed)
    root = math.sqrt(n)
    members = [OrthonormalFrame(-np.ones((n, 1)) / root)]
    for row in code:
        members.append(OrthonormalFrame(((2.0 * row - 1.0) / root)[:, None]))
    center = members[0]
    radius = 2.0 * math.sqrt(2.0 * d / n)
    return PackingSet(center=center, radius=radius,
                      separation=math.sqrt(d / n), members=members,
                      alpha=math.sqrt(d / n) / radius)


def greedy_local_packing(cset: constraints.ConstraintSet, center: OrthonormalFrame,
                         epsilon: float, alpha: float, budget: int = 2000,
                         seed: int = 0) -> PackingSet:
    """Greedy packing of B(center, epsilon) by random members of the set.

    Draws budget members, keeps those inside the ball, and admits a candidate
    whenever it is farther than alpha * epsilon from everything admitted so
    far.  The center seeds the packing, so a single-element set means no
    candidate survived.  The count is a lower estimate of the packing number.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    rng = constraints.as_generator(seed)
    members = [center]
    threshold = alpha * epsilon
    for _ in range(budget):
        cand = constraints.random_member(cset, rng)
        if subspace_distance(cand, center) > epsilon:
            continue
        if all(subspace_distance(cand, m) > threshold for m in members):
            members.append(cand)
    return PackingSet(center=center, radius=epsilon, separation=threshold,
                      members=members, alpha=alpha)


def _pair_distance(a, b) -> float:
    if isinstance(a, OrthonormalFrame) or isinstance(b, OrthonormalFrame):
        return subspace_distance(a, b)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def covering_number_estimate(sampler, epsilon: float, budget: int = 2000,
                             seed: int = 0) -> int:
    """Greedy net size over budget sampler draws: a lower covering estimate.

    sampler(seed) must return either an OrthonormalFrame (projector metric)
    or a plain array (Frobenius metric).  A draw is admitted as a new net
    center whenever it is at least epsilon away from all current centers.
    """
    child_seeds = np.random.SeedSequence(int(seed)).generate_state(budget, np.uint64)
    centers = []
    for s in child_seeds:
        cand = sampler(int(s))
        if all(_pair_distance(cand, c) >= epsilon for c in centers):
            centers.append(cand)
    return len(centers)


def tangent_sampler(cset: constraints.ConstraintSet, center: OrthonormalFrame):
    """Sampler over T(cset, center): normalized projector differences of
    random members, skipping draws aligned with the center."""
    def draw(seed):
        rng = constraints.as_generator(seed)
        for _ in range(64):
            w = constraints.random_member(cset, rng)
            dist = subspace_distance(w, center)
            if dist >= 1e-9:
                diff = w.values @ w.values.T - center.values @ center.values.T
                return diff / dist
        raise BudgetExhausted("could not draw a member away from the center")
    return draw


def _draw_tangent_stack(cset, center, budget, rng):
    """Stack of member frames defining tangent elements, with their center
    overlaps and projector-difference norms."""
    u = center.values
    proj = u @ u.T
    frames, overlaps, norms = [], [], []
    for _ in range(budget):
        w = constraints.random_member(cset, rng)
        cross = w.values.T @ u
        captured = float(np.sum(cross * cross))
        # the norm must come from the projector difference itself: the Gram
        # form sqrt(2(r - captured)) rounds to ~1e-8 on draws equal to the
        # center, which would defeat the skip rule below
        norm = float(np.linalg.norm(w.values @ w.values.T - proj))
        if norm < 1e-9:
            continue
        frames.append(w.values)
        overlaps.append(captured)
        norms.append(norm)
    if not frames:
        return None
    return np.stack(frames), np.asarray(overlaps), np.asarray(norms)


def _tangent_distance_rows(stack, overlaps, norms, idx):
    """Frobenius distances from tangent element idx to every element."""
    w = stack[idx]
    cross = np.einsum("bpr,ps->brs", stack, w, optimize=True)
    inner = np.sum(cross * cross, axis=(1, 2))
    r = stack.shape[2]
    numer = inner - overlaps - overlaps[idx] + r
    sq = 2.0 - 2.0 * numer / (norms * norms[idx])
    return np.sqrt(np.clip(sq, 0.0, None))


def dudley_estimate(cset: constraints.ConstraintSet, center: OrthonormalFrame,
                    epsilon_grid=None, budget: int = 4000,
                    seed: int = 0) -> EntropyEstimate:
    """Entropy integrals of T(cset, center) from nested greedy nets.

    Covering counts are computed on one fixed stream of random members,
    sweeping the grid from its largest scale down and growing each net out of
    the previous one, which makes the counts non-increasing in epsilon by
    construction.  Both integrals use the trapezoid rule on the grid; a
    singleton tangent set (or none at all) gives zero.
    """
    if epsilon_grid is None:
        epsilon_grid = np.geomspace(0.01, math.sqrt(2.0), 24)
    grid = np.asarray(sorted(float(e) for e in epsilon_grid))
    if grid.size < 2 or grid[0] <= 0:
        raise ValueError("need an increasing positive epsilon grid")
    rng = constraints.as_generator(seed)
    drawn = _draw_tangent_stack(cset, center, budget, rng)
    counts = np.zeros(grid.size, dtype=np.int64)
    if drawn is not None:
        stack, overlaps, norms = drawn
        b = stack.shape[0]
        min_dist = np.full(b, np.inf)
        is_center = np.zeros(b, dtype=bool)
        for level in range(grid.size - 1, -1, -1):
            eps = grid[level]
            while True:
                eligible = np.nonzero(~is_center & (min_dist >= eps))[0]
                if eligible.size == 0:
                    break
                j = int(eligible[0])
                is_center[j] = True
                rows = _tangent_distance_rows(stack, overlaps, norms, j)
                np.minimum(min_dist, rows, out=min_dist)
            counts[level] = int(np.count_nonzero(is_center))
    logs = np.where(counts > 0, np.log(np.maximum(counts, 1)), 0.0)
    roots = np.sqrt(logs)
    dudley_value = float(np.trapezoid(roots, grid))
    dudley_prime = float(np.trapezoid(logs, grid))
    return EntropyEstimate(epsilons=tuple(grid), log_covering=tuple(logs),
                           dudley_value=dudley_value, dudley_prime=dudley_prime,
                           budget=budget)
