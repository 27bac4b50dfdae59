"""Constraint sets for frames: sparsity, non-negativity, subspace, sign vectors.

Each set lives inside the orthonormal p x r frames.  `project` maps an
arbitrary frame (or matrix) to a member, `contains` tests membership, and
`random_member` draws a member for Monte Carlo work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, RankDeficient
from .geometry import OrthonormalFrame, orthonormalize

SPARSE = "sparse"
NONNEG = "nonneg"
SUBSPACE = "subspace"
SIGNS = "signs"
UNCONSTRAINED = "none"

_KINDS = (SPARSE, NONNEG, SUBSPACE, SIGNS, UNCONSTRAINED)

# rounds and movement threshold for the alternating non-negative projection
_NN_ROUNDS = 50
_NN_MOVE_TOL = 1e-10


@dataclass(frozen=True)
class ConstraintSet:
    """A constraint on p x r orthonormal frames.

    kind is one of "sparse" (each column has at most k nonzero entries),
    "nonneg" (all entries >= 0), "subspace" (columns lie in the span of a
    stored p x k basis), "signs" (r = 1, entries all +-1/sqrt(p)), or "none".
    """

    kind: str
    p: int
    r: int
    k: int | None = None
    basis: OrthonormalFrame | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.r < 1 or self.p < self.r:
            raise DimensionMismatch(f"need p >= r >= 1, got p={self.p} r={self.r}")
        if self.kind == SPARSE:
            if self.k is None or not (self.r <= self.k <= self.p):
                raise ValueError(f"sparse needs r <= k <= p, got k={self.k}")
        if self.kind == SUBSPACE:
            if self.basis is None:
                raise ValueError("subspace constraint needs a basis")
            k = self.basis.r
            if self.basis.p != self.p or not (self.r < k < self.p):
                raise ValueError(
                    f"subspace basis must be p x k with r < k < p, got {self.basis.p} x {k}")
            object.__setattr__(self, "k", k)
        if self.kind == SIGNS and self.r != 1:
            raise ValueError("sign-vector constraint requires r = 1")


def sparse(p: int, r: int, k: int) -> ConstraintSet:
    return ConstraintSet(SPARSE, p, r, k=k)


def nonneg(p: int, r: int) -> ConstraintSet:
    return ConstraintSet(NONNEG, p, r)


def subspace(basis: OrthonormalFrame, r: int) -> ConstraintSet:
    return ConstraintSet(SUBSPACE, basis.p, r, basis=basis)


def signs(n: int) -> ConstraintSet:
    return ConstraintSet(SIGNS, n, 1)


def unconstrained(p: int, r: int) -> ConstraintSet:
    return ConstraintSet(UNCONSTRAINED, p, r)


def _as_matrix(u) -> np.ndarray:
    if isinstance(u, OrthonormalFrame):
        return u.values
    m = np.asarray(u, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    return m


def contains(cset: ConstraintSet, frame: OrthonormalFrame, tol: float = 1e-8) -> bool:
    """Membership test at entrywise tolerance tol (frame must be orthonormal)."""
    if frame.p != cset.p or frame.r != cset.r:
        raise DimensionMismatch(
            f"frame is {frame.p} x {frame.r}, constraint ambient is {cset.p} x {cset.r}")
    m = frame.values
    if cset.kind == UNCONSTRAINED:
        return True
    if cset.kind == SPARSE:
        return bool(np.all(np.sum(np.abs(m) > tol, axis=0) <= cset.k))
    if cset.kind == NONNEG:
        return bool(np.min(m) >= -tol)
    if cset.kind == SUBSPACE:
        q = cset.basis.values
        return bool(np.max(np.abs(m - q @ (q.T @ m))) <= tol)
    # signs
    return bool(np.max(np.abs(np.abs(m) - 1.0 / np.sqrt(cset.p))) <= tol)


def _polar_factor(m: np.ndarray) -> np.ndarray:
    w, _, vt = np.linalg.svd(m, full_matrices=False)
    return w @ vt


def _project_nonneg_rank_one(col: np.ndarray) -> np.ndarray:
    clipped = np.clip(col, 0.0, None)
    norm = np.linalg.norm(clipped)
    if norm <= 0.0:
        out = np.zeros_like(col)
        out[int(np.argmax(col))] = 1.0
        return out
    return clipped / norm


def _disjoint_support_cleanup(w: np.ndarray, original: np.ndarray) -> np.ndarray:
    """Force row-disjoint column supports, then give every column unit norm."""
    p, r = w.shape
    keep = np.zeros_like(w)
    owner = np.argmax(w, axis=1)
    rows = np.arange(p)
    keep[rows, owner] = w[rows, owner]
    for j in range(r):
        if np.linalg.norm(keep[:, j]) > 0.0:
            continue
        free = np.where(np.all(keep == 0.0, axis=1))[0]
        if free.size == 0:
            # steal the weakest row of the most populated column
            counts = np.sum(keep > 0.0, axis=0)
            donor = int(np.argmax(counts))
            if counts[donor] < 2:
                raise DegenerateInput("cannot build disjoint non-negative supports")
            cand = np.where(keep[:, donor] > 0.0)[0]
            row = cand[int(np.argmin(keep[cand, donor]))]
            keep[row, donor] = 0.0
        else:
            row = free[int(np.argmax(original[free, j]))]
        keep[row, j] = 1.0
    norms = np.linalg.norm(keep, axis=0)
    return keep / norms


def _project_nonneg(m: np.ndarray) -> np.ndarray:
    p, r = m.shape
    if r == 1:
        return _project_nonneg_rank_one(m[:, 0])
    u = m.copy()
    for _ in range(_NN_ROUNDS):
        clipped = np.clip(u, 0.0, None)
        if np.all(np.linalg.svd(clipped, compute_uv=False) < 1e-12):
            break
        nxt = _polar_factor(clipped)
        if np.linalg.norm(nxt - u) < _NN_MOVE_TOL:
            u = nxt
            break
        u = nxt
    w = np.clip(u, 0.0, None)
    norms = np.linalg.norm(w, axis=0)
    if np.all(norms > 1e-12):
        cand = w / norms
        if np.max(np.abs(cand.T @ cand - np.eye(r))) <= 1e-12:
            return cand
    return _disjoint_support_cleanup(w, m)


def project(cset: ConstraintSet, u) -> OrthonormalFrame:
    """Map a frame or matrix to a member of the constraint set.

    Rules per kind: "signs" takes entrywise signs (with sign(0) := +1) over
    sqrt(p); "subspace" re-orthonormalizes the basis-plane projection;
    "none" re-orthonormalizes; "sparse" keeps the k rows of largest Euclidean
    norm (a shared-support reduction) and re-orthonormalizes the surviving
    block; "nonneg" clips negatives for r = 1, and for r > 1 alternates
    clipping with polar orthonormalization before a final feasibility pass.
    """
    m = _as_matrix(u)
    if m.shape != (cset.p, cset.r):
        raise DimensionMismatch(
            f"input is {m.shape[0]} x {m.shape[1]}, constraint ambient is {cset.p} x {cset.r}")
    if cset.kind == SIGNS:
        s = np.where(m[:, 0] >= 0.0, 1.0, -1.0)
        return OrthonormalFrame(s[:, None] / np.sqrt(cset.p))
    try:
        if cset.kind == UNCONSTRAINED:
            return orthonormalize(m)
        if cset.kind == SUBSPACE:
            q = cset.basis.values
            return orthonormalize(q @ (q.T @ m))
        if cset.kind == SPARSE:
            norms = np.linalg.norm(m, axis=1)
            order = np.argsort(-norms, kind="stable")
            keep = np.sort(order[: cset.k])
            block = orthonormalize(m[keep, :])
            out = np.zeros_like(m)
            out[keep, :] = block.values
            return OrthonormalFrame(out)
    except RankDeficient as exc:
        raise DegenerateInput(str(exc)) from exc
    return OrthonormalFrame(_project_nonneg(m))


def null_space_basis(a) -> OrthonormalFrame:
    """Orthonormal basis of the orthogonal complement of the columns of a.

    For a p x (p - k) matrix of full column rank this returns a p x k frame Q
    with a' Q = 0 entrywise below 1e-9.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] <= a.shape[1]:
        raise DimensionMismatch(f"need a tall matrix, got shape {a.shape}")
    w, sv, _ = np.linalg.svd(a, full_matrices=True)
    if sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficient("columns of a are numerically dependent")
    return OrthonormalFrame(w[:, a.shape[1]:])


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed or a Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def _haar(p: int, r: int, rng: np.random.Generator) -> OrthonormalFrame:
    return orthonormalize(rng.standard_normal((p, r)))


def random_member(cset: ConstraintSet, seed) -> OrthonormalFrame:
    """Draw a member: Haar where the set is rotation invariant, else a
    natural seeded surrogate (uniform support, clipped Gaussians, fair signs)."""
    rng = as_generator(seed)
    p, r = cset.p, cset.r
    if cset.kind == UNCONSTRAINED:
        return _haar(p, r, rng)
    if cset.kind == SUBSPACE:
        inner = _haar(cset.basis.r, r, rng)
        return OrthonormalFrame(cset.basis.values @ inner.values)
    if cset.kind == SPARSE:
        support = np.sort(rng.choice(p, size=cset.k, replace=False))
        block = _haar(cset.k, r, rng)
        out = np.zeros((p, r))
        out[support, :] = block.values
        return OrthonormalFrame(out)
    if cset.kind == SIGNS:
        s = rng.integers(0, 2, size=p) * 2.0 - 1.0
        return OrthonormalFrame(s[:, None] / np.sqrt(p))
    draw = np.abs(rng.standard_normal((p, r)))
    if r == 1:
        return OrthonormalFrame(draw / np.linalg.norm(draw))
    return project(cset, draw)


def parse_constraint(text: str, p: int, r: int) -> ConstraintSet:
    """Parse a constraint string: "sparse:k=10", "nonneg", "subspace:qfile=PATH",
    "signs", or "none"."""
    from .matio import read_matrix

    head, _, rest = text.partition(":")
    head = head.strip()
    if head == UNCONSTRAINED:
        return unconstrained(p, r)
    if head == NONNEG:
        return nonneg(p, r)
    if head == SIGNS:
        return signs(p)
    if head == SPARSE:
        key, _, val = rest.partition("=")
        if key.strip() != "k":
            raise ValueError(f"sparse constraint needs k=<int>, got {text!r}")
        return sparse(p, r, int(val))
    if head == SUBSPACE:
        key, _, val = rest.partition("=")
        if key.strip() != "qfile":
            raise ValueError(f"subspace constraint needs qfile=<path>, got {text!r}")
        basis = OrthonormalFrame(read_matrix(val.strip()))
        return subspace(basis, r)
    raise ValueError(f"unknown constraint {text!r}")
