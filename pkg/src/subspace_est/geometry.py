"""Frame geometry: orthonormal frames, projector distance, Procrustes alignment.

The distance between two frames U1, U2 with orthonormal columns is the
Frobenius norm of the difference of their column-space projectors,

    dist(U1, U2) = || U1 U1' - U2 U2' ||_F = sqrt(2 (r - ||U1' U2||_F^2)),

computed here through the r x r Gram matrix rather than the p x p projectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficient

# entrywise tolerance on U'U - I for a frame to count as orthonormal
FRAME_TOL = 1e-10

# relative singular-value floor below which a matrix is treated as rank deficient
_RANK_TOL = 1e-12


@dataclass
class OrthonormalFrame:
    """A p x r matrix whose columns are orthonormal within FRAME_TOL."""

    values: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.values, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        if m.ndim != 2:
            raise DimensionMismatch(f"expected a matrix, got array of shape {m.shape}")
        p, r = m.shape
        if r < 1 or p < r:
            raise DimensionMismatch(f"need p >= r >= 1, got shape {p} x {r}")
        gram = m.T @ m
        err = np.max(np.abs(gram - np.eye(r)))
        if err > FRAME_TOL:
            raise ValueError(f"columns are not orthonormal: max |U'U - I| = {err:.3e}")
        self.values = m

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "OrthonormalFrame":
        return OrthonormalFrame(self.values.copy())


@dataclass(frozen=True)
class SpectrumSpec:
    """Ordered signal singular values with a scale t and conditioning bound L.

    Invariants: values[0] >= ... >= values[-1] > 0, L > 1, and the whole
    spectrum lives in [t / L, L t].
    """

    values: tuple
    scale: float
    conditioning: float = 2.0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        t, big_l = self.scale, self.conditioning
        if len(vals) == 0:
            raise DimensionMismatch("spectrum must have at least one value")
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise ValueError("spectrum values must be non-increasing")
        if vals[-1] <= 0:
            raise ValueError("spectrum values must be positive")
        if not big_l > 1:
            raise ValueError("conditioning bound must exceed 1")
        if vals[0] > big_l * t or vals[-1] < t / big_l:
            raise ValueError("spectrum must lie within [t/L, L*t]")

    @property
    def rank(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @classmethod
    def flat(cls, scale: float, rank: int, conditioning: float = 2.0) -> "SpectrumSpec":
        return cls(values=(float(scale),) * rank, scale=float(scale),
                   conditioning=conditioning)


def _as_matrix(u) -> np.ndarray:
    if isinstance(u, OrthonormalFrame):
        return u.values
    m = np.asarray(u, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    return m


def orthonormalize(m) -> OrthonormalFrame:
    """Thin QR factor of m with the sign convention diag(R) >= 0.

    Raises RankDeficient when the smallest singular value falls at or below
    1e-12 times the largest.  The sign convention makes the output unique, and
    an input that is already orthonormal with a positive-diagonal triangular
    factor comes back unchanged.
    """
    m = _as_matrix(m)
    if m.shape[0] < m.shape[1]:
        raise DimensionMismatch(f"need p >= r, got shape {m.shape}")
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= _RANK_TOL * sv[0]:
        raise RankDeficient("matrix has (numerically) dependent columns")
    q, rfac = np.linalg.qr(m)
    signs = np.sign(np.diag(rfac))
    signs[signs == 0] = 1.0
    return OrthonormalFrame(q * signs)


def subspace_distance(u1, u2) -> float:
    """Projector distance between two frames of equal shape, in [0, sqrt(2r)].

    Computed as the Frobenius norm of the projector difference rather than
    through the Gram identity 2(r - |U1'U2|_F^2): the identity loses half the
    significant digits near zero, where exact-match tests live.
    """
    a, b = _as_matrix(u1), _as_matrix(u2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"frame shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a @ a.T - b @ b.T))


def procrustes_align(u1, u2):
    """Best rotation O of u2 onto u1 and the aligned residual.

    Returns (rotation, residual) where rotation minimizes ||u1 - u2 O||_F over
    r x r orthogonal matrices and residual is that minimum.  The residual and
    the projector distance d satisfy d / sqrt(2) <= residual <= d.
    """
    a, b = _as_matrix(u1), _as_matrix(u2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"frame shapes differ: {a.shape} vs {b.shape}")
    w, _, vt = np.linalg.svd(b.T @ a)
    rotation = w @ vt
    residual = float(np.linalg.norm(a - b @ rotation))
    return rotation, residual


def projection_matrix(u) -> np.ndarray:
    """The p x p orthogonal projector U U' onto the column space of u."""
    m = _as_matrix(u)
    return m @ m.T


def quadratic_form_gap(u, spectrum: SpectrumSpec, w, mode: str = "squared",
                       noise_var: float = 0.0) -> float:
    """Trace inner product of a spectral form of u against the projector gap.

    mode "squared" gives < U G^2 U', U U' - W W' > for G = diag(spectrum),
    mode "linear" replaces G^2 by G, and mode "shifted" adds noise_var * I to
    the linear form.  Since the projector gap is trace-free the shift
    contributes nothing beyond rounding; it is kept explicit so that tests can
    confirm the cancellation.  The squared mode is sandwiched between
    (lambda_r^2 / 2) d^2 and (lambda_1^2 / 2) d^2 with d the projector
    distance, and the linear and shifted modes likewise with lambda / 2
    factors.
    """
    a, b = _as_matrix(u), _as_matrix(w)
    if a.shape != b.shape:
        raise DimensionMismatch(f"frame shapes differ: {a.shape} vs {b.shape}")
    if a.shape[1] != spectrum.rank:
        raise DimensionMismatch("spectrum rank does not match frame width")
    lam = spectrum.array
    if mode == "squared":
        weights = lam * lam
    elif mode in ("linear", "shifted"):
        weights = lam
    else:
        raise ValueError(f"unknown mode {mode!r}")
    cross = a.T @ b
    captured = np.sum(cross * cross, axis=1)  # diag of (U'W)(U'W)'
    value = float(np.sum(weights * (1.0 - captured)))
    if mode == "shifted":
        # exactly zero in theory: tr(UU' - WW') = r - r
        value += noise_var * (float(np.trace(a.T @ a)) - float(np.trace(b.T @ b)))
    return value
