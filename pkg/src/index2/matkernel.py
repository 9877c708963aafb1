"""Dense complex matrix arithmetic and the spectral/polar primitives.

Every other module consumes these. Matrices are plain ``numpy.ndarray``
values with ``complex128`` entries, row-major. All operations are pure;
tolerances travel in an explicit :class:`Tol` value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotPositiveDefinite, ParseError

CMat = np.ndarray


@dataclass(frozen=True)
class Tol:
    """Tolerance and determinism knobs shared by all numeric predicates.

    abs_eps / rel_eps enter norm comparisons, sample_count bounds randomized
    checks, rng_seed makes every sampled check reproducible.
    """

    abs_eps: float = 1e-9
    rel_eps: float = 1e-9
    sample_count: int = 64
    rng_seed: int = 7

    def __post_init__(self):
        if not (self.abs_eps > 0 and self.rel_eps > 0):
            raise ValueError("abs_eps and rel_eps must be positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")

    def rng(self, *salt: int) -> np.random.Generator:
        seeds = [int(self.rng_seed) & 0xFFFFFFFFFFFFFFFF, *[int(s) & 0xFFFFFFFF for s in salt]]
        return np.random.default_rng(seeds)

    def support_threshold(self, largest: float) -> float:
        """Cutoff for rank/support decisions: abs_eps * largest singular value, floored."""
        return self.abs_eps * max(float(largest), 1.0)

    def close(self, a: CMat, b: CMat) -> bool:
        return fro(np.asarray(a) - np.asarray(b)) <= self.abs_eps + self.rel_eps * max(fro(a), fro(b))


DEFAULT_TOL = Tol()


def asmatrix(m) -> CMat:
    """Coerce to a finite complex 2-d array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix entries must be finite")
    return a


def fro(m) -> float:
    return float(np.linalg.norm(np.asarray(m)))


def adjoint(m: CMat) -> CMat:
    """Conjugate transpose."""
    return np.conj(np.asarray(m)).T.copy()


def eye(n: int) -> CMat:
    return np.eye(n, dtype=complex)


def hermitian_eig(m: CMat, tol: Tol = DEFAULT_TOL):
    """Eigenvalues (real, descending) and orthonormal eigenvector columns of a
    self-adjoint matrix.

    Raises
    ------
    NotHermitian
        if ``m`` differs from its adjoint beyond tolerance.
    """
    m = asmatrix(m)
    gap = fro(m - adjoint(m))
    if gap > tol.abs_eps + tol.rel_eps * fro(m):
        raise NotHermitian(f"matrix is not self-adjoint (residual {gap:.3e})")
    h = (m + adjoint(m)) / 2.0
    vals, vecs = np.linalg.eigh(h)
    order = np.argsort(vals)[::-1]
    return vals[order].real, vecs[:, order]


def polar_partial_isometry(m: CMat, tol: Tol = DEFAULT_TOL) -> CMat:
    """Partial-isometry factor v of the polar decomposition m = v (m*m)^{1/2}.

    v*v is the support projection of m*m; singular directions below the
    support threshold are dropped.
    """
    m = asmatrix(m)
    if fro(m) == 0.0:
        return np.zeros_like(m)
    u, s, vh = np.linalg.svd(m)
    thr = tol.support_threshold(s[0])
    r = int(np.sum(s > thr))
    return u[:, :r] @ vh[:r, :]


def psd_inv_sqrt(m: CMat, tol: Tol = DEFAULT_TOL) -> CMat:
    """Inverse square root of a positive-definite self-adjoint matrix.

    Raises NotPositiveDefinite when the smallest eigenvalue sits at or below
    the support threshold.
    """
    vals, vecs = hermitian_eig(m, tol)
    thr = tol.support_threshold(np.max(np.abs(vals)) if vals.size else 0.0)
    if vals.size == 0 or vals[-1] <= thr:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {vals[-1] if vals.size else 0.0:.3e} below threshold {thr:.3e}"
        )
    s = (vecs * (1.0 / np.sqrt(vals))) @ adjoint(vecs)
    return (s + adjoint(s)) / 2.0


def rank_tol(m: CMat, tol: Tol = DEFAULT_TOL) -> int:
    """Number of singular values above the support threshold."""
    m = asmatrix(m)
    if fro(m) == 0.0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol.support_threshold(s[0])))


def support_projection(m: CMat, tol: Tol = DEFAULT_TOL) -> CMat:
    """Orthogonal projection onto the row space of m (support of m*m)."""
    m = asmatrix(m)
    if fro(m) == 0.0:
        return np.zeros((m.shape[1], m.shape[1]), dtype=complex)
    _, s, vh = np.linalg.svd(m)
    r = int(np.sum(s > tol.support_threshold(s[0])))
    return adjoint(vh[:r, :]) @ vh[:r, :]


# ---------------------------------------------------------------------------
# shared wire encoding: complex scalars as [re, im], matrices as row-major
# nested arrays of scalar pairs
# ---------------------------------------------------------------------------

def mat_to_json(m: CMat) -> list:
    m = asmatrix(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def mat_from_json(data, rows: int | None = None, cols: int | None = None) -> CMat:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ParseError("matrix must be a non-empty nested array")
    width = len(data[0])
    out = np.zeros((len(data), width), dtype=complex)
    for i, row in enumerate(data):
        if len(row) != width:
            raise ParseError("matrix rows have inconsistent lengths")
        for j, entry in enumerate(row):
            if isinstance(entry, (int, float)):
                out[i, j] = complex(entry)
            elif isinstance(entry, list) and len(entry) == 2:
                out[i, j] = complex(float(entry[0]), float(entry[1]))
            else:
                raise ParseError(f"bad scalar at ({i},{j}): {entry!r}")
    if rows is not None and out.shape[0] != rows:
        raise DimensionMismatch(f"expected {rows} rows, got {out.shape[0]}")
    if cols is not None and out.shape[1] != cols:
        raise DimensionMismatch(f"expected {cols} cols, got {out.shape[1]}")
    if not np.all(np.isfinite(out.view(float))):
        raise ParseError("matrix entries must be finite")
    return out
