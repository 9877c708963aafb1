"""Finite-dimensional C*-algebras as *-closed subalgebras of a matrix algebra.

An algebra is carried by an orthonormal basis under the normalized trace
inner product <x, y> = tr(x* y) / n of the ambient M_n. Structure theory
(centers, minimal central projections, irreducible block data, projection
equivalence) is computed by plain linear algebra on that basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checks import CheckReport
from .errors import (
    NonIntegralRank,
    NotInAlgebra,
    NotProjection,
    NotSubalgebra,
)
from .matkernel import (
    CMat,
    DEFAULT_TOL,
    Tol,
    adjoint,
    asmatrix,
    eye,
    fro,
    hermitian_eig,
    polar_partial_isometry,
    rank_tol,
)

# ---------------------------------------------------------------------------
# span utilities (normalized-trace geometry)
# ---------------------------------------------------------------------------


def _span_threshold(s: np.ndarray, tol: Tol) -> float:
    # absolute floor keeps numerically-zero families rank 0
    if s.size == 0:
        return 0.0
    return tol.abs_eps * max(float(s[0]), 1.0)


def orthonormalize(mats, n: int, tol: Tol = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (k, n, n) of the span of ``mats`` under tr(x*y)/n."""
    arr = np.asarray(mats, dtype=complex)
    if arr.size == 0:
        return np.zeros((0, n, n), dtype=complex)
    rows = arr.reshape(len(arr), n * n) / np.sqrt(n)
    _, s, vh = np.linalg.svd(rows, full_matrices=False)
    r = int(np.sum(s > _span_threshold(s, tol)))
    return (vh[:r] * np.sqrt(n)).reshape(r, n, n)


def nullspace_mats(system: np.ndarray, basis: np.ndarray, tol: Tol) -> np.ndarray:
    """Matrices Σ c_k basis_k with system @ c = 0, orthonormalized."""
    if system.shape[1] == 0:
        return np.zeros((0,) + basis.shape[1:], dtype=complex)
    _, s, vh = np.linalg.svd(system, full_matrices=True)
    thr = _span_threshold(s, tol) if s.size else 0.0
    r = int(np.sum(s > thr))
    null = vh[r:].conj()
    mats = np.einsum("ck,kij->cij", null, basis)
    return orthonormalize(mats, basis.shape[1], tol)


# ---------------------------------------------------------------------------
# the algebra carrier
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CStarAlg:
    """A *-closed, multiplicatively closed unital subspace of M_n.

    basis is orthonormal under tr(x*y)/n; unit is the identity of the
    algebra (the ambient identity for inclusions with a common unit, a
    projection for corner algebras).
    """

    ambient_dim: int
    basis: np.ndarray  # (dim, n, n)
    unit: CMat

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def n(self) -> int:
        return self.ambient_dim

    def _vecs(self) -> np.ndarray:
        return self.basis.reshape(self.dim, self.n * self.n)

    def coords(self, m: CMat) -> np.ndarray:
        """Coefficients of the orthogonal projection of m onto the span."""
        return self._vecs().conj() @ np.asarray(m, dtype=complex).ravel() / self.n

    def coords_many(self, mats: np.ndarray) -> np.ndarray:
        flat = np.asarray(mats, dtype=complex).reshape(len(mats), self.n * self.n)
        return flat @ self._vecs().conj().T / self.n

    def from_coords(self, c: np.ndarray) -> CMat:
        return np.einsum("k,kij->ij", np.asarray(c, dtype=complex), self.basis)

    def project(self, m: CMat) -> tuple[CMat, float]:
        p = self.from_coords(self.coords(m))
        return p, fro(np.asarray(m) - p)

    def contains(self, m: CMat, tol: Tol = DEFAULT_TOL) -> bool:
        _, r = self.project(m)
        return r <= tol.abs_eps + tol.rel_eps * fro(m)

    def multiplication_residual(self) -> float:
        """Max residual of basis products and adjoints re-projected into the span."""
        prods = np.einsum("aij,bjk->abik", self.basis, self.basis).reshape(-1, self.n, self.n)
        stars = np.conj(np.transpose(self.basis, (0, 2, 1)))
        worst = 0.0
        for fam in (prods, stars):
            coeffs = self.coords_many(fam)
            recon = np.einsum("ck,kij->cij", coeffs, self.basis)
            worst = max(worst, float(np.max(np.abs(fam - recon))) * self.n)
        return worst

    def to_json(self) -> dict:
        from .matkernel import mat_to_json

        return {
            "ambient_dim": self.ambient_dim,
            "basis": [mat_to_json(b) for b in self.basis],
        }


def _find_unit(basis: np.ndarray, n: int, tol: Tol) -> CMat:
    """Solve for the two-sided identity of the spanned algebra."""
    dim = len(basis)
    # columns over j: stacked vec(b_j b_i) and vec(b_i b_j) for all i
    cols = []
    for j in range(dim):
        prod_r = np.einsum("ab,ibc->iac", basis[j], basis)  # b_j b_i
        prod_l = np.einsum("iab,bc->iac", basis, basis[j])  # b_i b_j
        cols.append(np.concatenate([prod_r.ravel(), prod_l.ravel()]))
    system = np.stack(cols, axis=1)
    rhs = np.concatenate([basis.ravel(), basis.ravel()])
    c, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    u = np.einsum("k,kij->ij", c, basis)
    resid = max(
        max(fro(u @ b - b) for b in basis),
        max(fro(b @ u - b) for b in basis),
        fro(u - adjoint(u)),
    )
    if resid > 1e-6 * max(1.0, fro(u)):
        raise ValueError(f"span has no two-sided unit (residual {resid:.3e})")
    return u


def algebra_from_span(
    ambient_dim: int,
    mats,
    tol: Tol = DEFAULT_TOL,
    unit: CMat | None = None,
    check_closed: bool = True,
) -> CStarAlg:
    """Wrap an already multiplicatively closed *-closed span as a CStarAlg."""
    basis = orthonormalize(mats, ambient_dim, tol)
    if unit is None:
        unit = _find_unit(basis, ambient_dim, tol)
    alg = CStarAlg(ambient_dim, basis, asmatrix(unit))
    if check_closed:
        resid = alg.multiplication_residual()
        if resid > 100 * tol.abs_eps:
            raise ValueError(f"span is not a *-closed algebra (closure residual {resid:.3e})")
    return alg


def generate_algebra(ambient_dim: int, generators, tol: Tol = DEFAULT_TOL) -> CStarAlg:
    """Smallest unital *-closed multiplicatively closed subspace containing
    the generators, with an orthonormalized basis."""
    n = ambient_dim
    seed = [eye(n)]
    for g in generators:
        g = asmatrix(g)
        if g.shape != (n, n):
            raise ValueError(f"generator has shape {g.shape}, expected {(n, n)}")
        seed.append(g)
        seed.append(adjoint(g))
    basis = orthonormalize(seed, n, tol)
    for _ in range(n * n + 1):
        prods = np.einsum("aij,bjk->abik", basis, basis).reshape(-1, n, n)
        new_basis = orthonormalize(np.concatenate([basis, prods]), n, tol)
        if len(new_basis) == len(basis):
            basis = new_basis
            break
        basis = new_basis
    return CStarAlg(n, basis, eye(n))


def full_matrix_algebra(n: int, tol: Tol = DEFAULT_TOL) -> CStarAlg:
    units = np.zeros((n * n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            units[i * n + j, i, j] = 1.0
    return algebra_from_span(n, units, tol, unit=eye(n), check_closed=False)


def diagonal_algebra(n: int, tol: Tol = DEFAULT_TOL) -> CStarAlg:
    mats = [np.diag(row).astype(complex) for row in np.eye(n)]
    return algebra_from_span(n, mats, tol, unit=eye(n), check_closed=False)


def scalar_algebra(n: int, tol: Tol = DEFAULT_TOL) -> CStarAlg:
    return algebra_from_span(n, [eye(n)], tol, unit=eye(n), check_closed=False)


# ---------------------------------------------------------------------------
# linear maps between matrix spaces
# ---------------------------------------------------------------------------


class LinearMap:
    """Linear map determined by images of an orthonormal source basis.

    The source basis is orthonormal under the normalized trace of its
    ambient, so applying the map is projection onto the span followed by
    recombination of images.
    """

    def __init__(self, source_basis: np.ndarray, images: np.ndarray):
        self.source_basis = np.asarray(source_basis, dtype=complex)
        self.images = np.asarray(images, dtype=complex)
        if len(self.source_basis) != len(self.images):
            raise ValueError("basis/image count mismatch")
        self.n_in = self.source_basis.shape[1]
        self.n_out = self.images.shape[1] if len(self.images) else self.n_in

    @classmethod
    def from_callable(cls, source_basis: np.ndarray, fn) -> "LinearMap":
        images = np.stack([asmatrix(fn(b)) for b in source_basis]) if len(source_basis) else np.zeros((0, 1, 1), complex)
        return cls(source_basis, images)

    def source_coords(self, x: CMat) -> np.ndarray:
        flat = self.source_basis.reshape(len(self.source_basis), -1)
        return flat.conj() @ np.asarray(x, dtype=complex).ravel() / self.n_in

    def membership_residual(self, x: CMat) -> float:
        c = self.source_coords(x)
        recon = np.einsum("k,kij->ij", c, self.source_basis)
        return fro(np.asarray(x) - recon)

    def apply(self, x: CMat) -> CMat:
        return np.einsum("k,kij->ij", self.source_coords(x), self.images)

    def apply_checked(self, x: CMat, tol: Tol, err=NotInAlgebra) -> CMat:
        r = self.membership_residual(x)
        if r > tol.abs_eps + tol.rel_eps * fro(x):
            raise err(f"argument lies outside the domain span (residual {r:.3e})")
        return self.apply(x)

    def endo_matrix(self) -> np.ndarray:
        """Matrix of the map in source coordinates (requires images in the span)."""
        flat = self.source_basis.reshape(len(self.source_basis), -1)
        img = self.images.reshape(len(self.images), -1)
        return (flat.conj() @ img.T / self.n_in)

    def compose(self, inner: "LinearMap") -> "LinearMap":
        images = np.stack([self.apply(m) for m in inner.images])
        return LinearMap(inner.source_basis, images)


def star_homomorphism_report(
    phi: LinearMap,
    source: CStarAlg,
    target: CStarAlg,
    tol: Tol,
    title: str = "star homomorphism",
    unit_image: CMat | None = None,
    expect_bijective: bool = True,
) -> CheckReport:
    """Multiplicativity, *-preservation, unit and injectivity residuals for phi."""
    rep = CheckReport(title)
    b = source.basis
    imgs = phi.images
    prod_res = 0.0
    for i in range(source.dim):
        lhs = np.stack([phi.apply(b[i] @ b[j]) for j in range(source.dim)])
        rhs = np.einsum("ab,jbc->jac", imgs[i], imgs)
        prod_res = max(prod_res, float(np.max(np.sqrt(np.sum(np.abs(lhs - rhs) ** 2, axis=(1, 2))))))
    rep.add("multiplicative", "phi(x y) = phi(x) phi(y)", prod_res, 200 * tol.abs_eps)
    star_res = max(fro(phi.apply(adjoint(b[i])) - adjoint(imgs[i])) for i in range(source.dim))
    rep.add("star", "phi(x*) = phi(x)*", star_res, 200 * tol.abs_eps)
    uimg = target.unit if unit_image is None else unit_image
    rep.add("unit", "phi(1) = 1", fro(phi.apply(source.unit) - uimg), 200 * tol.abs_eps)
    member_res = max(target.project(m)[1] for m in imgs)
    rep.add("range", "phi(source) contained in target", member_res, 200 * tol.abs_eps)
    if expect_bijective:
        flat = imgs.reshape(source.dim, -1)
        s = np.linalg.svd(flat, compute_uv=False)
        rank = int(np.sum(s > _span_threshold(s, tol)))
        rep.add_bool("injective", "phi has trivial kernel", rank == source.dim)
    return rep


# ---------------------------------------------------------------------------
# spec operations
# ---------------------------------------------------------------------------


def project_member(alg: CStarAlg, m: CMat, tol: Tol = DEFAULT_TOL):
    """Orthogonal projection of m onto the algebra span under the trace
    inner product; member iff the residual is within tolerance."""
    m = asmatrix(m)
    proj, residual = alg.project(m)
    member = residual <= tol.abs_eps + tol.rel_eps * fro(m)
    return member, proj, residual


def commutant(alg: CStarAlg, within: CStarAlg, tol: Tol = DEFAULT_TOL) -> CStarAlg:
    """{x in `within` : x a = a x for all a in alg}, solved as a linear system."""
    if alg.ambient_dim != within.ambient_dim:
        raise NotSubalgebra("algebras live in different ambient dimensions")
    for b in alg.basis:
        if not within.contains(b, tol):
            raise NotSubalgebra("first algebra is not contained in the second")
    n = alg.n
    cols = []
    for k in range(within.dim):
        w = within.basis[k]
        comm = np.einsum("ab,ibc->iac", w, alg.basis) - np.einsum("iab,bc->iac", alg.basis, w)
        cols.append(comm.ravel())
    system = np.stack(cols, axis=1)
    mats = nullspace_mats(system, within.basis, tol)
    return CStarAlg(n, mats, within.unit)


@dataclass(frozen=True)
class BlockStructure:
    """Wedderburn data: minimal central projections, matrix sizes of the
    simple summands, and their multiplicities in the ambient representation."""

    central_projections: np.ndarray  # (k, n, n)
    block_sizes: list[int]
    multiplicities: list[int]

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)


def _round_int(x: float, what: str, slack: float = 1e-3) -> int:
    r = round(x)
    if abs(x - r) > slack:
        raise NonIntegralRank(f"{what} = {x:.6f} is not within {slack} of an integer")
    return int(r)


def block_structure(alg: CStarAlg, tol: Tol = DEFAULT_TOL) -> BlockStructure:
    """Diagonalize a generic self-adjoint central element and group its
    eigenvalues into minimal central projections; derive block sizes and
    multiplicities from compressed spans and ranks."""
    center = commutant(alg, alg, tol)
    herm = []
    for c in center.basis:
        herm.append((c + adjoint(c)) / 2.0)
        herm.append((c - adjoint(c)) / 2.0j)
    herm = [h for h in herm if fro(h) > tol.abs_eps]
    last_error: Exception | None = None
    for attempt in range(6):
        rng = tol.rng(101, attempt)
        zeta = sum(rng.standard_normal() * h for h in herm)
        vals, vecs = hermitian_eig(zeta, tol)
        gap = 1e-6 * max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
        groups: list[list[int]] = [[0]]
        for i in range(1, len(vals)):
            if vals[i - 1] - vals[i] > gap:
                groups.append([i])
            else:
                groups[-1].append(i)
        try:
            projections, sizes, mults = [], [], []
            for g in groups:
                v = vecs[:, g]
                p = v @ adjoint(v)
                if not alg.contains(p, tol):
                    raise NonIntegralRank("spectral projection escaped the algebra")
                compressed = np.einsum("ab,kbc,cd->kad", p, alg.basis, p)
                blk_dim = len(orthonormalize(compressed, alg.n, tol))
                nk = _round_int(np.sqrt(blk_dim), "sqrt(block dimension)")
                mk = _round_int(rank_tol(p, tol) / nk, "multiplicity")
                projections.append(p)
                sizes.append(nk)
                mults.append(mk)
            if sum(x * x for x in sizes) != alg.dim:
                raise NonIntegralRank("block dimensions do not add up to dim(alg)")
            if sum(n_ * m_ for n_, m_ in zip(sizes, mults)) != rank_tol(alg.unit, tol):
                raise NonIntegralRank("block ranks do not add up to rank(unit)")
            return BlockStructure(np.stack(projections), sizes, mults)
        except NonIntegralRank as exc:  # regroup with a fresh central element
            last_error = exc
    raise NonIntegralRank(f"block structure did not stabilize: {last_error}")


def _check_projection(alg: CStarAlg, p: CMat, tol: Tol, name: str = "p") -> None:
    p = asmatrix(p)
    if not alg.contains(p, tol):
        raise NotProjection(f"{name} is not a member of the algebra")
    if fro(p @ p - p) > 100 * tol.abs_eps or fro(p - adjoint(p)) > 100 * tol.abs_eps:
        raise NotProjection(f"{name} is not a self-adjoint idempotent")


def block_ranks(alg: CStarAlg, p: CMat, tol: Tol = DEFAULT_TOL, structure: BlockStructure | None = None) -> list[int]:
    """Rank of the projection p inside each irreducible summand."""
    _check_projection(alg, p, tol)
    bs = structure if structure is not None else block_structure(alg, tol)
    ranks = []
    for z, mk in zip(bs.central_projections, bs.multiplicities):
        r = rank_tol(z @ p, tol) / mk
        ranks.append(_round_int(r, "block rank"))
    return ranks


def mvn_equivalent(alg: CStarAlg, p: CMat, q: CMat, tol: Tol = DEFAULT_TOL):
    """Murray-von Neumann equivalence of projections, decided blockwise by
    irreducible-representation ranks; on success returns a partial-isometry
    witness v in the algebra with v*v = p and v v* = q."""
    _check_projection(alg, p, tol, "p")
    _check_projection(alg, q, tol, "q")
    bs = block_structure(alg, tol)
    rp = block_ranks(alg, p, tol, structure=bs)
    rq = block_ranks(alg, q, tol, structure=bs)
    if rp != rq:
        return False, None
    if fro(p) == 0.0:
        return True, np.zeros_like(asmatrix(p))
    for attempt in range(12):
        rng = tol.rng(202, attempt)
        coeffs = rng.standard_normal(alg.dim) + 1j * rng.standard_normal(alg.dim)
        g = alg.from_coords(coeffs)
        v = polar_partial_isometry(asmatrix(q) @ g @ asmatrix(p), tol)
        if (
            fro(adjoint(v) @ v - p) <= 1e-7
            and fro(v @ adjoint(v) - q) <= 1e-7
            and alg.contains(v, tol)
        ):
            return True, v
    raise NotProjection("failed to construct an equivalence witness from generic elements")
