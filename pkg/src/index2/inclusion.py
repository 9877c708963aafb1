"""Conditional expectations E: B -> A, quasi-bases, and the index-2 gate.

A quasi-basis for E is a finite family {(u_i, v_i)} with
b = sum_i u_i E(v_i b) = sum_i E(b u_i) v_i for all b; the Watatani index
is sum_i u_i v_i, a central element of B. Membership in the index-2 class
additionally requires the index to be the scalar 2 and the reflection
beta = 2E - id to be an order-2 automorphism with fixed algebra A.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .checks import CheckReport
from .cstar import CStarAlg, LinearMap, algebra_from_span, nullspace_mats
from .errors import (
    BetaNotAutomorphism,
    ExpectationInvalid,
    IndexInfinite,
    IndexNotTwo,
    NotAutomorphism,
    NotInvolutive,
    NotPartition,
)
from .matkernel import CMat, DEFAULT_TOL, Tol, adjoint, asmatrix, fro


@dataclass(frozen=True, eq=False)
class CondExp:
    """A linear map on B stored as a matrix in B's orthonormal basis, with a
    designated target subalgebra."""

    source: CStarAlg  # B
    target: CStarAlg  # A, a subalgebra of B
    action: np.ndarray  # (dim B, dim B) on B coordinates
    kind: str = "matrix"
    payload: dict = field(default_factory=dict)

    def apply(self, m: CMat) -> CMat:
        return self.source.from_coords(self.action @ self.source.coords(m))

    def apply_many(self, mats: np.ndarray) -> np.ndarray:
        coords = self.source.coords_many(mats)
        return np.einsum("ck,kij->cij", coords @ self.action.T, self.source.basis)

    def image_basis(self) -> np.ndarray:
        return np.einsum("jk,kab->jab", self.action.T, self.source.basis)


def _beta_images(B: CStarAlg, w_or_map, tol: Tol) -> np.ndarray:
    if callable(w_or_map):
        return np.stack([asmatrix(w_or_map(b)) for b in B.basis])
    if isinstance(w_or_map, LinearMap):
        return np.stack([w_or_map.apply(b) for b in B.basis])
    w = asmatrix(w_or_map)
    if w.shape != (B.n, B.n):
        raise NotAutomorphism(f"conjugating unitary has shape {w.shape}, expected {(B.n, B.n)}")
    if fro(w @ adjoint(w) - np.eye(B.n)) > 100 * tol.abs_eps:
        raise NotAutomorphism("conjugating matrix is not unitary")
    return np.einsum("ab,kbc,cd->kad", w, B.basis, adjoint(w))


def _automorphism_checks(B: CStarAlg, images: np.ndarray, tol: Tol, err) -> np.ndarray:
    """Verify images define a *-automorphism of B; return its coordinate matrix."""
    for img in images:
        if not B.contains(img, tol):
            raise err("map does not carry the algebra into itself")
    phi = LinearMap(B.basis, images)
    mat = phi.endo_matrix()
    mult = 0.0
    for i in range(B.dim):
        lhs = np.stack([phi.apply(B.basis[i] @ B.basis[j]) for j in range(B.dim)])
        rhs = np.einsum("ab,jbc->jac", images[i], images)
        mult = max(mult, float(np.max(np.abs(lhs - rhs))))
    star = max(fro(phi.apply(adjoint(B.basis[i])) - adjoint(images[i])) for i in range(B.dim))
    if mult > 100 * tol.abs_eps or star > 100 * tol.abs_eps:
        raise err(f"map is not a *-homomorphism (mult {mult:.2e}, star {star:.2e})")
    s = np.linalg.svd(mat, compute_uv=False)
    if s[-1] <= tol.support_threshold(s[0]):
        raise err("map is not invertible on the algebra")
    return mat


def expectation_from_involutive_automorphism(B: CStarAlg, w_or_map, tol: Tol = DEFAULT_TOL) -> CondExp:
    """E = (id + beta)/2 for an order-2 *-automorphism beta of B, onto the
    fixed-point algebra of beta."""
    images = _beta_images(B, w_or_map, tol)
    mat = _automorphism_checks(B, images, tol, NotAutomorphism)
    if fro(mat @ mat - np.eye(B.dim)) > 100 * tol.abs_eps:
        raise NotInvolutive("automorphism does not square to the identity")
    action = (np.eye(B.dim) + mat) / 2.0
    fixed = np.einsum("jk,kab->jab", action.T, B.basis)
    target = algebra_from_span(B.n, fixed, tol, unit=B.unit)
    payload = {}
    if not callable(w_or_map) and not isinstance(w_or_map, LinearMap):
        payload["unitary"] = asmatrix(w_or_map)
    return CondExp(B, target, action, kind="involution", payload=payload)


def expectation_from_block_compression(B: CStarAlg, projections, tol: Tol = DEFAULT_TOL) -> CondExp:
    """E(b) = sum_i p_i b p_i for mutually orthogonal projections in B summing
    to the unit; the target is the block-diagonal subalgebra."""
    projs = [asmatrix(p) for p in projections]
    for p in projs:
        if not B.contains(p, tol):
            raise NotPartition("projection is not a member of B")
        if fro(p @ p - p) > 100 * tol.abs_eps or fro(p - adjoint(p)) > 100 * tol.abs_eps:
            raise NotPartition("family member is not a self-adjoint idempotent")
    for i in range(len(projs)):
        for j in range(i + 1, len(projs)):
            if fro(projs[i] @ projs[j]) > 100 * tol.abs_eps:
                raise NotPartition("projections are not mutually orthogonal")
    total = sum(projs)
    if fro(total - B.unit) > 100 * tol.abs_eps:
        raise NotPartition("projections do not sum to the unit")
    images = np.stack([sum(p @ b @ p for p in projs) for b in B.basis])
    action = LinearMap(B.basis, images).endo_matrix()
    target = algebra_from_span(B.n, images, tol, unit=B.unit)
    return CondExp(B, target, action, kind="blocks", payload={"projections": projs})


def expectation_from_superoperator(
    B: CStarAlg, superop: np.ndarray, tol: Tol = DEFAULT_TOL, target: CStarAlg | None = None
) -> CondExp:
    """Build E from an ambient superoperator acting on row-major vec(b).

    No axioms are assumed; run validate_expectation to see which hold.
    """
    superop = np.asarray(superop, dtype=complex)
    n = B.n
    if superop.shape != (n * n, n * n):
        raise NotAutomorphism(f"superoperator must be {n * n} x {n * n}")
    images = np.stack([(superop @ b.ravel()).reshape(n, n) for b in B.basis])
    action = LinearMap(B.basis, images).endo_matrix()
    if target is None:
        target = algebra_from_span(B.n, images, tol, unit=None, check_closed=False)
    return CondExp(B, target, action, kind="matrix", payload={"superoperator": superop})


def validate_expectation(E: CondExp, tol: Tol = DEFAULT_TOL) -> CheckReport:
    """Check conditional-expectation axioms; the report carries residuals."""
    rep = CheckReport("conditional expectation axioms")
    B, A = E.source, E.target
    images = E.apply_many(B.basis)
    rep.add(
        "range",
        "E(B) lies in A",
        max(A.project(m)[1] for m in images),
        100 * tol.abs_eps,
    )
    rep.add(
        "fixes A",
        "E(a) = a for a in A",
        max(fro(E.apply(a) - a) for a in A.basis),
        100 * tol.abs_eps,
    )
    rep.add("unital", "E(1) = 1", fro(E.apply(B.unit) - B.unit), 100 * tol.abs_eps)
    rep.add(
        "idempotent",
        "E composed with E equals E",
        fro(E.action @ E.action - E.action),
        100 * tol.abs_eps,
    )
    bim = 0.0
    for a in A.basis:
        for ap in A.basis:
            lhs = np.stack([E.apply(a @ x @ ap) for x in B.basis])
            rhs = np.einsum("ab,kbc,cd->kad", a, images, ap)
            bim = max(bim, float(np.max(np.abs(lhs - rhs))))
    rep.add("bimodular", "E(a x a') = a E(x) a'", bim, 100 * tol.abs_eps)
    rep.add(
        "star",
        "E(x*) = E(x)*",
        max(fro(E.apply(adjoint(x)) - adjoint(E.apply(x))) for x in B.basis),
        100 * tol.abs_eps,
    )
    worst = 0.0
    rng = tol.rng(303)
    samples = list(B.basis)
    for _ in range(tol.sample_count):
        samples.append(B.from_coords(rng.standard_normal(B.dim) + 1j * rng.standard_normal(B.dim)))
    for x in samples:
        h = E.apply(adjoint(x) @ x)
        h = (h + adjoint(h)) / 2.0
        lam = np.linalg.eigvalsh(h)
        worst = max(worst, max(0.0, -float(lam[0])))
    rep.add("positive", "E(x* x) is positive semidefinite (sampled)", worst, 100 * tol.abs_eps)
    return rep


@dataclass(frozen=True)
class QuasiBasis:
    """Pairs (u_i, v_i) realizing the reconstruction identities for E, with
    index_value = sum u_i v_i."""

    pairs: list[tuple[CMat, CMat]]
    index_value: CMat
    reconstruction_residual: float

    @property
    def size(self) -> int:
        return len(self.pairs)


def verify_quasi_basis(E: CondExp, pairs, tol: Tol = DEFAULT_TOL) -> tuple[float, CMat]:
    """Max reconstruction residual of both identities over the B basis, and
    the index sum."""
    B = E.source
    worst = 0.0
    for b in B.basis:
        left = sum(u @ E.apply(v @ b) for u, v in pairs)
        right = sum(E.apply(b @ u) @ v for u, v in pairs)
        worst = max(worst, fro(left - b), fro(right - b))
    index = sum(u @ v for u, v in pairs)
    return worst, index


def quasi_basis(E: CondExp, tol: Tol = DEFAULT_TOL, seeds: np.ndarray | None = None) -> QuasiBasis:
    """Frame-correction quasi-basis: starting from seed vectors spanning B,
    the frame operator S(b) = sum_j v_j E(v_j* b) is inverted to its square
    root, yielding pairs (w_i, w_i*) with w_i = S^{-1/2} v_i.

    Raises IndexInfinite when the frame operator is singular at this scale.
    """
    B = E.source
    v = B.basis if seeds is None else np.asarray(seeds, dtype=complex)
    # Gram of the scalarized form tau(E(x* y)) over B's orthonormal basis:
    # the frame operator is self-adjoint and positive in this geometry.
    exp_pairs = E.apply_many(
        np.einsum("iab,kbc->ikac", np.conj(np.transpose(B.basis, (0, 2, 1))), B.basis).reshape(
            -1, B.n, B.n
        )
    ).reshape(B.dim, B.dim, B.n, B.n)  # E(b_i* b_k)
    gram = np.trace(exp_pairs, axis1=2, axis2=3) / B.n
    gram = (gram + gram.conj().T) / 2.0
    lam_g = np.linalg.eigvalsh(gram)
    if lam_g[0] <= tol.support_threshold(abs(lam_g[-1])):
        raise IndexInfinite("the form E(x* y) is degenerate on B")
    # matrix of S(b) = sum_j v_j E(v_j* b) in B coordinates
    ev = E.apply_many(
        np.einsum("jab,mbc->jmac", np.conj(np.transpose(v, (0, 2, 1))), B.basis).reshape(-1, B.n, B.n)
    ).reshape(len(v), B.dim, B.n, B.n)  # E(v_j* b_m)
    s_of_basis = np.einsum("jab,jmbc->mac", v, ev)  # S(b_m)
    s_mat = np.stack([B.coords(s_of_basis[m]) for m in range(B.dim)], axis=1)
    herm = gram @ s_mat
    herm = (herm + herm.conj().T) / 2.0
    lam, x = scipy.linalg.eigh(herm, gram)
    if lam[0] <= tol.support_threshold(abs(lam[-1])):
        raise IndexInfinite("frame operator is singular: no quasi-basis at this scale")
    inv_sqrt = x @ np.diag(1.0 / np.sqrt(lam)) @ adjoint(x) @ gram
    v_coords = B.coords_many(v)  # (m, dim)
    w = np.einsum("km,kab->mab", inv_sqrt @ v_coords.T, B.basis)  # w_i = S^{-1/2} v_i
    pairs = [(w[i], adjoint(w[i])) for i in range(len(w))]
    resid, index = verify_quasi_basis(E, pairs, tol)
    if resid > 1e-6:
        raise IndexInfinite(f"frame reconstruction failed (residual {resid:.3e})")
    return QuasiBasis(pairs, index, resid)


def watatani_index(E: CondExp, tol: Tol = DEFAULT_TOL) -> CMat:
    """Index of E: sum u_i v_i over a quasi-basis; verified central in B and
    stable under a reseeded choice of quasi-basis."""
    B = E.source
    qb = quasi_basis(E, tol)
    index = qb.index_value
    central = max(fro(index @ b - b @ index) for b in B.basis)
    if central > 1e-7:
        raise IndexInfinite(f"index value is not central (residual {central:.3e})")
    rng = tol.rng(404)
    for _ in range(8):
        r = rng.standard_normal((B.dim, B.dim)) + 1j * rng.standard_normal((B.dim, B.dim))
        if np.linalg.cond(r) < 1e6:
            break
    seeds = np.einsum("mk,kab->mab", r, B.basis)
    qb2 = quasi_basis(E, tol, seeds=seeds)
    drift = fro(qb2.index_value - index)
    if drift > 1e-7:
        raise IndexInfinite(f"index depends on the quasi-basis choice (drift {drift:.3e})")
    return index


@dataclass(frozen=True, eq=False)
class InclusionPair:
    """A verified member of the index-2 class: B with expectation E onto A,
    Watatani index the scalar 2, and the reflection beta = 2E - id."""

    B: CStarAlg
    A: CStarAlg
    E: CondExp
    quasi: QuasiBasis
    beta: LinearMap
    index: CMat

    @property
    def ambient_dim(self) -> int:
        return self.B.ambient_dim


def _same_span(a: CStarAlg, b: CStarAlg, tol: Tol) -> bool:
    if a.dim != b.dim or a.ambient_dim != b.ambient_dim:
        return False
    return all(b.contains(x, tol) for x in a.basis)


def make_inclusion_pair(B: CStarAlg, A: CStarAlg, E: CondExp, tol: Tol = DEFAULT_TOL) -> InclusionPair:
    """Assert index E = 2 (scalar) and build the verified pair.

    Raises IndexNotTwo with the actual central index when it is not the
    scalar 2, and BetaNotAutomorphism when 2E - id fails to be an order-2
    automorphism fixing exactly A.
    """
    report = validate_expectation(E, tol)
    if not report.passed:
        raise ExpectationInvalid(
            "conditional expectation axioms failed: "
            + ", ".join(r.name for r in report.failures()),
            report,
        )
    if not _same_span(E.target, A, tol):
        raise ExpectationInvalid("expectation target differs from the declared subalgebra")
    qb = quasi_basis(E, tol)
    index = watatani_index(E, tol)
    if fro(index - 2.0 * B.unit) > 1e-7:
        raise IndexNotTwo(
            "Watatani index is central but not the scalar 2", index_value=index
        )
    beta_images = 2.0 * E.apply_many(B.basis) - B.basis
    mat = _automorphism_checks(B, beta_images, tol, BetaNotAutomorphism)
    if fro(mat @ mat - np.eye(B.dim)) > 100 * tol.abs_eps:
        raise BetaNotAutomorphism("reflection 2E - id does not square to the identity")
    fixed = nullspace_mats(mat - np.eye(B.dim), B.basis, tol)
    if len(fixed) != A.dim:
        raise BetaNotAutomorphism(
            f"fixed algebra of the reflection has dimension {len(fixed)}, expected {A.dim}"
        )
    for f in fixed:
        if not A.contains(f, tol):
            raise BetaNotAutomorphism("fixed algebra of the reflection is not A")
    beta = LinearMap(B.basis, beta_images)
    return InclusionPair(B, A, E, qb, beta, index)


def minus_subspace(P: InclusionPair, tol: Tol = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of {b in B : E(b) = 0}, the -1 eigenspace of beta."""
    return nullspace_mats(P.E.action, P.B.basis, tol)
