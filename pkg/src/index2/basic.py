"""The basic construction of an index-2 inclusion in two concrete models.

crossed model: in M_2(M_n), embed(b) = diag(b, beta(b)), W the flip tensor
identity, algebra = {embed(b1) + embed(b2) W}, Jones projection
e = (1 + W)/2. The dual expectation onto B reads off the embed coefficient,
and the dual flip is 2 embed(dual(x)) - x.

q model: for a quasi-basis {(x_i, x_i*)} of size m, q = [E(x_i* x_j)] is a
projection in M_m(A), the algebra is the corner q M_m(A) q, embed(b) =
[E(x_i* b x_j)], and e = [E(x_i*) E(x_j)].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checks import CheckReport
from .cstar import (
    CStarAlg,
    LinearMap,
    algebra_from_span,
    nullspace_mats,
    orthonormalize,
    star_homomorphism_report,
)
from .errors import IsoResidualExceeded, NotInAlgebra, QNotProjection
from .inclusion import InclusionPair, verify_quasi_basis
from .matkernel import CMat, DEFAULT_TOL, Tol, adjoint, asmatrix, eye, fro


@dataclass(frozen=True, eq=False)
class BasicConstruction:
    """A concrete realization of the algebra generated by B and the Jones
    projection, with the distinguished structure maps."""

    model_kind: str
    pair: InclusionPair
    algebra: CStarAlg
    jones_projection: CMat
    embed_b: LinearMap            # B -> algebra
    dual_expectation: LinearMap   # algebra -> B
    flip: LinearMap               # algebra -> algebra, the dual symmetry
    unitary_u: CMat               # 2 e - 1

    @property
    def unit(self) -> CMat:
        return self.algebra.unit

    def embed(self, b: CMat) -> CMat:
        return self.embed_b.apply(b)

    def dual_apply(self, x: CMat) -> CMat:
        return self.dual_expectation.apply(x)


def _finish(model_kind, P, alg, e, embed_images, dual_images, tol) -> BasicConstruction:
    embed_map = LinearMap(P.B.basis, embed_images)
    dual_map = LinearMap(alg.basis, dual_images)
    flip_images = 2.0 * np.stack([embed_map.apply(d) for d in dual_images]) - alg.basis
    flip = LinearMap(alg.basis, flip_images)
    u = 2.0 * e - alg.unit
    return BasicConstruction(model_kind, P, alg, e, embed_map, dual_map, flip, u)


def crossed_model(P: InclusionPair, tol: Tol = DEFAULT_TOL) -> BasicConstruction:
    """Basic construction as the order-2 crossed product of B by its
    reflection, concretely in M_2(M_n)."""
    n = P.ambient_dim
    w = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), eye(n))

    def embed(b):
        return np.block([[b, np.zeros((n, n))], [np.zeros((n, n)), P.beta.apply(b)]])

    embed_images = np.stack([embed(b) for b in P.B.basis])
    odd_images = np.stack([m @ w for m in embed_images])
    alg = algebra_from_span(2 * n, np.concatenate([embed_images, odd_images]), tol, unit=eye(2 * n))
    e = (eye(2 * n) + w) / 2.0
    dual_images = np.stack([m[:n, :n] for m in alg.basis])  # embed coefficient of x
    return _finish("crossed", P, alg, e, embed_images, dual_images, tol)


def q_model(P: InclusionPair, tol: Tol = DEFAULT_TOL, pairs=None) -> BasicConstruction:
    """Basic construction as the corner q M_m(A) q over a quasi-basis of
    size m (the stored frame quasi-basis unless an explicit one is given)."""
    E = P.E
    n = P.ambient_dim
    if pairs is None:
        pairs = P.quasi.pairs
    xs = [asmatrix(u) for u, _ in pairs]
    for u, v in pairs:
        if fro(asmatrix(v) - adjoint(asmatrix(u))) > 100 * tol.abs_eps:
            raise QNotProjection("q model requires quasi-basis pairs of the form (x, x*)")
    m = len(xs)

    def blocks(fill) -> CMat:
        out = np.zeros((m, m, n, n), dtype=complex)
        for i in range(m):
            for j in range(m):
                out[i, j] = fill(i, j)
        return out.transpose(0, 2, 1, 3).reshape(m * n, m * n)

    q = blocks(lambda i, j: E.apply(adjoint(xs[i]) @ xs[j]))
    if fro(q @ q - q) > 1e-7 or fro(q - adjoint(q)) > 1e-7:
        raise QNotProjection(f"[E(x_i* x_j)] is not a projection (residual {fro(q @ q - q):.3e})")

    def embed(b):
        return blocks(lambda i, j: E.apply(adjoint(xs[i]) @ b @ xs[j]))

    ex = [E.apply(adjoint(x)) for x in xs]
    e = blocks(lambda i, j: ex[i] @ adjoint(ex[j]).conj().T if False else ex[i] @ E.apply(xs[j]))
    embed_images = np.stack([embed(b) for b in P.B.basis])
    mixed = np.stack(
        [embed_images[i] @ e @ embed_images[j] for i in range(P.B.dim) for j in range(P.B.dim)]
    )
    alg = algebra_from_span(m * n, np.concatenate([embed_images, mixed]), tol, unit=q)

    def dual(x):
        xb = x.reshape(m, n, m, n).transpose(0, 2, 1, 3)  # blocks (i, j)
        return 0.5 * sum(xs[i] @ xb[i, j] @ adjoint(xs[j]) for i in range(m) for j in range(m))

    dual_images = np.stack([dual(b) for b in alg.basis])
    return _finish("qmat", P, alg, e, embed_images, dual_images, tol)


def verify_basic(c: BasicConstruction, tol: Tol = DEFAULT_TOL) -> CheckReport:
    """Residual battery for every structural identity of the construction."""
    rep = CheckReport(f"basic construction ({c.model_kind} model)")
    P = c.pair
    e = c.jones_projection
    unit = c.unit
    alg = c.algebra
    embeds = c.embed_b.images
    rep.add("jones projection", "e is a self-adjoint idempotent",
            max(fro(e @ e - e), fro(e - adjoint(e))), 100 * tol.abs_eps)
    rep.add("jones member", "e lies in the algebra", alg.project(e)[1], 100 * tol.abs_eps)
    exp_images = P.E.apply_many(P.B.basis)
    rep.add(
        "e b e",
        "e b e = E(b) e",
        max(
            fro(e @ embeds[k] @ e - c.embed(exp_images[k]) @ e)
            for k in range(P.B.dim)
        ),
        100 * tol.abs_eps,
    )
    u = c.unitary_u
    rep.add("u squared", "(2e - 1)^2 = 1", fro(u @ u - unit), 100 * tol.abs_eps)
    rep.add(
        "reflection",
        "u b u* = 2 E(b) - b",
        max(
            fro(u @ embeds[k] @ adjoint(u) - c.embed(2.0 * exp_images[k] - P.B.basis[k]))
            for k in range(P.B.dim)
        ),
        100 * tol.abs_eps,
    )
    fm = c.flip.endo_matrix()
    rep.add("flip order two", "flip^2 = id", fro(fm @ fm - np.eye(alg.dim)), 100 * tol.abs_eps)
    rep.add("flip on e", "flip(e) = 1 - e", fro(c.flip.apply(e) - (unit - e)), 100 * tol.abs_eps)
    rep.add(
        "flip fixes B",
        "flip(b) = b for embedded b",
        max(fro(c.flip.apply(m) - m) for m in embeds),
        100 * tol.abs_eps,
    )
    flip_hom = star_homomorphism_report(
        c.flip, alg, alg, tol, unit_image=unit, expect_bijective=True
    )
    rep.add("flip automorphism", "flip is a *-automorphism",
            max(r.residual for r in flip_hom.records[:3]), 200 * tol.abs_eps)
    span = np.concatenate(
        [embeds, np.stack([embeds[i] @ e @ embeds[j] for i in range(len(embeds)) for j in range(len(embeds))])]
    )
    gen_basis = orthonormalize(span, alg.ambient_dim, tol)
    rep.add_bool(
        "generated",
        "algebra = span(B, B e B)",
        len(gen_basis) == alg.dim and all(alg.contains(g, tol) for g in gen_basis),
    )
    rep.add_bool("dimension", "dim = 2 dim B", alg.dim == 2 * P.B.dim)
    rep.add(
        "dual on B",
        "dual expectation restricts to the identity on B",
        max(fro(c.dual_apply(embeds[k]) - P.B.basis[k]) for k in range(P.B.dim)),
        100 * tol.abs_eps,
    )
    rep.add("dual on e", "dual expectation of e is 1/2", fro(c.dual_apply(e) - 0.5 * P.B.unit),
            100 * tol.abs_eps)
    rep.add(
        "dual product rule",
        "dual(a e b) = a b / 2",
        max(
            fro(c.dual_apply(embeds[i] @ e @ embeds[j]) - 0.5 * P.B.basis[i] @ P.B.basis[j])
            for i in range(P.B.dim)
            for j in range(P.B.dim)
        ),
        100 * tol.abs_eps,
    )
    f = unit - e
    rep.add(
        "corner cut",
        "(1-e) b (1-e) = E(b) (1-e)",
        max(
            fro(f @ embeds[k] @ f - c.embed(exp_images[k]) @ f)
            for k in range(P.B.dim)
        ),
        100 * tol.abs_eps,
    )
    if c.model_kind == "qmat":
        m = alg.ambient_dim // P.ambient_dim
        n = P.ambient_dim
        worst = 0.0
        for b in alg.basis:
            bl = b.reshape(m, n, m, n).transpose(0, 2, 1, 3)
            worst = max(
                worst, max(P.A_project_residual(bl[i, j]) if False else P.A.project(bl[i, j])[1] for i in range(m) for j in range(m))
            )
        rep.add("entries in A", "algebra entries are A-valued blocks", worst, 100 * tol.abs_eps)
        rep.add(
            "q corner",
            "q x q = x on the algebra",
            max(fro(c.unit @ b @ c.unit - b) for b in alg.basis),
            100 * tol.abs_eps,
        )
    return rep


def models_isomorphic(c1: BasicConstruction, c2: BasicConstruction, tol: Tol = DEFAULT_TOL) -> LinearMap:
    """The *-isomorphism fixing B and the Jones projection, solved on the
    common generating family {embed(b_i), embed(b_i) e embed(b_j)}."""
    if c1.pair is not c2.pair and c1.pair.B is not c2.pair.B:
        raise IsoResidualExceeded("models must come from the same inclusion")
    phi = generated_star_iso(
        c1.algebra,
        _generating_family(c1),
        _generating_family(c2),
        tol,
    )
    rep = star_homomorphism_report(phi, c1.algebra, c2.algebra, tol, unit_image=c2.unit)
    rep.add("jones", "e maps to e", fro(phi.apply(c1.jones_projection) - c2.jones_projection),
            1e-7)
    rep.add(
        "embed intertwined",
        "phi(embed1(b)) = embed2(b)",
        max(fro(phi.apply(c1.embed_b.images[k]) - c2.embed_b.images[k]) for k in range(c1.pair.B.dim)),
        1e-7,
    )
    if not rep.passed:
        raise IsoResidualExceeded(
            "model isomorphism verification failed: " + ", ".join(r.name for r in rep.failures()),
            rep,
        )
    return phi


def _generating_family(c: BasicConstruction) -> np.ndarray:
    embeds = c.embed_b.images
    e = c.jones_projection
    mixed = np.stack([embeds[i] @ e @ embeds[j] for i in range(len(embeds)) for j in range(len(embeds))])
    return np.concatenate([embeds, mixed])


def generated_star_iso(source: CStarAlg, gens_src: np.ndarray, gens_dst: np.ndarray, tol: Tol) -> LinearMap:
    """Linear map sending each source basis element, expanded over the
    generating family, to the same combination of destination generators."""
    g_flat = gens_src.reshape(len(gens_src), -1).T  # (n^2, g)
    images = []
    for b in source.basis:
        coeff, *_ = np.linalg.lstsq(g_flat, b.ravel(), rcond=None)
        resid = fro((g_flat @ coeff).reshape(b.shape) - b)
        if resid > 1e-7:
            raise IsoResidualExceeded(
                f"basis element does not lie in the generated span (residual {resid:.3e})"
            )
        images.append(np.einsum("g,gij->ij", coeff, gens_dst))
    return LinearMap(source.basis, np.stack(images))


@dataclass(frozen=True)
class CutExpectation:
    """The index-(t-1)^2 expectation on the complementary corner, with the
    quasi-basis transported from the one for E."""

    corner_basis: np.ndarray
    map: LinearMap
    quasi_pairs: list
    index_value: CMat
    report: CheckReport


def cut_expectation_F(c: BasicConstruction, P: InclusionPair, tol: Tol = DEFAULT_TOL) -> CutExpectation:
    """The expectation F(y) = (t/(t-1)) E(dual(y)) (1-e) on the corner
    (1-e) <B,e> (1-e), onto A (1-e), with its transported quasi-basis; at
    t = 2 the index of F is (t-1)^2 (1-e) = 1-e."""
    t = 2.0
    e = c.jones_projection
    f = c.unit - e
    alg = c.algebra
    corner = orthonormalize(
        np.einsum("ab,kbc,cd->kad", f, alg.basis, f), alg.ambient_dim, tol
    )
    images = np.stack(
        [(t / (t - 1.0)) * c.embed(P.E.apply(c.dual_apply(y))) @ f for y in corner]
    )
    fmap = LinearMap(corner, images)
    xs = [u for u, _ in P.quasi.pairs]
    root = np.sqrt(t - 1.0)
    quasi_pairs = []
    for j in range(len(xs)):
        for i in range(len(xs)):
            u = root * f @ c.embed(xs[j]) @ e @ c.embed(xs[i]) @ f
            quasi_pairs.append((u, adjoint(u)))
    rep = CheckReport("cut expectation on the complementary corner")
    recon = 0.0
    for y in corner:
        left = sum(u @ fmap.apply(v @ y) for u, v in quasi_pairs)
        right = sum(fmap.apply(y @ u) @ v for u, v in quasi_pairs)
        recon = max(recon, fro(left - y), fro(right - y))
    rep.add("reconstruction", "quasi-basis for F reconstructs the corner", recon, 1e-8)
    index_value = sum(u @ v for u, v in quasi_pairs)
    rep.add(
        "index",
        "index F = (t-1)^2 (1-e)",
        fro(index_value - (t - 1.0) ** 2 * f),
        1e-8,
    )
    rep.add(
        "unital",
        "F(1-e) = 1-e",
        fro(fmap.apply(f) - f),
        100 * tol.abs_eps,
    )
    rep.add(
        "cut identity",
        "F((1-e) b (1-e)) = E(b) (1-e)",
        max(
            fro(fmap.apply(f @ c.embed_b.images[k] @ f) - c.embed(P.E.apply(P.B.basis[k])) @ f)
            for k in range(P.B.dim)
        ),
        100 * tol.abs_eps,
    )
    return CutExpectation(corner, fmap, quasi_pairs, index_value, rep)


def corner_is_A(c: BasicConstruction, tol: Tol = DEFAULT_TOL) -> CheckReport:
    """(1-e) <B,e> (1-e) = A (1-e) and e <B,e> e = A e, with the compressions
    a -> a(1-e), a -> a e injective."""
    rep = CheckReport("corner identification with A")
    P = c.pair
    e = c.jones_projection
    f = c.unit - e
    a_e = orthonormalize(np.stack([c.embed(a) @ e for a in P.A.basis]), c.algebra.ambient_dim, tol)
    a_f = orthonormalize(np.stack([c.embed(a) @ f for a in P.A.basis]), c.algebra.ambient_dim, tol)

    def span_resid(mats, span):
        flat = span.reshape(len(span), -1)
        worst = 0.0
        for m in mats:
            coeff, *_ = np.linalg.lstsq(flat.T, m.ravel(), rcond=None)
            worst = max(worst, fro((flat.T @ coeff).reshape(m.shape) - m))
        return worst

    rep.add(
        "complementary corner",
        "(1-e) x (1-e) lies in A (1-e)",
        span_resid(np.einsum("ab,kbc,cd->kad", f, c.algebra.basis, f), a_f),
        100 * tol.abs_eps,
    )
    rep.add(
        "jones corner",
        "e x e lies in A e",
        span_resid(np.einsum("ab,kbc,cd->kad", e, c.algebra.basis, e), a_e),
        100 * tol.abs_eps,
    )
    for name, p, law in (("a -> a(1-e)", f, "a (1-e) = 0 implies a = 0"),
                         ("a -> a e", e, "a e = 0 implies a = 0")):
        mapped = np.stack([c.embed(a) @ p for a in P.A.basis]).reshape(P.A.dim, -1)
        s = np.linalg.svd(mapped, compute_uv=False)
        rank = int(np.sum(s > tol.support_threshold(s[0])))
        rep.add_bool(name, law, rank == P.A.dim)
    return rep


def fixed_points_of_flip(c: BasicConstruction, tol: Tol = DEFAULT_TOL) -> CStarAlg:
    """The +1 eigenspace of the dual symmetry, as a subalgebra; equals the
    embedded copy of B."""
    fm = c.flip.endo_matrix()
    mats = nullspace_mats(fm - np.eye(c.algebra.dim), c.algebra.basis, tol)
    return algebra_from_span(c.algebra.ambient_dim, mats, tol, unit=c.unit, check_closed=False)


def reduce_left(c: BasicConstruction, x: CMat, tol: Tol = DEFAULT_TOL) -> CMat:
    """The unique b in B with e x = e embed(b), computed as b = 2 dual(e x)."""
    x = asmatrix(x)
    resid = c.algebra.project(x)[1]
    if resid > tol.abs_eps + tol.rel_eps * fro(x):
        raise NotInAlgebra(f"argument is not in the basic construction (residual {resid:.3e})")
    e = c.jones_projection
    b = 2.0 * c.dual_apply(e @ x)
    check = fro(e @ x - e @ c.embed(b))
    if check > 1e-7:
        raise NotInAlgebra(f"left reduction failed to verify (residual {check:.3e})")
    mapped = np.stack([e @ m for m in c.embed_b.images]).reshape(c.pair.B.dim, -1)
    s = np.linalg.svd(mapped, compute_uv=False)
    if int(np.sum(s > tol.support_threshold(s[0]))) != c.pair.B.dim:
        raise NotInAlgebra("left reduction is not unique: b -> e embed(b) has a kernel")
    return b
