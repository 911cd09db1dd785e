"""Minimal solvers for relative pose.

Two solvers power the benchmark estimators:

  * the classical five-point essential-matrix solver (depth-free baseline),
    implemented as: nullspace of the 5x9 epipolar system, the ten cubic
    constraints (det(E) = 0 and 2 E E^T E - tr(E E^T) E = 0) expanded over
    the 20 degree-<=3 monomials in the nullspace coefficients, Gauss-Jordan
    reduction, and eigenvalues/vectors of the 10x10 action matrix for
    multiplication by the first coefficient;

  * a three-point solver for correspondences with per-view depth, posed as
    closed-form similarity registration of the depth-lifted point triples
    (Kabsch rotation on centered points, scale from the centered-norm ratio,
    translation from the centroids), recovering (R, t, sigma) with sigma the
    image-2 depth gauge.

Both have batched entry points (used by RANSAC to solve all minimal samples
of a run in one shot) and single-sample public wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Collinear, Degenerate, NoCheiralSolution, NonPositiveScale
from .geometry import Correspondence, EssentialMatrix, Pose, ScaledPose, _triangulate_batch, lift

_RANK_TOL = 1e-10
_REAL_ROOT_TOL = 1e-8
_CONSTRAINT_TOL = 1e-8
_AREA_TOL = 1e-12


# --- polynomial expansion tables (variables x, y, z, w) ----------------------
#
# Monomials are exponent multisets over the 4 nullspace coefficients. The
# tables turn products of per-entry linear polynomials into dense coefficient
# vectors with plain einsums, so the constraint matrix builds batched.

def _monomial_tables():
    mon2 = [(i, j) for i in range(4) for j in range(i, 4)]
    mon3 = [(i, j, k) for i in range(4) for j in range(i, 4) for k in range(j, 4)]
    idx2 = {m: n for n, m in enumerate(mon2)}
    idx3 = {m: n for n, m in enumerate(mon3)}
    T2 = np.zeros((10, 4, 4))
    for i in range(4):
        for j in range(4):
            T2[idx2[tuple(sorted((i, j)))], i, j] = 1.0
    T3 = np.zeros((20, 10, 4))
    for q, mq in enumerate(mon2):
        for l in range(4):
            T3[idx3[tuple(sorted(mq + (l,)))], q, l] = 1.0

    def expo(m):
        e = [0, 0, 0]
        for v in m:
            if v < 3:
                e[v] += 1
        return tuple(e)

    # column order: ten leading degree-3 monomials, then the ten-dim quotient
    # basis [x^2, xy, xz, y^2, yz, z^2, x, y, z, 1]
    target = [
        (3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0), (1, 1, 1), (1, 0, 2),
        (0, 3, 0), (0, 2, 1), (0, 1, 2), (0, 0, 3),
        (2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2),
        (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0),
    ]
    by_expo = {expo(m): n for n, m in enumerate(mon3)}
    perm = np.array([by_expo[t] for t in target])
    return T2, T3, perm


_T2, _T3, _PERM = _monomial_tables()


def _constraint_matrix(Elin: np.ndarray) -> np.ndarray:
    """10 cubic constraints over 20 ordered monomials, batched.

    Elin has shape (B, 3, 3, 4): linear coefficients of each E entry in the
    four nullspace directions.
    """
    EEt = np.einsum("baci,bdcj,qij->badq", Elin, Elin, _T2)
    tr2 = EEt[:, 0, 0] + EEt[:, 1, 1] + EEt[:, 2, 2]
    EEtE = np.einsum("badq,bdel,mql->baem", EEt, Elin, _T3)
    trE = np.einsum("bq,bael,mql->baem", tr2, Elin, _T3)
    trace_rows = (2.0 * EEtE - trE).reshape(-1, 9, 20)

    def quad(r1, c1, r2, c2):
        return np.einsum("bi,bj,qij->bq", Elin[:, r1, c1], Elin[:, r2, c2], _T2)

    def cube(lin_rc, q):
        return np.einsum("bq,bl,mql->bm", q, lin_rc, _T3)

    d0 = quad(1, 1, 2, 2) - quad(1, 2, 2, 1)
    d1 = quad(1, 0, 2, 2) - quad(1, 2, 2, 0)
    d2 = quad(1, 0, 2, 1) - quad(1, 1, 2, 0)
    det_row = cube(Elin[:, 0, 0], d0) - cube(Elin[:, 0, 1], d1) + cube(Elin[:, 0, 2], d2)

    M = np.concatenate([det_row[:, None, :], trace_rows], axis=1)
    return M[:, :, _PERM]


def _reduce_and_solve(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jordan via solve; returns (R, ok_mask) with singular rows flagged."""
    B = M.shape[0]
    R = np.zeros((B, 10, 10))
    ok = np.ones(B, dtype=bool)
    try:
        R = np.linalg.solve(M[:, :, :10], M[:, :, 10:])
    except np.linalg.LinAlgError:
        for b in range(B):
            try:
                R[b] = np.linalg.solve(M[b, :, :10], M[b, :, 10:])
            except np.linalg.LinAlgError:
                ok[b] = False
    bad = ~np.isfinite(R).all(axis=(1, 2))
    ok &= ~bad
    return R, ok


def five_point_batch(
    m1: np.ndarray, m2: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve all samples of shape (B, 5, 3) homogeneous unit-plane points.

    Returns (E, sample_index, degenerate_mask): E stacked (M, 3, 3) Frobenius
    normalized, sample_index (M,) mapping each candidate to its sample, and a
    (B,) mask of samples rejected as rank deficient / unsolvable.
    """
    B = m1.shape[0]
    degenerate = np.zeros(B, dtype=bool)
    if B == 0:
        return np.zeros((0, 3, 3)), np.zeros(0, dtype=np.int64), degenerate

    # epipolar system rows: kron(m2, m1) ordered to match row-major E
    Q = (m2[:, :, :, None] * m1[:, :, None, :]).reshape(B, 5, 9)
    _, s, vt = np.linalg.svd(Q, full_matrices=True)
    degenerate |= s[:, 4] <= _RANK_TOL * np.maximum(1.0, s[:, 0])

    basis = vt[:, 5:9, :].reshape(B, 4, 3, 3)
    Elin = np.moveaxis(basis, 1, 3)  # (B, 3, 3, 4)
    M = _constraint_matrix(Elin)
    R, ok = _reduce_and_solve(M)
    degenerate |= ~ok

    A = np.zeros((B, 10, 10))
    A[:, :, :6] = -np.transpose(R[:, :6, :], (0, 2, 1))
    A[:, 0, 6] = 1.0
    A[:, 1, 7] = 1.0
    A[:, 2, 8] = 1.0
    A[:, 6, 9] = 1.0

    good = ~degenerate
    E_list: list[np.ndarray] = []
    idx_list: list[np.ndarray] = []
    if good.any():
        W, V = np.linalg.eig(np.transpose(A[good], (0, 2, 1)))
        gidx = np.flatnonzero(good)
        real = np.abs(W.imag) < _REAL_ROOT_TOL * (1.0 + np.abs(W.real))
        denom = V[:, 9, :]
        vmax = np.abs(V).max(axis=1)
        denom_ok = np.abs(denom) > 1e-10 * vmax
        keep = real & denom_ok
        with np.errstate(divide="ignore", invalid="ignore"):
            xyz = (V[:, 6:9, :] / denom[:, None, :]).real  # (G, 3, 10)
        coefs = np.concatenate([xyz, np.ones((xyz.shape[0], 1, 10))], axis=1)
        Ecand = np.einsum("bvk,bvrc->bkrc", coefs, basis[good])
        norms = np.linalg.norm(Ecand, axis=(2, 3))
        keep &= norms > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            Ecand = Ecand / norms[:, :, None, None]
        # enforce defining constraints on emitted candidates
        detv = np.abs(np.linalg.det(Ecand))
        EEt = Ecand @ np.transpose(Ecand, (0, 1, 3, 2))
        tr = np.trace(EEt, axis1=2, axis2=3)
        Ctr = 2.0 * (EEt @ Ecand) - tr[:, :, None, None] * Ecand
        ctr_norm = np.linalg.norm(Ctr, axis=(2, 3))
        keep &= (detv <= _CONSTRAINT_TOL) & (ctr_norm <= _CONSTRAINT_TOL)
        keep &= np.isfinite(Ecand).all(axis=(2, 3))
        for g in range(Ecand.shape[0]):
            k = keep[g]
            if k.any():
                E_list.append(Ecand[g, k])
                idx_list.append(np.full(int(k.sum()), gidx[g], dtype=np.int64))
    if E_list:
        return np.concatenate(E_list), np.concatenate(idx_list), degenerate
    return np.zeros((0, 3, 3)), np.zeros(0, dtype=np.int64), degenerate


def depth_3pt_batch(
    A: np.ndarray, Bpts: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Register depth-lifted triples: sigma * B_i = R @ A_i + t.

    A, Bpts: (B, 3, 3) lifted camera points. Returns (R, t, sigma, valid).
    """
    nA = np.cross(A[:, 1] - A[:, 0], A[:, 2] - A[:, 0])
    nB = np.cross(Bpts[:, 1] - Bpts[:, 0], Bpts[:, 2] - Bpts[:, 0])
    valid = (0.5 * np.linalg.norm(nA, axis=1) > _AREA_TOL) & (
        0.5 * np.linalg.norm(nB, axis=1) > _AREA_TOL
    )

    Am = A.mean(axis=1)
    Bm = Bpts.mean(axis=1)
    Ac = A - Am[:, None, :]
    Bc = Bpts - Bm[:, None, :]
    sa = np.einsum("bki,bki->b", Ac, Ac)
    sb = np.einsum("bki,bki->b", Bc, Bc)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.sqrt(sa / sb)

    H = np.einsum("bki,bkj->bij", Ac, Bc)
    bad = ~np.isfinite(H).all(axis=(1, 2))
    H = np.where(bad[:, None, None], np.eye(3), H)
    U, _, Vt = np.linalg.svd(H)
    V = np.transpose(Vt, (0, 2, 1))
    d = np.linalg.det(V @ np.transpose(U, (0, 2, 1)))
    Vd = V.copy()
    Vd[:, :, 2] *= d[:, None]
    R = Vd @ np.transpose(U, (0, 2, 1))

    # Kabsch output is orthonormal to machine precision; re-orthogonalize the
    # rare drifters so downstream pose validation never trips
    err = np.abs(np.einsum("bij,bik->bjk", R, R) - np.eye(3)).max(axis=(1, 2))
    for b in np.flatnonzero(err > 1e-9):
        u2, _, vt2 = np.linalg.svd(R[b])
        R[b] = u2 @ vt2
        if np.linalg.det(R[b]) < 0:
            u2[:, 2] *= -1
            R[b] = u2 @ vt2

    t = sigma[:, None] * Bm - np.einsum("bij,bj->bi", R, Am)
    valid &= ~bad
    valid &= np.isfinite(sigma) & (sigma > 0)
    valid &= np.isfinite(t).all(axis=1)
    return R, t, sigma, valid


# --- public single-sample API -------------------------------------------------

@dataclass
class MinimalSample:
    """Fixed-size set of correspondences in normalized coordinates."""

    correspondences: list[Correspondence]

    def validate(self, size: int, pairwise_tol: float = 1e-9) -> None:
        if len(self.correspondences) != size:
            raise ValueError(f"minimal sample needs exactly {size} correspondences")
        pts = np.array([c.x1 for c in self.correspondences])
        for i in range(size):
            for j in range(i + 1, size):
                if np.linalg.norm(pts[i] - pts[j]) <= pairwise_tol:
                    raise Degenerate("coincident points in minimal sample")


@dataclass
class SolverOutput:
    candidates: list = field(default_factory=list)


def solve_essential_5pt(sample: MinimalSample) -> SolverOutput:
    """All real essential matrices consistent with five normalized correspondences."""
    sample.validate(5)
    m1 = lift(np.array([c.x1 for c in sample.correspondences]))[None]
    m2 = lift(np.array([c.x2 for c in sample.correspondences]))[None]
    E, _, degen = five_point_batch(m1, m2)
    if degen[0]:
        raise Degenerate("five-point constraint matrix is rank deficient")
    return SolverOutput([EssentialMatrix(e) for e in E])


def solve_relpose_scale_depth(sample: MinimalSample) -> SolverOutput:
    """Pose + image-2 depth gauge from three depth-augmented correspondences."""
    sample.validate(3)
    for c in sample.correspondences:
        if c.d1 is None or c.d2 is None:
            raise ValueError("depth solver needs d1 and d2 on every correspondence")
    A = np.array([c.d1 * lift(c.x1) for c in sample.correspondences])[None]
    Bp = np.array([c.d2 * lift(c.x2) for c in sample.correspondences])[None]
    nA = np.cross(A[0, 1] - A[0, 0], A[0, 2] - A[0, 0])
    nB = np.cross(Bp[0, 1] - Bp[0, 0], Bp[0, 2] - Bp[0, 0])
    if 0.5 * np.linalg.norm(nA) <= _AREA_TOL or 0.5 * np.linalg.norm(nB) <= _AREA_TOL:
        raise Collinear("lifted sample is collinear")
    R, t, sigma, valid = depth_3pt_batch(A, Bp)
    if not valid[0]:
        if not (np.isfinite(sigma[0]) and sigma[0] > 0):
            raise NonPositiveScale(f"recovered scale {sigma[0]!r}")
        raise Degenerate("registration failed")
    return SolverOutput([ScaledPose(Pose(R[0], t[0]), float(sigma[0]))])


def decompose_essential(E: EssentialMatrix, corrs: list[Correspondence]) -> Pose:
    """Pick the cheirality-consistent (R, t) among the four decompositions of E.

    `corrs` are normalized correspondences used as cheirality voters; the
    returned translation is unit norm.
    """
    if not corrs:
        raise ValueError("decompose_essential needs at least one correspondence")
    m1 = lift(np.array([c.x1 for c in corrs]))
    m2 = lift(np.array([c.x2 for c in corrs]))
    U, _, Vt = np.linalg.svd(E.E)
    if np.linalg.det(U) < 0:
        U = -U
    if np.linalg.det(Vt) < 0:
        Vt = -Vt
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    R1 = U @ W @ Vt
    R2 = U @ W.T @ Vt
    u3 = U[:, 2]
    best_count, best_pose = -1, None
    for R, t in ((R1, u3), (R1, -u3), (R2, u3), (R2, -u3)):
        d1, d2 = _triangulate_batch(R, t, m1, m2)
        count = int(np.sum((d1 > 0) & (d2 > 0) & np.isfinite(d1) & np.isfinite(d2)))
        if count > best_count:
            best_count, best_pose = count, (R, t)
    if best_count <= 0:
        raise NoCheiralSolution("no decomposition places any point in front of both cameras")
    R, t = best_pose
    return Pose(R, t / np.linalg.norm(t))
