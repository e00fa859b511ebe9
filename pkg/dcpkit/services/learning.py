"""
Subspace models and scorers: PCA / whitened PCA, cosine similarity, PLDA with
log-likelihood-ratio scoring, and linear score fusion.

All fitting is deterministic: PCA and fusion use no randomness, PLDA draws its
filler initialization from a seeded generator. Fitted models are immutable.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from dcpkit.core.errors import DimensionError, InputError, NumericError
from dcpkit.models.enums import FusionMode

logger = logging.getLogger(__name__)

WPCA_FLOOR = 1e-10
GRAM_CHUNK = 65536


class ConditioningError(NumericError):
    code = "conditioning_error"


class UndefinedSimilarityError(NumericError):
    code = "undefined_similarity"


class DegenerateTrainingError(InputError):
    code = "degenerate_training"


def _as_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionError(f"{name} must be 2-D (samples x features), got shape {X.shape}")
    return X


# ============================================================================
# PCA / WPCA
# ============================================================================


@dataclass(frozen=True)
class PcaModel:
    """Mean, column-orthonormal basis (d_in × d_out) and non-increasing eigenvalues."""

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def d_in(self) -> int:
        return self.basis.shape[0]

    @property
    def d_out(self) -> int:
        return self.basis.shape[1]


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive."""
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def _numerical_rank(evals: np.ndarray) -> int:
    """Count of eigenvalues above WPCA_FLOOR·λ1 in a descending spectrum."""
    if evals.size == 0 or evals[0] <= 0:
        return 0
    return int(np.sum(evals > WPCA_FLOOR * evals[0]))


def pca_fit(X, d_out: Optional[int] = None, truncate_to_rank: bool = False) -> PcaModel:
    """
    Fit PCA with 1/(n−1) covariance normalization.

    Uses the d×d covariance when d ≤ n and the n×n Gram matrix otherwise, so
    that very long features (n ≪ d) are processed in column chunks.

    Args:
        X: Training samples, shape (n, d)
        d_out: Retained dimension; min(n − 1, d) when None
        truncate_to_rank: Keep at most the components whose eigenvalue exceeds
            WPCA_FLOOR·λ1, so repeated or collinear samples still fit

    Raises:
        DimensionError: If n < 2 or d_out is outside [1, min(n − 1, d)]
        ConditioningError: If a retained component has near-zero variance
            (only the Gram route without truncation), or all samples coincide
    """
    X = _as_matrix(X)
    n, d = X.shape
    if n < 2:
        raise DimensionError(f"PCA needs at least 2 samples, got {n}")
    max_k = min(n - 1, d)
    k = max_k if d_out is None else int(d_out)
    if not 1 <= k <= max_k:
        raise DimensionError(f"d_out must lie in [1, {max_k}] for {n} samples of dim {d}, got {k}")

    mean = X.mean(axis=0, dtype=np.float64)

    if d <= n:
        Xc = X.astype(np.float64) - mean
        evals, evecs = np.linalg.eigh(Xc.T @ Xc)
    else:
        evecs = None
        gram = np.zeros((n, n))
        for start in range(0, d, GRAM_CHUNK):
            cols = slice(start, start + GRAM_CHUNK)
            block = X[:, cols].astype(np.float64) - mean[cols]
            gram += block @ block.T
        evals, gram_vecs = np.linalg.eigh(gram)

    order = np.argsort(evals)[::-1]
    if truncate_to_rank:
        rank = _numerical_rank(evals[order])
        if rank == 0:
            raise ConditioningError(f"All {n} training samples are identical")
        if rank < k:
            logger.warning(f"PCA truncated to the data rank: {k} -> {rank} dims")
            k = rank
    order = order[:k]
    evals = evals[order]

    if evecs is not None:
        basis = evecs[:, order]
    else:
        gram_vecs = gram_vecs[:, order]
        if evals[-1] <= WPCA_FLOOR * max(evals[0], 0.0):
            raise ConditioningError(
                f"Component {k} has near-zero variance; reduce d_out below the data rank"
            )
        basis = np.empty((d, k))
        for start in range(0, d, GRAM_CHUNK):
            cols = slice(start, start + GRAM_CHUNK)
            block = X[:, cols].astype(np.float64) - mean[cols]
            basis[cols] = block.T @ gram_vecs
        basis /= np.sqrt(evals)

    eigenvalues = np.maximum(evals, 0.0) / (n - 1)
    logger.info(f"PCA fitted: {n} samples, {d} -> {k} dims")
    return PcaModel(mean=mean, basis=_fix_signs(basis), eigenvalues=eigenvalues)


def _check_input(m: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.d_in:
        raise DimensionError(f"Expected vectors of dim {m.d_in}, got {x.shape[-1]}")
    return x


def pca_project(m: PcaModel, x) -> np.ndarray:
    """y = Uᵀ(x − mean) for a vector or a (n, d) matrix of row vectors."""
    return (_check_input(m, x) - m.mean) @ m.basis


def wpca_project(m: PcaModel, x) -> np.ndarray:
    """
    Whitened projection y_i = u_iᵀ(x − mean)/√λ_i.

    Raises:
        ConditioningError: If a retained eigenvalue is at or below 1e-10·λ_1
    """
    lam = m.eigenvalues
    if lam.size == 0 or np.any(lam <= WPCA_FLOOR * lam[0]):
        raise ConditioningError("Whitening needs every retained eigenvalue above 1e-10·λ1")
    return pca_project(m, x) / np.sqrt(lam)


def cosine_sim(y1, y2) -> float:
    a = np.asarray(y1, dtype=np.float64)
    b = np.asarray(y2, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"Vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise UndefinedSimilarityError("Cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_matrix(A, B) -> np.ndarray:
    """Cosine similarities between the rows of A and the rows of B."""
    A = _as_matrix(np.atleast_2d(np.asarray(A, dtype=np.float64)), "A")
    B = _as_matrix(np.atleast_2d(np.asarray(B, dtype=np.float64)), "B")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"Vector lengths differ: {A.shape[1]} vs {B.shape[1]}")
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise UndefinedSimilarityError("Cosine similarity is undefined for a zero vector")
    return np.clip((A / na[:, None]) @ (B / nb[:, None]).T, -1.0, 1.0)


def cosine_pairs(A, B) -> np.ndarray:
    """Cosine similarity of row i of A with row i of B."""
    A = _as_matrix(np.asarray(A, dtype=np.float64), "A")
    B = _as_matrix(np.asarray(B, dtype=np.float64), "B")
    if A.shape != B.shape:
        raise DimensionError(f"Shapes differ: {A.shape} vs {B.shape}")
    norms = np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1)
    if np.any(norms == 0):
        raise UndefinedSimilarityError("Cosine similarity is undefined for a zero vector")
    return np.clip(np.sum(A * B, axis=1) / norms, -1.0, 1.0)


# ============================================================================
# PLDA
# ============================================================================


@dataclass(frozen=True)
class PldaModel:
    """
    x = μ + F·h + G·w + ε with h shared per identity, w per sample and
    diagonal noise covariance ``noise_var``.
    """

    mean: np.ndarray
    F: np.ndarray
    G: np.ndarray
    noise_var: np.ndarray
    log_likelihoods: Tuple[float, ...] = ()
    _Q: np.ndarray = field(init=False, repr=False, compare=False)
    _P: np.ndarray = field(init=False, repr=False, compare=False)
    _const: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = self.mean.shape[0]
        if self.F.shape[0] != d or self.G.shape[0] != d or self.noise_var.shape != (d,):
            raise DimensionError("PLDA parameter shapes are inconsistent")
        if self.F.shape[1] < 1 or self.G.shape[1] < 1:
            raise DimensionError("PLDA subspace dimensions must be at least 1")
        if np.any(self.noise_var <= 0):
            raise ConditioningError("PLDA noise variances must be positive")

        between = self.F @ self.F.T
        total = between + self.G @ self.G.T + np.diag(self.noise_var)
        total_inv = np.linalg.inv(total)
        schur = total - between @ total_inv @ between
        schur_inv = np.linalg.inv(schur)
        Q = total_inv - schur_inv
        P = total_inv @ between @ schur_inv
        _, logdet_total = np.linalg.slogdet(total)
        _, logdet_schur = np.linalg.slogdet(schur)
        object.__setattr__(self, "_Q", (Q + Q.T) / 2)
        object.__setattr__(self, "_P", (P + P.T) / 2)
        object.__setattr__(self, "_const", float(0.5 * (logdet_total - logdet_schur)))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def d_h(self) -> int:
        return self.F.shape[1]

    @property
    def d_w(self) -> int:
        return self.G.shape[1]

    def total_covariance(self) -> np.ndarray:
        return self.F @ self.F.T + self.G @ self.G.T + np.diag(self.noise_var)


def _group(labels: Sequence) -> List[np.ndarray]:
    _, inverse = np.unique(np.asarray(labels), return_inverse=True)
    return [np.flatnonzero(inverse == i) for i in range(inverse.max() + 1)]


def _orthonormal_fill(
    basis: np.ndarray, k: int, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """Extend ``basis`` to k columns with seeded random directions orthogonal to it."""
    d = basis.shape[0]
    missing = k - basis.shape[1]
    if missing <= 0:
        return basis[:, :k]
    q, _ = np.linalg.qr(np.hstack([basis, rng.standard_normal((d, missing))]))
    return np.hstack([basis, scale * q[:, basis.shape[1] : k]])


def _leading(scatter: np.ndarray, k: int) -> np.ndarray:
    evals, evecs = np.linalg.eigh(scatter)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    keep = [i for i in range(min(k, len(evals))) if evals[i] > WPCA_FLOOR * max(evals[0], 1e-300)]
    return evecs[:, order[keep]] * np.sqrt(evals[keep])


def _init_plda(
    R: np.ndarray, groups: List[np.ndarray], d_h: int, d_w: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, d = R.shape
    class_means = np.stack([R[g].mean(axis=0) for g in groups])
    within = R.copy()
    for i, g in enumerate(groups):
        within[g] -= class_means[i]
    between_scatter = class_means.T @ class_means / len(groups)
    within_scatter = within.T @ within / n

    floor = 1e-6 * max(float(np.mean(np.var(R, axis=0))), 1e-12)
    noise = np.maximum(np.diag(within_scatter) * 0.5, floor)
    fill_scale = float(np.sqrt(np.mean(noise))) * 0.1
    F = _orthonormal_fill(_leading(between_scatter, d_h), d_h, fill_scale, rng)
    G = _orthonormal_fill(_leading(within_scatter * 0.5, d_w), d_w, fill_scale, rng)
    return F, G, noise


def _e_step(
    R: np.ndarray, groups: List[np.ndarray], F: np.ndarray, G: np.ndarray, noise: np.ndarray
):
    """
    Posterior statistics of z_ij = [h_i; w_ij] and the marginal log-likelihood.

    Returns (sum_x_ez, sum_ezz, log_likelihood) where sum_x_ez = Σ r_ij E[z_ij]ᵀ
    and sum_ezz = Σ E[z_ij z_ijᵀ].
    """
    d = R.shape[1]
    d_h, d_w = F.shape[1], G.shape[1]
    inv_noise = 1.0 / noise
    FtS = F.T * inv_noise
    GtS = G.T * inv_noise
    FtSF, FtSG, GtSG = FtS @ F, FtS @ G, GtS @ G
    logdet_noise = float(np.sum(np.log(noise)))

    sum_x_ez = np.zeros((d, d_h + d_w))
    sum_ezz = np.zeros((d_h + d_w, d_h + d_w))
    loglik = 0.0
    cache: Dict[int, Tuple[np.ndarray, float]] = {}

    for g in groups:
        J = len(g)
        if J not in cache:
            size = d_h + J * d_w
            prec = np.eye(size)
            prec[:d_h, :d_h] += J * FtSF
            for j in range(J):
                s = d_h + j * d_w
                prec[:d_h, s : s + d_w] += FtSG
                prec[s : s + d_w, :d_h] += FtSG.T
                prec[s : s + d_w, s : s + d_w] += GtSG
            cov = np.linalg.inv(prec)
            _, logdet_prec = np.linalg.slogdet(prec)
            cache[J] = ((cov + cov.T) / 2, float(logdet_prec))
        cov, logdet_prec = cache[J]

        r = R[g]
        b = np.concatenate([FtS @ r.sum(axis=0), (r @ GtS.T).ravel()])
        post = cov @ b

        quad = float(np.sum(r * r * inv_noise)) - float(b @ post)
        loglik += -0.5 * (J * d * np.log(2 * np.pi) + J * logdet_noise + logdet_prec + quad)

        second = cov + np.outer(post, post)
        h = post[:d_h]
        for j in range(J):
            s = d_h + j * d_w
            z = np.concatenate([h, post[s : s + d_w]])
            idx = np.r_[0:d_h, s : s + d_w]
            sum_x_ez += np.outer(r[j], z)
            sum_ezz += second[np.ix_(idx, idx)]

    return sum_x_ez, sum_ezz, loglik


def plda_fit(
    X,
    labels: Sequence,
    d_h: int,
    d_w: int,
    iters: int = 50,
    seed: int = 0,
) -> PldaModel:
    """
    Fit PLDA by expectation-maximization.

    Args:
        X: Training samples (n, d), typically PCA-reduced
        labels: Identity label per sample
        d_h: Between-identity subspace dimension
        d_w: Within-identity subspace dimension
        iters: EM iterations
        seed: Seed of the filler columns of the initialization

    Returns:
        Fitted model; ``log_likelihoods`` holds the training log-likelihood
        before every iteration and after the last one

    Raises:
        DimensionError: If a subspace dimension is < 1 or exceeds d
        DegenerateTrainingError: With fewer than 2 identities or no repeated identity
    """
    X = _as_matrix(X).astype(np.float64)
    n, d = X.shape
    if len(labels) != n:
        raise DimensionError(f"Got {len(labels)} labels for {n} samples")
    if not 1 <= d_h <= d or not 1 <= d_w <= d:
        raise DimensionError(f"Subspace dims must lie in [1, {d}], got d_h={d_h}, d_w={d_w}")
    groups = _group(labels)
    if len(groups) < 2:
        raise DegenerateTrainingError("PLDA needs at least two identities")
    if max(len(g) for g in groups) < 2:
        raise DegenerateTrainingError("PLDA needs at least one identity with two samples")

    mean = X.mean(axis=0)
    R = X - mean
    rng = np.random.default_rng(seed)
    F, G, noise = _init_plda(R, groups, d_h, d_w, rng)
    noise_floor = 1e-10 * max(float(np.mean(np.var(R, axis=0))), 1e-300)
    sum_r2 = np.sum(R * R, axis=0)

    trace: List[float] = []
    for it in range(iters):
        sum_x_ez, sum_ezz, loglik = _e_step(R, groups, F, G, noise)
        trace.append(loglik)
        W = np.linalg.solve(sum_ezz.T, sum_x_ez.T).T
        noise = np.maximum((sum_r2 - np.sum(W * sum_x_ez, axis=1)) / n, noise_floor)
        F, G = W[:, :d_h], W[:, d_h:]
        logger.debug(f"PLDA EM iteration {it + 1}/{iters}: log-likelihood {loglik:.6f}")
    trace.append(_e_step(R, groups, F, G, noise)[2])

    logger.info(
        f"PLDA fitted: {n} samples, {len(groups)} identities, dim {d}, "
        f"d_h={d_h}, d_w={d_w}, final log-likelihood {trace[-1]:.4f}"
    )
    return PldaModel(mean=mean, F=F, G=G, noise_var=noise, log_likelihoods=tuple(trace))


def plda_llr(m: PldaModel, x1, x2) -> float:
    """
    log p(x1, x2 | same identity) − log p(x1) p(x2).

    Raises:
        DimensionError: If a vector does not match the model dimension
    """
    a = np.asarray(x1, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    if a.shape != (m.dim,) or b.shape != (m.dim,):
        raise DimensionError(f"Expected vectors of dim {m.dim}, got {a.shape} and {b.shape}")
    a = a - m.mean
    b = b - m.mean
    return float(0.5 * (a @ m._Q @ a + b @ m._Q @ b) + a @ m._P @ b + m._const)


def plda_llr_matrix(m: PldaModel, A, B) -> np.ndarray:
    """LLR between every row of A and every row of B."""
    A = _as_matrix(np.atleast_2d(np.asarray(A, dtype=np.float64)), "A") - m.mean
    B = _as_matrix(np.atleast_2d(np.asarray(B, dtype=np.float64)), "B") - m.mean
    if A.shape[1] != m.dim or B.shape[1] != m.dim:
        raise DimensionError(f"Expected vectors of dim {m.dim}")
    qa = 0.5 * np.einsum("ij,jk,ik->i", A, m._Q, A)
    qb = 0.5 * np.einsum("ij,jk,ik->i", B, m._Q, B)
    return qa[:, None] + qb[None, :] + A @ m._P @ B.T + m._const


def plda_llr_pairs(m: PldaModel, A, B) -> np.ndarray:
    """LLR of row i of A against row i of B."""
    A = _as_matrix(np.asarray(A, dtype=np.float64), "A") - m.mean
    B = _as_matrix(np.asarray(B, dtype=np.float64), "B") - m.mean
    if A.shape != B.shape or A.shape[1] != m.dim:
        raise DimensionError(f"Expected two equal-length lists of dim-{m.dim} vectors")
    return (
        0.5 * np.einsum("ij,jk,ik->i", A, m._Q, A)
        + 0.5 * np.einsum("ij,jk,ik->i", B, m._Q, B)
        + np.einsum("ij,jk,ik->i", A, m._P, B)
        + m._const
    )


# ============================================================================
# Score Fusion
# ============================================================================


@dataclass(frozen=True)
class FusionModel:
    weights: np.ndarray
    bias: float
    mode: FusionMode


def _hinge_objective(w, b, Z, y, lam) -> float:
    return float(0.5 * lam * (w @ w) + np.mean(np.maximum(0.0, 1.0 - y * (Z @ w + b))))


def fusion_fit(
    scores,
    labels: Sequence[bool],
    c: float = 1.0,
    mode: FusionMode = FusionMode.AVERAGE,
    iters: int = 1000,
) -> FusionModel:
    """
    Learn score fusion weights.

    Average mode returns equal weights and zero bias. Linear mode minimizes the
    L2-regularized hinge loss (λ = 1/(c·n)) on standardized scores by full-batch
    projected subgradient descent with step 1/(λt), keeping the best iterate.

    Raises:
        DimensionError: If scores are not (n, k) with k ≥ 1 or labels mismatch
        DegenerateTrainingError: If linear mode sees a single class
    """
    S = _as_matrix(np.asarray(scores, dtype=np.float64), "scores")
    n, k = S.shape
    if k < 1:
        raise DimensionError("Fusion needs at least one scorer")
    mode = FusionMode(mode)
    if mode == FusionMode.AVERAGE:
        return FusionModel(weights=np.full(k, 1.0 / k), bias=0.0, mode=mode)

    y = np.where(np.asarray(labels, dtype=bool), 1.0, -1.0)
    if y.shape != (n,):
        raise DimensionError(f"Got {y.shape[0]} labels for {n} score rows")
    if np.all(y > 0) or np.all(y < 0):
        raise DegenerateTrainingError("Linear fusion needs both same and different pairs")
    if c <= 0:
        raise DimensionError(f"Cost c must be positive, got {c}")

    mu = S.mean(axis=0)
    sd = S.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (S - mu) / sd

    lam = 1.0 / (c * n)
    radius = 1.0 / np.sqrt(lam)
    w = np.zeros(k)
    b = 0.0
    best = (_hinge_objective(w, b, Z, y, lam), w.copy(), b)
    for t in range(1, iters + 1):
        eta = 1.0 / (lam * t)
        active = y * (Z @ w + b) < 1.0
        grad_w = lam * w - (y[active] @ Z[active]) / n
        grad_b = -float(np.sum(y[active])) / n
        w = w - eta * grad_w
        b = b - eta * grad_b
        norm = np.linalg.norm(w)
        if norm > radius:
            w = w * (radius / norm)
        obj = _hinge_objective(w, b, Z, y, lam)
        if obj < best[0]:
            best = (obj, w.copy(), b)

    _, w, b = best
    weights = w / sd
    bias = float(b - weights @ mu)
    logger.info(f"Linear fusion fitted on {n} pairs: objective {best[0]:.6f}")
    return FusionModel(weights=weights, bias=bias, mode=mode)


def fusion_score(m: FusionModel, s) -> np.ndarray | float:
    """Fused score of one (k,) score vector, or of every row of an (n, k) matrix."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != m.weights.shape[0]:
        raise DimensionError(f"Expected {m.weights.shape[0]} scores, got {s.shape[-1]}")
    out = s @ m.weights + m.bias
    return float(out) if out.ndim == 0 else out
