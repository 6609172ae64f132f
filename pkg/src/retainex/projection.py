"""2-D embedding of patient contribution vectors for the overview
scatter: exact O(N^2) t-SNE, plus a deterministic PCA fallback.

The t-SNE path follows the classic recipe with fixed constants: per-point
bandwidths matched to the target perplexity by binary search (entropy
tolerance 1e-5), early exaggeration 12 for the first 250 iterations,
learning rate 200, momentum 0.5 switching to 0.8 after iteration 250, and
a seeded Gaussian init scaled by 1e-4. Runs are deterministic given the
seed. Input size is capped by the caller (the service rejects N > 5000).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .numerics import ArgumentError, NumericError, make_rng

__all__ = ["ProjectionConfig", "Embedding2D", "pca_2d", "tsne_2d", "project"]

_EXAGGERATION = 12.0
_EXAGGERATION_ITERS = 250
_LEARNING_RATE = 200.0
_MOMENTUM_EARLY = 0.5
_MOMENTUM_LATE = 0.8
_INIT_SCALE = 1e-4
_PCA_TOL = 1e-10
_PCA_MAX_ITER = 10_000


@dataclass(frozen=True)
class ProjectionConfig:
    method: str = "tsne"
    perplexity: float = 30.0
    iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("pca", "tsne"):
            raise ArgumentError(f"method must be pca or tsne, got {self.method!r}")
        if self.perplexity <= 0:
            raise ArgumentError("perplexity must be positive")
        if self.iterations < 250:
            raise ArgumentError("need at least 250 iterations")

    def key(self) -> tuple:
        return (self.method, self.perplexity, self.iterations, self.seed)


@dataclass
class Embedding2D:
    points: np.ndarray  # (N, 2)
    method: str
    config: ProjectionConfig

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.points]


def _deflate(w: np.ndarray, ortho: list[np.ndarray]) -> np.ndarray:
    # two Gram-Schmidt passes: one pass leaves a rounding residue of the
    # removed directions that dominates once the true residual is at the
    # noise floor (rank-deficient data)
    for _ in range(2):
        for u in ortho:
            w = w - (w @ u) * u
    return w


def _power_iteration(
    matvec, dim: int, ortho: list[np.ndarray], lam_ref: float = 0.0
) -> tuple[np.ndarray, float]:
    """Dominant eigenvector of a PSD operator, deflated against the
    directions in ``ortho``. Deterministic fixed start. When the residual
    eigenvalue is negligible relative to ``lam_ref`` the data has no
    variance left in this subspace and any orthonormal completion is
    returned."""
    v = np.full(dim, 1.0 / math.sqrt(dim))
    # fixed perturbation so the start is never exactly orthogonal to the target
    v += 1e-3 * np.cos(np.arange(dim))
    v = _deflate(v, ortho)
    norm = np.linalg.norm(v)
    if norm <= 1e-300:
        v = _deflate(np.eye(dim)[0], ortho)
        norm = np.linalg.norm(v)
    v /= norm
    lam = 0.0
    for _ in range(_PCA_MAX_ITER):
        w = _deflate(matvec(v), ortho)
        norm = np.linalg.norm(w)
        if norm <= max(1e-300, 1e-12 * lam_ref):
            return v, 0.0  # no variance left beyond rounding noise
        w /= norm
        lam = float(w @ matvec(w))
        if np.linalg.norm(w - v) < _PCA_TOL or np.linalg.norm(w + v) < _PCA_TOL:
            v = w
            break
        v = w
    return v, lam


def pca_2d(vectors: np.ndarray) -> Embedding2D:
    """Mean-centered projection onto the top-2 principal directions, found
    by power iteration with deflation (tolerance 1e-10). Sign convention:
    the largest-magnitude loading of each direction is positive, so two
    runs are bitwise equal."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ArgumentError("pca_2d needs at least two input vectors")
    Xc = X - X.mean(axis=0)
    n = X.shape[0]

    def cov_matvec(v):
        return Xc.T @ (Xc @ v) / n

    dirs = []
    lam_ref = 0.0
    for _ in range(2):
        u, lam = _power_iteration(cov_matvec, X.shape[1], dirs, lam_ref)
        lam_ref = max(lam_ref, lam)
        pivot = int(np.argmax(np.abs(u)))
        if u[pivot] < 0:
            u = -u
        dirs.append(u)
    pts = np.stack([Xc @ d for d in dirs], axis=1)
    cfg = ProjectionConfig(method="pca")
    return Embedding2D(points=pts, method="pca", config=cfg)


def tsne_2d(vectors: np.ndarray, config: ProjectionConfig | None = None) -> Embedding2D:
    config = config or ProjectionConfig()
    X = np.asarray(vectors, dtype=np.float64)
    n = X.shape[0]
    if X.ndim != 2 or n < 4:
        raise ArgumentError("tsne_2d needs at least four input vectors")
    if config.perplexity >= (n - 1) / 3:
        raise ArgumentError(
            f"perplexity {config.perplexity} infeasible for {n} points "
            f"(needs perplexity < (N-1)/3)"
        )
    sq = (X * X).sum(axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
    cond = kernels.binary_search_affinities(
        np.ascontiguousarray(D2), math.log(config.perplexity), 1e-5, 100
    )
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, 1e-300)
    np.fill_diagonal(P, 0.0)

    Y = _INIT_SCALE * make_rng(config.seed).standard_normal((n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    P_run = P * _EXAGGERATION
    for it in range(config.iterations):
        if it == _EXAGGERATION_ITERS:
            P_run = P
        momentum = _MOMENTUM_EARLY if it < _EXAGGERATION_ITERS else _MOMENTUM_LATE
        check = (it + 1) % 50 == 0
        grad, kl = kernels.tsne_forces(np.ascontiguousarray(P_run), Y, check)
        if check and not np.isfinite(kl):
            raise NumericError(f"t-SNE objective became non-finite at iteration {it}")
        # classic adaptive per-coordinate gains
        inc = (update * grad) < 0.0
        gains[inc] += 0.2
        gains[~inc] *= 0.8
        np.clip(gains, 0.01, None, out=gains)
        update = momentum * update - _LEARNING_RATE * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
    if not np.all(np.isfinite(Y)):
        raise NumericError("t-SNE produced non-finite coordinates")
    return Embedding2D(points=Y, method="tsne", config=config)


def project(vectors: np.ndarray, config: ProjectionConfig) -> Embedding2D:
    if config.method == "pca":
        emb = pca_2d(vectors)
        return Embedding2D(points=emb.points, method="pca", config=config)
    return tsne_2d(vectors, config)
