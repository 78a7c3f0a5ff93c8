"""Single-layer dictionary learning.

Data ``X`` is ``(m, N)`` with samples as columns, dictionaries ``D`` are
``(m, n)`` with atoms as columns and codes ``Z`` are ``(n, N)``.

Two trainers are provided: a dense one (method of optimal directions,
alternating exact least squares) and a sparse one minimizing

    ||X - D Z||_F^2 + lam * ||Z||_1

by alternating ISTA coding with a least-squares dictionary update. There is
no randomness anywhere: the dictionary is initialised from a QR
factorization of the data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from deepdict.exceptions import DegenerateDataError, DimensionError

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12
RIDGE_COND = 1e12
RIDGE_SCALE = 1e-8
POWER_TOL = 1e-9
POWER_MAXITER = 1000


@dataclass(frozen=True)
class LayerTrainConfig:
    """Hyperparameters of one layer.

    ``step_safety`` multiplies the estimated Lipschitz constant
    ``sigma_max(D)**2`` to give the ISTA step parameter ``alpha``.
    """

    n_atoms: int
    outer_iters: int = 10
    ista_iters: int = 50
    lam: float = 0.1
    rel_tol: float = 1e-4
    step_safety: float = 1.01

    def __post_init__(self):
        for name in ("n_atoms", "outer_iters", "ista_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")
        if self.rel_tol < 0:
            raise ValueError(f"rel_tol must be non-negative, got {self.rel_tol}")
        if not self.step_safety > 1:
            raise ValueError(f"step_safety must be > 1, got {self.step_safety}")


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def objective(D, Z, X, lam: float = 0.0) -> float:
    """``||X - D Z||_F^2 + lam * ||Z||_1``."""
    R = X - D @ Z
    value = float(np.einsum("ij,ij->", R, R))
    if lam:
        value += lam * float(np.abs(Z).sum())
    return value


def qr_init(X, n_atoms: int) -> np.ndarray:
    """First ``n_atoms`` columns of Q in the thin QR factorization of ``X``.

    Signs are fixed so that the diagonal of R is non-negative.
    """
    X = _as_matrix(X, "X")
    m, N = X.shape
    if not 1 <= n_atoms <= min(m, N):
        raise DimensionError(
            f"n_atoms={n_atoms} must lie in [1, min(m, N)] = [1, {min(m, N)}] "
            f"for data of shape {X.shape}"
        )
    # Householder QR is column-sequential: the leading n_atoms columns of Q
    # only depend on the leading n_atoms columns of X.
    Q, R = np.linalg.qr(X[:, :n_atoms], mode="reduced")
    diag = np.diag(R)
    scale = max(1.0, float(np.abs(X[:, :n_atoms]).max()))
    if np.any(np.abs(diag) <= RANK_TOL * scale):
        k = int(np.argmax(np.abs(diag) <= RANK_TOL * scale))
        raise DegenerateDataError(
            f"data is rank deficient: R[{k},{k}] = {diag[k]:.3e} in the QR "
            f"initialization of {n_atoms} atoms"
        )
    signs = np.where(diag < 0, -1.0, 1.0)
    return np.ascontiguousarray(Q * signs)


def _solve_gram(G: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``G Y = B`` for a symmetric PSD Gram matrix ``G``.

    A small ridge is added when ``G`` is badly conditioned.
    """
    n = G.shape[0]
    eig = np.linalg.eigvalsh(G)
    top, bottom = eig[-1], eig[0]
    if top <= 0 or bottom <= top / RIDGE_COND:
        eps = RIDGE_SCALE * np.trace(G) / n
        if eps <= 0:
            raise DegenerateDataError("all-zero Gram matrix in least-squares solve")
        logger.debug("ridge fallback on a %dx%d Gram matrix, eps=%.3e", n, n, eps)
        G = G + eps * np.eye(n)
    return np.linalg.solve(G, B)


def solve_coefficients_dense(D, X) -> np.ndarray:
    """Least-squares codes ``argmin_Z ||X - D Z||_F``."""
    D = _as_matrix(D, "D")
    X = _as_matrix(X, "X")
    if D.shape[0] != X.shape[0]:
        raise DimensionError(f"D has {D.shape[0]} rows but X has {X.shape[0]}")
    return _solve_gram(D.T @ D, D.T @ X)


def update_dictionary(Z, X, previous=None) -> np.ndarray:
    """Least-squares dictionary ``argmin_D ||X - D Z||_F``.

    Atoms whose code row is entirely zero are not determined by the data;
    they are copied from ``previous`` when it is given (zeros otherwise).
    """
    Z = _as_matrix(Z, "Z")
    X = _as_matrix(X, "X")
    if Z.shape[1] != X.shape[1]:
        raise DimensionError(f"Z has {Z.shape[1]} columns but X has {X.shape[1]}")
    n = Z.shape[0]
    if previous is not None:
        previous = _as_matrix(previous, "previous")
        if previous.shape != (X.shape[0], n):
            raise DimensionError(
                f"previous dictionary has shape {previous.shape}, "
                f"expected {(X.shape[0], n)}"
            )

    live = np.any(Z != 0, axis=1)
    D = np.zeros((X.shape[0], n)) if previous is None else previous.copy()
    if not live.any():
        logger.warning("all %d atoms are dead; dictionary left unchanged", n)
        return D
    if not live.all():
        logger.warning("%d dead atom(s) carried over unchanged", int((~live).sum()))
    Zl = Z[live]
    D[:, live] = _solve_gram(Zl @ Zl.T, Zl @ X.T).T
    return D


def soft_threshold(B, t: float) -> np.ndarray:
    """Elementwise ``sign(b) * max(0, |b| - t)``."""
    if t < 0:
        raise ValueError(f"threshold must be non-negative, got {t}")
    B = np.asarray(B, dtype=np.float64)
    return np.sign(B) * np.maximum(np.abs(B) - t, 0.0)


def estimate_step(D, safety: float = 1.01) -> float:
    """ISTA step parameter ``safety * sigma_max(D)**2``.

    ``sigma_max`` comes from power iteration on ``D.T @ D``, started from a
    fixed vector so the result is reproducible.
    """
    D = _as_matrix(D, "D")
    if not np.any(D):
        raise DegenerateDataError("cannot estimate the step of an all-zero dictionary")
    n = D.shape[1]
    v = 1.0 + np.arange(n, dtype=np.float64) / n
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(POWER_MAXITER):
        w = D.T @ (D @ v)
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector in the null space; fall back to a basis vector
            v = np.zeros(n)
            v[int(np.argmax(np.linalg.norm(D, axis=0)))] = 1.0
            continue
        v = w / norm
        if abs(new - sigma2) <= POWER_TOL * abs(new):
            sigma2 = new
            break
        sigma2 = new
    # one more Rayleigh quotient with the converged vector
    sigma2 = max(sigma2, float(v @ (D.T @ (D @ v))))
    return safety * sigma2


def ista_sparse_code(D, X, lam: float, iters: int, Z0=None, alpha=None,
                     safety: float = 1.01) -> np.ndarray:
    """Sparse codes by ``iters`` sweeps of ISTA.

    Each sweep is ``B = Z + D.T (X - D Z) / alpha`` followed by
    ``Z = soft_threshold(B, lam / (2 alpha))``. Starts from ``Z0``
    (zeros by default). ``alpha`` defaults to ``estimate_step(D, safety)``.
    """
    D = _as_matrix(D, "D")
    X = _as_matrix(X, "X")
    if D.shape[0] != X.shape[0]:
        raise DimensionError(f"D has {D.shape[0]} rows but X has {X.shape[0]}")
    if lam < 0:
        raise ValueError(f"lam must be non-negative, got {lam}")
    if iters < 0:
        raise ValueError(f"iters must be non-negative, got {iters}")
    n, N = D.shape[1], X.shape[1]
    if Z0 is None:
        Z = np.zeros((n, N))
    else:
        Z = np.array(Z0, dtype=np.float64)
        if Z.shape != (n, N):
            raise DimensionError(f"Z0 has shape {Z.shape}, expected {(n, N)}")
    if not np.any(D):
        # nothing can be synthesized; the l1 term drives every code to zero
        return np.zeros((n, N))
    if alpha is None:
        alpha = estimate_step(D, safety)

    # precomputed Gram form of the gradient step
    G = D.T @ D
    DtX = D.T @ X
    t = lam / (2.0 * alpha)
    for _ in range(iters):
        B = Z + (DtX - G @ Z) / alpha
        Z = np.sign(B) * np.maximum(np.abs(B) - t, 0.0)
    return Z


def normalize_columns(D, Z) -> tuple[np.ndarray, np.ndarray]:
    """Scale atoms to unit norm and rescale code rows so ``D @ Z`` is kept.

    Zero atoms are left untouched.
    """
    D = _as_matrix(D, "D")
    Z = _as_matrix(Z, "Z")
    if D.shape[1] != Z.shape[0]:
        raise DimensionError(f"D has {D.shape[1]} atoms but Z has {Z.shape[0]} rows")
    norms = np.linalg.norm(D, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    return D / scale, Z * scale[:, None]


def train_layer_dense(X, cfg: LayerTrainConfig, history: list | None = None):
    """Dense dictionary learning by alternating least squares.

    Starts from :func:`qr_init`, then alternates dictionary and coefficient
    updates until ``cfg.outer_iters`` rounds are done or the relative
    decrease of ``||X - D Z||_F^2`` drops below ``cfg.rel_tol``.

    If ``history`` is a list, the objective after every half-step is
    appended to it. Returns ``(D, Z)``; ``Z`` is the exact least-squares
    solve against the returned ``D``.
    """
    X = _as_matrix(X, "X")
    D = qr_init(X, cfg.n_atoms)
    Z = solve_coefficients_dense(D, X)
    prev = objective(D, Z, X)
    if history is not None:
        history.append(prev)
    for it in range(cfg.outer_iters):
        D = update_dictionary(Z, X, previous=D)
        if history is not None:
            history.append(objective(D, Z, X))
        Z = solve_coefficients_dense(D, X)
        obj = objective(D, Z, X)
        if history is not None:
            history.append(obj)
        logger.debug("dense round %d: objective %.6e", it, obj)
        if prev == 0.0 or (prev - obj) / prev < cfg.rel_tol:
            break
        prev = obj
    return D, Z


def train_layer_sparse(X, cfg: LayerTrainConfig, history: list | None = None):
    """Sparse dictionary learning: ISTA coding alternated with LS updates.

    Each round warm-starts ISTA from the previous codes, updates the
    dictionary by least squares and normalizes the atoms. Rescaling the
    codes during normalization can raise the l1 term; a round whose updated
    dictionary would increase the composite objective keeps the previous
    dictionary instead, so the objective never goes up between rounds.

    If ``history`` is a list, the composite objective at the end of every
    round is appended (the first entry is the starting point ``Z = 0``).
    """
    X = _as_matrix(X, "X")
    m, N = X.shape
    if not 1 <= cfg.n_atoms <= min(m, N):
        raise DimensionError(
            f"n_atoms={cfg.n_atoms} must lie in [1, {min(m, N)}] for data of shape {X.shape}"
        )
    D = qr_init(X, cfg.n_atoms) if np.any(X) else np.eye(m, cfg.n_atoms)
    Z = np.zeros((cfg.n_atoms, N))
    if history is not None:
        history.append(objective(D, Z, X, cfg.lam))
    for it in range(cfg.outer_iters):
        Z = ista_sparse_code(D, X, cfg.lam, cfg.ista_iters, Z0=Z,
                             safety=cfg.step_safety)
        coded = objective(D, Z, X, cfg.lam)
        D_new, Z_new = normalize_columns(update_dictionary(Z, X, previous=D), Z)
        obj = objective(D_new, Z_new, X, cfg.lam)
        if obj <= coded:
            D, Z = D_new, Z_new
        else:
            logger.debug("sparse round %d: update rejected (%.6e > %.6e)", it, obj, coded)
            obj = coded
        if history is not None:
            history.append(obj)
        logger.debug("sparse round %d: objective %.6e", it, obj)
    return D, Z
