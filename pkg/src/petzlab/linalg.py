"""Dense Hermitian linear algebra.

Operators are plain complex ``numpy`` arrays. Functions that need a Hermitian
input pass it through :func:`hermitian`, which symmetrizes small asymmetries
and rejects anything that is clearly not self-adjoint.

Support cutoff: an eigenvalue ``lam`` counts as zero iff
``lam <= dim * eps * lam_max`` unless an explicit ``rank_tol`` is given.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ComputationError, DomainError, ShapeError

EPS = np.finfo(float).eps
HERMITICITY_REJECT = 1e-8
DEFAULT_CLUSTER_TOL = 1e-8


def hermitian(a, name: str = "operator") -> np.ndarray:
    """Return ``(a + a^dagger) / 2`` as a complex array after validating ``a``.

    Raises ``ShapeError`` for non-square input and ``DomainError`` if the
    anti-Hermitian part exceeds ``1e-8`` relative to the largest entry.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name} must be a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    asym = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if asym > HERMITICITY_REJECT * scale:
        raise DomainError(f"{name} is not Hermitian (max |A - A^dagger| = {asym:.3e})")
    return 0.5 * (a + a.conj().T)


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def default_rank_tol(eigenvalues, dim: int) -> float:
    lam_max = float(np.max(eigenvalues)) if len(eigenvalues) else 0.0
    return dim * EPS * max(lam_max, 0.0)


def _eigh(a: np.ndarray):
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise ComputationError("eigensolver returned non-finite eigenvalues")
    return w, v


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues (strictly decreasing) with orthogonal eigenprojectors.

    ``bases[k]`` holds an orthonormal basis (columns) of the ``k``-th
    eigenspace, so ``projectors[k] == bases[k] @ bases[k].conj().T``.
    """

    eigenvalues: np.ndarray
    bases: tuple
    cluster_width: float

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]

    @property
    def projectors(self) -> list[np.ndarray]:
        return [b @ b.conj().T for b in self.bases]

    @property
    def multiplicities(self) -> list[int]:
        return [b.shape[1] for b in self.bases]

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for lam, b in zip(self.eigenvalues, self.bases):
            out += lam * (b @ b.conj().T)
        return out


def spectral_decompose(h, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian operator with eigenvalue clustering.

    Sorted eigenvalues closer than ``cluster_tol * (1 + |lam_max|)`` to their
    neighbour are merged into one distinct eigenvalue (their mean) whose
    projector is the sum of the individual ones.
    """
    if cluster_tol < 0:
        raise DomainError("cluster_tol must be non-negative")
    h = hermitian(h)
    w, v = _eigh(h)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    width = cluster_tol * (1.0 + float(np.max(np.abs(w))))

    groups: list[list[int]] = [[0]]
    for i in range(1, len(w)):
        if w[groups[-1][-1]] - w[i] <= width:
            groups[-1].append(i)
        else:
            groups.append([i])
    eigenvalues = np.array([float(np.mean(w[g])) for g in groups])
    bases = tuple(v[:, g] for g in groups)
    return SpectralDecomposition(eigenvalues, bases, width)


def matrix_function(
    spec: SpectralDecomposition,
    f: Callable[[np.ndarray], np.ndarray],
    on_support_only: bool = False,
    rank_tol: float | None = None,
) -> np.ndarray:
    """Return ``sum_k f(lam_k) P_k``.

    With ``on_support_only`` the eigenvalues at or below the support cutoff
    are skipped entirely, so e.g. ``f = x**-0.5`` yields the Moore-Penrose
    inverse square root.
    """
    lam = np.asarray(spec.eigenvalues, dtype=float)
    keep = np.ones(len(lam), dtype=bool)
    if on_support_only:
        tol = default_rank_tol(lam, spec.dim) if rank_tol is None else rank_tol
        keep = lam > tol
    vals = _evaluate(f, lam[keep])
    out = np.zeros((spec.dim, spec.dim), dtype=complex)
    for val, b in zip(vals, (b for b, k in zip(spec.bases, keep) if k)):
        out += val * (b @ b.conj().T)
    return out


def _evaluate(f, lam: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = np.asarray(f(lam), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise DomainError(f"function undefined at eigenvalue {lam[bad][0]!r}")
    return vals


def funm(h, f, on_support_only: bool = False, rank_tol: float | None = None) -> np.ndarray:
    """Matrix function straight from ``eigh`` (no clustering); the fast path."""
    h = hermitian(h)
    w, v = _eigh(h)
    if on_support_only:
        tol = default_rank_tol(w, len(w)) if rank_tol is None else rank_tol
        keep = w > tol
        w, v = w[keep], v[:, keep]
    vals = _evaluate(f, w)
    return (v * vals) @ v.conj().T


def sqrt_psd(h) -> np.ndarray:
    return funm(h, np.sqrt, on_support_only=True)


def inv_sqrt_support(h) -> np.ndarray:
    return funm(h, lambda x: x ** -0.5, on_support_only=True)


def log_support(h) -> np.ndarray:
    return funm(h, np.log, on_support_only=True)


def support_projector(h, rank_tol: float | None = None) -> np.ndarray:
    return funm(h, np.ones_like, on_support_only=True, rank_tol=rank_tol)


def is_psd(h, tol: float = 1e-9) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol * (1 + ||h||)``."""
    w = np.linalg.eigvalsh(hermitian(h))
    norm = float(np.max(np.abs(w))) if len(w) else 0.0
    return bool(w[0] >= -tol * (1.0 + norm))


def support_contained(rho, sigma, tol: float = 1e-9) -> bool:
    """True iff ``supp(rho)`` lies inside ``supp(sigma)`` up to ``tol * tr(rho)``."""
    rho, sigma = hermitian(rho, "rho"), hermitian(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ShapeError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    if not is_psd(rho, tol) or not is_psd(sigma, tol):
        raise DomainError("support_contained requires PSD arguments")
    outside = np.eye(len(sigma)) - support_projector(sigma)
    leak = np.linalg.norm(outside @ rho @ outside, 2)
    return bool(leak <= tol * abs(np.trace(rho).real))


def op_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a), 2))
