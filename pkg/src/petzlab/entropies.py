"""Entropic functionals: von Neumann and relative entropies, CMI, fidelity,
max- and measured relative entropy.

All logarithms are natural (nats) unless a function says otherwise. Relative
entropies that are infinite because of a support violation are returned as
``math.inf`` rather than raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .channels import make_rng, partial_trace, random_unitary
from .errors import DomainError, ShapeError
from .linalg import (
    EPS,
    _eigh,
    dag,
    default_rank_tol,
    hermitian,
    inv_sqrt_support,
    is_psd,
    log_support,
    sqrt_psd,
    support_contained,
)

SUPPORT_TOL = 1e-9
LN2 = math.log(2.0)


def _eigvals_on_support(rho: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(rho)
    return w[w > default_rank_tol(w, len(w))]


def von_neumann_entropy(rho) -> float:
    """``-tr(rho log rho)`` in nats."""
    lam = _eigvals_on_support(hermitian(rho, "rho"))
    return float(-np.sum(lam * np.log(lam)))


def relative_entropy(rho, sigma, tol: float = SUPPORT_TOL) -> float:
    """``tr(rho (log rho - log sigma))``, or ``inf`` if ``supp(rho)`` is not inside ``supp(sigma)``."""
    rho, sigma = hermitian(rho, "rho"), hermitian(sigma, "sigma")
    if not support_contained(rho, sigma, tol):
        return math.inf
    lam = _eigvals_on_support(rho)
    return float(np.sum(lam * np.log(lam)) - np.trace(rho @ log_support(sigma)).real)


def cmi(rho, dims: Sequence[int]) -> float:
    """Conditional mutual information ``I(A:C|B) = H(AB) + H(BC) - H(ABC) - H(B)``."""
    if len(dims) != 3:
        raise ShapeError(f"conditional mutual information needs three subsystems, got dims {list(dims)}")
    rho = hermitian(rho, "rho")
    h = von_neumann_entropy
    return (
        h(partial_trace(rho, dims, [0, 1]))
        + h(partial_trace(rho, dims, [1, 2]))
        - h(rho)
        - h(partial_trace(rho, dims, [1]))
    )


def fidelity(rho, sigma, tol: float = SUPPORT_TOL) -> float:
    """``|| sqrt(rho) sqrt(sigma) ||_1`` (not squared)."""
    rho, sigma = hermitian(rho, "rho"), hermitian(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ShapeError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    if not (is_psd(rho, tol) and is_psd(sigma, tol)):
        raise DomainError("fidelity is defined for PSD operators only")
    return float(np.sum(np.linalg.svd(sqrt_psd(rho) @ sqrt_psd(sigma), compute_uv=False)))


def fidelity_bound(rho, sigma) -> float:
    """``-2 log F(rho, sigma)`` in nats (``inf`` for orthogonal supports)."""
    f = fidelity(rho, sigma)
    return math.inf if f <= 0.0 else -2.0 * math.log(f)


def max_relative_entropy(rho, sigma, base: str = "bits", tol: float = SUPPORT_TOL) -> float:
    """``inf{g : rho <= 2^g sigma}``; returned in bits, or nats with ``base="nats"``."""
    if base not in ("bits", "nats"):
        raise ValueError("base must be 'bits' or 'nats'")
    rho, sigma = hermitian(rho, "rho"), hermitian(sigma, "sigma")
    if not support_contained(rho, sigma, tol):
        return math.inf
    s = inv_sqrt_support(sigma)
    lam_max = float(np.linalg.eigvalsh(hermitian(s @ rho @ s))[-1])
    if lam_max <= 0.0:
        return -math.inf
    return math.log2(lam_max) if base == "bits" else math.log(lam_max)


# --- measured relative entropy -------------------------------------------


def _herm_basis_coords(h: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in a Hilbert-Schmidt orthonormal basis."""
    iu = np.triu_indices(len(h), 1)
    off = h[iu] * math.sqrt(2.0)
    return np.concatenate([np.diag(h).real, off.real, off.imag])


def _herm_from_coords(x: np.ndarray, d: int) -> np.ndarray:
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    h = np.zeros((d, d), dtype=complex)
    h[iu] = (x[d:d + m] + 1j * x[d + m:]) / math.sqrt(2.0)
    h = h + dag(h)
    h[np.diag_indices(d)] = x[:d]
    return h


def exp_divided_differences(h: np.ndarray) -> np.ndarray:
    """Matrix of first divided differences of ``exp`` at the points ``h``."""
    a, b = h[:, None], h[None, :]
    diff = a - b
    close = np.abs(diff) < 1e-8 * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    with np.errstate(all="ignore"):
        # (e^a - e^b)/(a - b) = e^b * expm1(a - b)/(a - b), stable for moderate gaps
        out = np.where(close, np.exp(0.5 * (a + b)), np.exp(b) * np.expm1(diff) / np.where(close, 1.0, diff))
    return out


def variational_objective(h, rho, sigma) -> float:
    """``tr(rho H) + 1 - tr(sigma exp(H))`` for Hermitian ``H``."""
    w, v = _eigh(hermitian(h))
    with np.errstate(over="ignore"):
        ew = np.exp(w)
    sig_diag = np.einsum("ij,jk,ki->i", dag(v), sigma, v).real
    return float(np.trace(rho @ h).real + 1.0 - np.dot(sig_diag, ew))


def variational_gradient(h, rho, sigma) -> np.ndarray:
    """Gradient ``rho - Gamma_H(sigma)`` of :func:`variational_objective` (Hilbert-Schmidt metric)."""
    w, v = _eigh(hermitian(h))
    sig_t = dag(v) @ sigma @ v
    return rho - v @ (sig_t * exp_divided_differences(w)) @ dag(v)


def _value_and_grad(h, rho, sigma):
    w, v = _eigh(h)
    sig_t = dag(v) @ sigma @ v
    with np.errstate(over="ignore", invalid="ignore"):
        value = float(np.trace(rho @ h).real + 1.0 - np.dot(np.diag(sig_t).real, np.exp(w)))
        grad = rho - v @ (sig_t * exp_divided_differences(w)) @ dag(v)
    return value, grad


@dataclass
class MeasuredRelEntResult:
    """Outcome of the variational D_M solver.

    ``value`` is the objective at ``witness`` and hence always a lower bound on
    the measured relative entropy. ``log_witness`` is ``log(witness)``
    restricted to the support of ``sigma`` (useful as a warm start).
    """

    value: float
    witness: Optional[np.ndarray]
    iterations: int
    converged: bool
    gradient_norm: float
    log_witness: Optional[np.ndarray] = None
    history: list = field(default_factory=list, repr=False)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


@dataclass
class MeasuredRelEntOptions:
    gtol: float = 1e-8
    max_iter: int = 2000
    initial: Optional[np.ndarray] = None
    record_history: bool = False
    support_tol: float = SUPPORT_TOL


def _compress_to_support(rho, sigma):
    w, v = _eigh(sigma)
    keep = w > default_rank_tol(w, len(w))
    basis = v[:, keep]
    return basis, dag(basis) @ rho @ basis, dag(basis) @ sigma @ basis


def _floored_log(a: np.ndarray, floor: float) -> np.ndarray:
    w, v = _eigh(a)
    return (v * np.log(np.maximum(w, floor))) @ dag(v)


def measured_relative_entropy(rho, sigma, opts: MeasuredRelEntOptions | None = None, **kwargs) -> MeasuredRelEntResult:
    """Measured relative entropy via ``sup_H tr(rho H) + 1 - tr(sigma e^H)``.

    The objective is concave in ``H``; it is maximized by BFGS ascent with an
    Armijo backtracking line search on the real coordinates of ``H`` after
    compressing both operators onto the support of ``sigma``. Keyword
    arguments override fields of ``opts``.
    """
    opts = replace(opts or MeasuredRelEntOptions(), **kwargs)
    rho, sigma = hermitian(rho, "rho"), hermitian(sigma, "sigma")
    if not support_contained(rho, sigma, opts.support_tol):
        return MeasuredRelEntResult(math.inf, None, 0, True, 0.0)

    basis, r, s = _compress_to_support(rho, sigma)
    d = len(r)
    if opts.initial is not None and opts.initial.shape == (d, d):
        h = hermitian(opts.initial)
    else:
        floor = default_rank_tol(np.linalg.eigvalsh(rho), len(rho))
        floor = max(floor, EPS * d * float(np.linalg.eigvalsh(s)[-1]))
        h = _floored_log(r, floor) - _floored_log(s, floor)

    value, grad = _value_and_grad(h, r, s)
    x = _herm_basis_coords(h)
    g = _herm_basis_coords(grad)
    history = [value] if opts.record_history else []
    inv_hess = np.eye(len(x))
    scaled = False
    it = 0
    converged = bool(np.linalg.norm(g) <= opts.gtol)
    while not converged and it < opts.max_iter:
        it += 1
        p = inv_hess @ g  # ascent direction
        slope = float(g @ p)
        if slope <= 0 or not np.all(np.isfinite(p)):
            inv_hess = np.eye(len(x))
            p, slope = g.copy(), float(g @ g)
        t = 1.0
        g_norm = np.linalg.norm(g)
        for _ in range(60):
            x_new = x + t * p
            h_new = _herm_from_coords(x_new, d)
            v_new, grad_new = _value_and_grad(h_new, r, s)
            if np.isfinite(v_new) and v_new >= value + 1e-4 * t * slope:
                g_new = _herm_basis_coords(grad_new)
                break
            # near the optimum the objective stops resolving progress; fall back to the gradient norm
            if np.isfinite(v_new) and v_new >= value - 8 * EPS * max(1.0, abs(value)):
                g_new = _herm_basis_coords(grad_new)
                if np.linalg.norm(g_new) < g_norm:
                    break
            t *= 0.5
        else:
            break
        step, dy = x_new - x, g - g_new  # dy: change of the gradient of the negated objective
        sy = float(step @ dy)
        if sy > 1e-14 * np.linalg.norm(step) * np.linalg.norm(dy):
            if not scaled:
                inv_hess = np.eye(len(x)) * sy / float(dy @ dy)
                scaled = True
            rho_k = 1.0 / sy
            hy = inv_hess @ dy
            inv_hess = (
                inv_hess
                - rho_k * (np.outer(step, hy) + np.outer(hy, step))
                + (rho_k * rho_k * float(dy @ hy) + rho_k) * np.outer(step, step)
            )
        x, g, h, value, grad = x_new, g_new, h_new, v_new, grad_new
        if opts.record_history:
            history.append(value)
        converged = bool(np.linalg.norm(g) <= opts.gtol)

    w, v = _eigh(h)
    omega_c = (v * np.exp(w)) @ dag(v)
    outside = np.eye(len(rho)) - basis @ dag(basis)
    witness = basis @ omega_c @ dag(basis) + outside
    return MeasuredRelEntResult(
        value=value,
        witness=witness,
        iterations=it,
        converged=converged,
        gradient_norm=float(np.linalg.norm(g)),
        log_witness=h,
        history=history,
    )


def witness_value(omega, rho, sigma) -> float:
    """``tr(rho log omega) + 1 - tr(sigma omega)`` for a positive definite witness."""
    omega = hermitian(omega, "omega")
    w, v = _eigh(omega)
    if w[0] <= 0:
        raise DomainError(f"witness must be positive definite (smallest eigenvalue {w[0]!r})")
    log_omega = (v * np.log(w)) @ dag(v)
    return float(np.trace(rho @ log_omega).real + 1.0 - np.trace(sigma @ omega).real)


def classical_relative_entropy(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def measured_relative_entropy_in_basis(rho, sigma, basis) -> float:
    """Relative entropy of the outcome distributions of a rank-one projective measurement.

    ``basis`` holds the measurement vectors as columns.
    """
    p = np.clip(np.einsum("ji,jk,ki->i", basis.conj(), rho, basis).real, 0.0, None)
    q = np.clip(np.einsum("ji,jk,ki->i", basis.conj(), sigma, basis).real, 0.0, None)
    return classical_relative_entropy(p, q)


def measured_rel_ent_bruteforce(rho, sigma, rng=None, trials: int = 200) -> float:
    """Best measured relative entropy over random and distinguished orthonormal bases.

    Candidates are ``trials`` Haar-random bases plus the eigenbases of ``rho``,
    ``sigma`` and ``log rho - log sigma`` (eigenvalues floored). Each value is
    a lower bound on the measured relative entropy.
    """
    rho, sigma = hermitian(rho, "rho"), hermitian(sigma, "sigma")
    d = len(rho)
    if d > 6:
        raise ShapeError("brute-force measurement search is limited to dimension <= 6")
    rng = make_rng(0) if rng is None else rng
    floor = max(default_rank_tol(np.linalg.eigvalsh(rho), d), default_rank_tol(np.linalg.eigvalsh(sigma), d), 1e-300)
    candidates = [
        np.linalg.eigh(rho)[1],
        np.linalg.eigh(sigma)[1],
        np.linalg.eigh(hermitian(_floored_log(rho, floor) - _floored_log(sigma, floor)))[1],
    ]
    candidates += [random_unitary(d, rng) for _ in range(trials)]
    return max(measured_relative_entropy_in_basis(rho, sigma, b) for b in candidates)
