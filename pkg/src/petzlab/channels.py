"""States, tensor products, partial traces and Kraus-form channels.

Composite systems use row-major indexing: the leftmost tensor factor is the
most significant index, matching ``numpy.kron``.
"""

from __future__ import annotations

import math
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError, ShapeError
from .linalg import dag, hermitian, is_psd

STATE_TOL = 1e-9


def tensor(*ops) -> np.ndarray:
    """Kronecker product of the given operators (leftmost most significant)."""
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, [np.asarray(op, dtype=complex) for op in ops])


def tensor_power(op, n: int) -> np.ndarray:
    if n < 1:
        raise ParameterError("tensor power requires n >= 1")
    return tensor(*([op] * n))


def validate_density(rho, dims: Sequence[int] | None = None, tol: float = STATE_TOL) -> np.ndarray:
    """Check that ``rho`` is a unit-trace PSD operator compatible with ``dims``."""
    rho = hermitian(rho, "density operator")
    if dims is not None and math.prod(dims) != len(rho):
        raise ShapeError(f"dims {list(dims)} do not multiply to {len(rho)}")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise DomainError(f"density operator has trace {np.trace(rho).real:.12g}")
    if not is_psd(rho, tol):
        raise DomainError("density operator is not positive semidefinite")
    return rho


def validate_nonnegative(sigma, tol: float = STATE_TOL) -> np.ndarray:
    sigma = hermitian(sigma, "non-negative operator")
    if not is_psd(sigma, tol):
        raise DomainError("operator is not positive semidefinite")
    return sigma


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep`` (indices into ``dims``)."""
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    keep = sorted(set(int(k) for k in keep))
    if not keep or any(k < 0 or k >= len(dims) for k in keep):
        raise ShapeError(f"invalid subsystem selection {keep} for dims {dims}")
    if math.prod(dims) != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"operator of shape {rho.shape} does not match dims {dims}")
    m = len(dims)
    traced = [i for i in range(m) if i not in keep]
    t = rho.reshape(dims + dims)
    # trace pairs from the highest index down so earlier axis numbers stay valid
    for offset, i in enumerate(sorted(traced, reverse=True)):
        cur = m - offset
        t = np.trace(t, axis1=i, axis2=i + cur)
    d_keep = math.prod(dims[k] for k in keep)
    return t.reshape(d_keep, d_keep)


class Channel:
    """Linear map in Kraus form, ``X -> sum_i K_i X K_i^dagger``.

    Construction checks trace preservation (``sum_i K_i^dagger K_i = I``)
    unless ``check=False``, which is only meant for building test maps.
    """

    def __init__(self, kraus, check: bool = True, tol: float = STATE_TOL):
        ops = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
        if not ops:
            raise ParameterError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise ShapeError("Kraus operators must share one shape")
        self.kraus = tuple(ops)
        self.dim_out, self.dim_in = shape
        if check:
            dev = np.max(np.abs(self.kraus_sum() - np.eye(self.dim_in)))
            if dev > tol:
                raise DomainError(f"Kraus operators are not trace preserving (deviation {dev:.3e})")

    def kraus_sum(self) -> np.ndarray:
        return sum(dag(k) @ k for k in self.kraus)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus)

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim_in, self.dim_in):
            raise ShapeError(f"channel expects {self.dim_in}x{self.dim_in} input, got {x.shape}")
        k = self.stacked
        return np.einsum("kij,jl,kml->im", k, x, k.conj())

    def adjoint(self, y) -> np.ndarray:
        """Apply the adjoint map ``Y -> sum_i K_i^dagger Y K_i``."""
        y = np.asarray(y, dtype=complex)
        if y.shape != (self.dim_out, self.dim_out):
            raise ShapeError(f"adjoint expects {self.dim_out}x{self.dim_out} input, got {y.shape}")
        k = self.stacked
        return np.einsum("kji,jl,klm->im", k.conj(), y, k)

    def choi(self) -> np.ndarray:
        return choi_matrix(self.kraus)

    def is_completely_positive(self, tol: float = STATE_TOL) -> bool:
        return is_psd(self.choi(), tol)

    def tensor(self, other: "Channel") -> "Channel":
        return Channel([np.kron(a, b) for a in self.kraus for b in other.kraus], check=False)

    def power(self, n: int) -> "Channel":
        if n < 1:
            raise ParameterError("channel power requires n >= 1")
        return reduce(lambda a, b: a.tensor(b), [self] * n)

    def __repr__(self) -> str:
        return f"Channel(dim_in={self.dim_in}, dim_out={self.dim_out}, kraus_count={len(self.kraus)})"


def choi_matrix(kraus, signs=None) -> np.ndarray:
    """``(id (x) N)(|Omega><Omega|)`` for ``N(X) = sum_i s_i K_i X K_i^dagger``.

    ``|Omega> = sum_i |i>|i>`` is unnormalized. ``signs`` defaults to all +1;
    other values describe Hermiticity-preserving maps that need not be CP.
    """
    kraus = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
    signs = np.ones(len(kraus)) if signs is None else np.asarray(signs, dtype=float)
    d_out, d_in = kraus[0].shape
    out = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for s, k in zip(signs, kraus):
        # (I (x) K)|Omega> = sum_i |i> (x) K|i>
        v = k.T.reshape(-1)
        out += s * np.outer(v, v.conj())
    return out


def identity_channel(d: int) -> Channel:
    return Channel([np.eye(d)])


def unitary_channel(u) -> Channel:
    return Channel([u])


def depolarizing_channel(d: int) -> Channel:
    """Completely depolarizing channel with Kraus operators ``|i><j| / sqrt(d)``."""
    ops = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d))
            k[i, j] = 1.0 / math.sqrt(d)
            ops.append(k)
    return Channel(ops)


def dephasing_channel(d: int, p: float = 1.0) -> Channel:
    """Dephasing in the computational basis with strength ``p`` in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("dephasing strength must lie in [0, 1]")
    ops = [math.sqrt(1.0 - p) * np.eye(d)] if p < 1.0 else []
    for i in range(d):
        k = np.zeros((d, d))
        k[i, i] = math.sqrt(p)
        ops.append(k)
    return Channel(ops)


def partial_trace_channel(dims: Sequence[int], keep: Sequence[int]) -> Channel:
    """The partial trace over the complement of ``keep`` as a Kraus channel."""
    dims = [int(d) for d in dims]
    keep = sorted(set(keep))
    traced = [i for i in range(len(dims)) if i not in keep]
    if not keep or any(k < 0 or k >= len(dims) for k in keep):
        raise ShapeError(f"invalid subsystem selection {keep} for dims {dims}")
    ops = []
    for idx in np.ndindex(*[dims[i] for i in traced]):
        factors = []
        pos = dict(zip(traced, idx))
        for i, d in enumerate(dims):
            if i in pos:
                bra = np.zeros((1, d))
                bra[0, pos[i]] = 1.0
                factors.append(bra)
            else:
                factors.append(np.eye(d))
        ops.append(tensor(*factors))
    return Channel(ops)


def make_rng(seed, *stream) -> np.random.Generator:
    """Philox-4x64 counter-based generator keyed by ``(seed, *stream)``.

    The key is expanded with ``numpy.random.SeedSequence``, so distinct
    stream tuples give statistically independent, reproducible streams.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_density(dim: int, rank: int | None = None, rng=None) -> np.ndarray:
    """``G G^dagger / tr(G G^dagger)`` with ``G`` a ``dim x rank`` complex Gaussian matrix."""
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ParameterError(f"rank must satisfy 1 <= rank <= dim, got {rank} for dim {dim}")
    rng = make_rng(0) if rng is None else rng
    g = _ginibre(rng, dim, rank)
    rho = g @ dag(g)
    rho = rho / np.trace(rho).real
    return 0.5 * (rho + dag(rho))


def random_unitary(dim: int, rng=None) -> np.ndarray:
    rng = make_rng(0) if rng is None else rng
    q, r = np.linalg.qr(_ginibre(rng, dim, dim))
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_channel(dim_in: int, dim_out: int, kraus_count: int, rng=None) -> Channel:
    """Channel sliced from a random isometry ``C^dim_in -> C^(kraus_count*dim_out)``."""
    if kraus_count < 1 or kraus_count * dim_out < dim_in:
        raise ParameterError(
            f"kraus_count={kraus_count} too small for an isometry {dim_in} -> {kraus_count}*{dim_out}"
        )
    rng = make_rng(0) if rng is None else rng
    q, r = np.linalg.qr(_ginibre(rng, kraus_count * dim_out, dim_in))
    q = q[:, :dim_in] * (np.diag(r) / np.abs(np.diag(r)))
    return Channel([q[i * dim_out:(i + 1) * dim_out, :] for i in range(kraus_count)])
