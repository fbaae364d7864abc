"""Type classes, type projectors and pinching maps on tensor powers.

For ``H = sum_x mu_x P_x`` the type projector of a histogram ``lam`` is the
sum of ``P_{x_1} (x) ... (x) P_{x_n}`` over all sequences with histogram
``lam``. Everything is materialized densely, so ``dim(H)**n`` is bounded by
:func:`dense_cap`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .errors import DomainError, ParameterError, ResourceError, ShapeError
from .linalg import DEFAULT_CLUSTER_TOL, SpectralDecomposition, dag, hermitian, is_psd, spectral_decompose

DEFAULT_CAP = 1024
MAX_TYPE_COUNT = 10**6


def dense_cap() -> int:
    """Largest dense dimension allowed; ``PETZLAB_CAP`` overrides the default 1024."""
    value = os.environ.get("PETZLAB_CAP")
    if value is None:
        return DEFAULT_CAP
    try:
        cap = int(value)
    except ValueError as exc:
        raise ParameterError(f"PETZLAB_CAP must be an integer, got {value!r}") from exc
    if cap < 1:
        raise ParameterError("PETZLAB_CAP must be positive")
    return cap


def check_cap(dim: int, what: str = "operator") -> None:
    cap = dense_cap()
    if dim > cap:
        raise ResourceError(f"{what} dimension {dim} exceeds dense cap {cap} (set PETZLAB_CAP)")


def type_count(n: int, d: int) -> int:
    """Number of types of length-``n`` sequences over ``d`` symbols."""
    return math.comb(n + d - 1, d - 1)


def enumerate_types(n: int, d: int) -> list[tuple[int, ...]]:
    """All histograms ``(lam_1, ..., lam_d)`` summing to ``n``, in descending lexicographic order."""
    if n < 1 or d < 1:
        raise ParameterError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if type_count(n, d) > MAX_TYPE_COUNT:
        raise ParameterError(f"{type_count(n, d)} types for n={n}, d={d} is too many to enumerate")

    def rec(remaining: int, slots: int):
        if slots == 1:
            yield (remaining,)
            return
        for first in range(remaining, -1, -1):
            for rest in rec(remaining - first, slots - 1):
                yield (first, *rest)

    return list(rec(n, d))


@dataclass(frozen=True, eq=False)
class PinchingContext:
    """Type-class structure of ``H^{(x) n}`` for a fixed spectral decomposition of ``H``."""

    base: SpectralDecomposition
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("pinching level n must be >= 1")
        check_cap(self.base.dim ** self.n, "n-fold space")

    @classmethod
    def from_operator(cls, h, n: int, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> "PinchingContext":
        return cls(spectral_decompose(h, cluster_tol), n)

    @property
    def alphabet_size(self) -> int:
        return len(self.base)

    @property
    def dim(self) -> int:
        return self.base.dim ** self.n

    @cached_property
    def types(self) -> list[tuple[int, ...]]:
        return enumerate_types(self.n, self.alphabet_size)

    @cached_property
    def _basis(self) -> tuple[np.ndarray, np.ndarray]:
        # eigenbasis of H^{(x)n} plus the type index of every basis vector
        v1 = np.concatenate(self.base.bases, axis=1)
        labels1 = np.concatenate([np.full(m, k) for k, m in enumerate(self.base.multiplicities)])
        v = v1
        for _ in range(self.n - 1):
            v = np.kron(v, v1)
        index = {lam: i for i, lam in enumerate(self.types)}
        d = self.alphabet_size
        type_of = np.empty(self.dim, dtype=int)
        for pos, seq in enumerate(product(labels1, repeat=self.n)):
            type_of[pos] = index[tuple(np.bincount(seq, minlength=d))]
        return v, type_of

    def type_projector(self, lam) -> np.ndarray:
        lam = tuple(int(c) for c in lam)
        if lam not in self.types:
            raise ParameterError(f"{lam} is not a type for n={self.n}, d={self.alphabet_size}")
        v, type_of = self._basis
        cols = v[:, type_of == self.types.index(lam)]
        return cols @ dag(cols)

    def projectors(self) -> list[np.ndarray]:
        return [self.type_projector(lam) for lam in self.types]

    def pinch(self, x) -> np.ndarray:
        """``sum_lam P_lam X P_lam``."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim, self.dim):
            raise ShapeError(f"pinching expects a {self.dim}x{self.dim} operator, got {x.shape}")
        v, type_of = self._basis
        mask = type_of[:, None] == type_of[None, :]
        return v @ ((dag(v) @ x @ v) * mask) @ dag(v)

    __call__ = pinch


def type_projector(ctx: PinchingContext, lam) -> np.ndarray:
    return ctx.type_projector(lam)


def pinch_n(ctx: PinchingContext, x) -> np.ndarray:
    return ctx.pinch(x)


def pinch(h, x, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> np.ndarray:
    """Single-copy pinching of ``x`` by the eigenprojectors of ``h``."""
    return PinchingContext.from_operator(h, 1, cluster_tol).pinch(x)


def check_pinching_inequality(ctx: PinchingContext, x, tol: float = 1e-9) -> bool:
    """Whether ``pinch(X) - X / |types|`` is PSD within ``tol``."""
    x = hermitian(x)
    if not is_psd(x, tol):
        raise DomainError("pinching inequality needs a PSD operator")
    return is_psd(ctx.pinch(x) - x / len(ctx.types), tol)
