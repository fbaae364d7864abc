"""Petz, rotated Petz, convex-hull and pinching recovery maps.

All maps share a :class:`PetzReference` holding the reference operator
``sigma``, the channel ``N`` and the derived square roots, so building many
rotated atoms for one ``(sigma, N)`` pair costs nothing extra.

Phases are indexed by the *distinct* eigenvalues of ``sigma`` and ``N(sigma)``
(clustered with the usual tolerance), in decreasing eigenvalue order.
"""

from __future__ import annotations

from functools import cached_property
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .channels import Channel
from .errors import ParameterError, ResourceError, ShapeError
from .linalg import (
    DEFAULT_CLUSTER_TOL,
    SpectralDecomposition,
    dag,
    hermitian,
    inv_sqrt_support,
    spectral_decompose,
    sqrt_psd,
)
from .pinching import PinchingContext, check_cap

TWO_PI = 2.0 * np.pi
CHOI_DIM_LIMIT = 64

KINDS = ("petz", "rotatedPetz", "convex", "pinchingRecovery")


def phase_unitary(spec: SpectralDecomposition, phases) -> np.ndarray:
    """``sum_k exp(i phases[k]) P_k`` over the distinct eigenspaces of ``spec``."""
    phases = np.asarray(phases, dtype=float).reshape(-1)
    if len(phases) != len(spec):
        raise ParameterError(f"expected {len(spec)} phases (one per distinct eigenvalue), got {len(phases)}")
    v = np.concatenate(spec.bases, axis=1)
    diag = np.repeat(np.exp(1j * phases), spec.multiplicities)
    return (v * diag) @ dag(v)


def _normalize_phases(phases, length: int, what: str) -> np.ndarray:
    phases = np.zeros(length) if phases is None else np.asarray(phases, dtype=float).reshape(-1)
    if len(phases) != length:
        raise ParameterError(f"{what} needs {length} phases, got {len(phases)}")
    return np.mod(phases, TWO_PI)


class PetzReference:
    """Precomputed ingredients of the Petz map for a pair ``(sigma, N)``."""

    def __init__(self, sigma, channel: Channel, cluster_tol: float = DEFAULT_CLUSTER_TOL):
        sigma = hermitian(sigma, "sigma")
        if sigma.shape != (channel.dim_in, channel.dim_in):
            raise ShapeError(f"sigma has shape {sigma.shape} but channel input dimension is {channel.dim_in}")
        self.sigma = sigma
        self.channel = channel
        self.cluster_tol = cluster_tol
        self.out = hermitian(channel(sigma), "N(sigma)")
        self.sqrt_sigma = sqrt_psd(sigma)
        self.inv_sqrt_out = inv_sqrt_support(self.out)

    @cached_property
    def spec_sigma(self) -> SpectralDecomposition:
        return spectral_decompose(self.sigma, self.cluster_tol)

    @cached_property
    def spec_out(self) -> SpectralDecomposition:
        return spectral_decompose(self.out, self.cluster_tol)

    @property
    def d1(self) -> int:
        return len(self.spec_sigma)

    @property
    def d2(self) -> int:
        return len(self.spec_out)

    @property
    def dim_in(self) -> int:
        """Dimension of the recovery map's input, i.e. the channel output."""
        return self.channel.dim_out

    @property
    def dim_out(self) -> int:
        return self.channel.dim_in

    def check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim_in, self.dim_in):
            raise ShapeError(f"recovery map expects a {self.dim_in}x{self.dim_in} operator, got {x.shape}")
        return x

    def petz(self, x) -> np.ndarray:
        inner = self.inv_sqrt_out @ x @ self.inv_sqrt_out
        return self.sqrt_sigma @ self.channel.adjoint(inner) @ self.sqrt_sigma

    def petz_batch(self, xs: np.ndarray) -> np.ndarray:
        """Petz map applied to a stack of operators of shape ``(m, d_B, d_B)``."""
        inner = self.inv_sqrt_out @ xs @ self.inv_sqrt_out
        k = self.channel.stacked
        adj = np.einsum("kji,mjl,klp->mip", k.conj(), inner, k)
        return self.sqrt_sigma @ adj @ self.sqrt_sigma

    def u_sigma(self, theta) -> np.ndarray:
        return phase_unitary(self.spec_sigma, theta)

    def u_out(self, phi) -> np.ndarray:
        return phase_unitary(self.spec_out, phi)

    def power(self, n: int) -> "PetzReference":
        """Reference for ``(sigma^{(x)n}, N^{(x)n})``, whose Petz map is the n-fold tensor power."""
        if n == 1:
            return self
        check_cap(self.dim_out ** n, "n-fold input space")
        check_cap(self.dim_in ** n, "n-fold output space")
        ref = PetzReference.__new__(PetzReference)
        ref.channel = self.channel.power(n)
        ref.cluster_tol = self.cluster_tol
        ref.sigma = _kron_power(self.sigma, n)
        ref.out = _kron_power(self.out, n)
        ref.sqrt_sigma = _kron_power(self.sqrt_sigma, n)
        ref.inv_sqrt_out = _kron_power(self.inv_sqrt_out, n)
        return ref


def _kron_power(a: np.ndarray, n: int) -> np.ndarray:
    out = a
    for _ in range(n - 1):
        out = np.kron(out, a)
    return out


class RecoveryMap:
    """A recovery map for ``(sigma, N)``, applied lazily.

    Use the constructors :meth:`petz`, :meth:`rotated`, :meth:`convex` and
    :meth:`pinching` rather than ``__init__``.
    """

    def __init__(self, kind: str, ref: PetzReference, theta=None, phi=None,
                 weights=None, atoms=None, n: int = 1):
        if kind not in KINDS:
            raise ParameterError(f"unknown recovery map kind {kind!r}; valid kinds: {', '.join(KINDS)}")
        self.kind = kind
        self.ref = ref
        self.n = 1
        self.theta = self.phi = None
        self.weights = None
        self.atoms: list[tuple[np.ndarray, np.ndarray]] = []
        if kind == "rotatedPetz":
            self.theta = _normalize_phases(theta, ref.d1, "theta")
            self.phi = _normalize_phases(phi, ref.d2, "phi")
        elif kind == "convex":
            self._init_convex(weights, atoms)
        elif kind == "pinchingRecovery":
            if int(n) < 1:
                raise ParameterError("pinching recovery level n must be >= 1")
            self.n = int(n)
            check_cap(ref.dim_out ** self.n, "n-fold output space")
            check_cap(ref.dim_in ** self.n, "n-fold input space")

    def _init_convex(self, weights, atoms):
        if atoms is None or len(atoms) == 0:
            raise ParameterError("a convex recovery map needs at least one atom")
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(atoms):
            raise ParameterError(f"{len(w)} weights for {len(atoms)} atoms")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError("convex weights must be non-negative and sum to 1")
        self.weights = w
        self.atoms = [
            (_normalize_phases(t, self.ref.d1, "theta"), _normalize_phases(p, self.ref.d2, "phi"))
            for t, p in atoms
        ]

    # constructors ---------------------------------------------------------

    @classmethod
    def petz(cls, sigma, channel: Channel, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> "RecoveryMap":
        return cls("petz", PetzReference(sigma, channel, cluster_tol))

    @classmethod
    def rotated(cls, sigma, channel: Channel, theta, phi, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> "RecoveryMap":
        return cls("rotatedPetz", PetzReference(sigma, channel, cluster_tol), theta=theta, phi=phi)

    @classmethod
    def convex(cls, sigma, channel: Channel, weights, atoms, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> "RecoveryMap":
        return cls("convex", PetzReference(sigma, channel, cluster_tol), weights=weights, atoms=atoms)

    @classmethod
    def pinching(cls, sigma, channel: Channel, n: int, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> "RecoveryMap":
        return cls("pinchingRecovery", PetzReference(sigma, channel, cluster_tol), n=n)

    # application ----------------------------------------------------------

    @property
    def dim_in(self) -> int:
        return self.ref.dim_in ** self.n

    @property
    def dim_out(self) -> int:
        return self.ref.dim_out ** self.n

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)

    def apply(self, x) -> np.ndarray:
        if self.kind == "pinchingRecovery":
            return self._apply_pinching(x)
        x = self.ref.check_input(x)
        if self.kind == "petz":
            return self.ref.petz(x)
        if self.kind == "rotatedPetz":
            return _rotated(self.ref, self.theta, self.phi, x)
        return sum(w * _rotated(self.ref, t, p, x) for w, (t, p) in zip(self.weights, self.atoms))

    @cached_property
    def _pinching_parts(self):
        return (
            PinchingContext(self.ref.spec_sigma, self.n),
            PinchingContext(self.ref.spec_out, self.n),
            self.ref.power(self.n),
        )

    def _apply_pinching(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim_in, self.dim_in):
            raise ShapeError(f"pinching recovery expects a {self.dim_in}x{self.dim_in} operator, got {x.shape}")
        pinch_sigma, pinch_out, ref_n = self._pinching_parts
        return pinch_sigma.pinch(ref_n.petz(pinch_out.pinch(x)))

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_ij |i><j| (x) R(|i><j|)``; limited to dimensions <= 64."""
        if self.dim_in > CHOI_DIM_LIMIT or self.dim_out > CHOI_DIM_LIMIT:
            raise ResourceError(f"Choi materialization limited to dimensions <= {CHOI_DIM_LIMIT}")
        d, e = self.dim_in, self.dim_out
        out = np.zeros((d * e, d * e), dtype=complex)
        for i in range(d):
            for j in range(d):
                unit = np.zeros((d, d), dtype=complex)
                unit[i, j] = 1.0
                out[i * e:(i + 1) * e, j * e:(j + 1) * e] = self.apply(unit)
        return out

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "rotatedPetz":
            out["theta"] = self.theta.tolist()
            out["phi"] = self.phi.tolist()
        elif self.kind == "convex":
            out["weights"] = self.weights.tolist()
            out["atoms"] = [{"theta": t.tolist(), "phi": p.tolist()} for t, p in self.atoms]
        elif self.kind == "pinchingRecovery":
            out["n"] = self.n
        return out

    @classmethod
    def from_dict(cls, data: dict, sigma, channel: Channel, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> "RecoveryMap":
        kind = data.get("kind")
        if kind not in KINDS:
            raise ParameterError(f"unknown recovery map kind {kind!r}; valid kinds: {', '.join(KINDS)}")
        ref = PetzReference(sigma, channel, cluster_tol)
        atoms = [(a["theta"], a["phi"]) for a in data.get("atoms", [])]
        return cls(kind, ref, theta=data.get("theta"), phi=data.get("phi"),
                   weights=data.get("weights"), atoms=atoms or None, n=data.get("n", 1))

    def __repr__(self) -> str:
        extra = {"convex": f", atoms={len(self.atoms)}", "pinchingRecovery": f", n={self.n}"}.get(self.kind, "")
        return f"RecoveryMap(kind={self.kind!r}{extra})"


def _rotated(ref: PetzReference, theta, phi, x) -> np.ndarray:
    # zero phases are skipped so the zero rotation reproduces the Petz map bit for bit
    if np.any(phi):
        u_out = ref.u_out(phi)
        x = u_out @ x @ dag(u_out)
    out = ref.petz(x)
    if np.any(theta):
        u_sig = ref.u_sigma(theta)
        out = u_sig @ out @ dag(u_sig)
    return out


def petz_apply(rmap: RecoveryMap, x) -> np.ndarray:
    return rmap.apply(x)


rotated_petz_apply = convex_apply = pinching_recovery_apply = petz_apply


def phase_grid(grid_size: int, length: int) -> np.ndarray:
    """Uniform product grid ``{2 pi j / grid_size}^length`` as an array of shape ``(grid_size**length, length)``."""
    pts = TWO_PI * np.arange(grid_size) / grid_size
    if length == 0:
        return np.zeros((1, 0))
    return np.array(list(product(pts, repeat=length)))


def _average_conjugation(unitaries: Iterable[np.ndarray], x: np.ndarray) -> np.ndarray:
    total = np.zeros_like(x)
    count = 0
    for u in unitaries:
        total += u @ x @ dag(u)
        count += 1
    return total / count


def quadrature_average(sigma, channel: Channel, n: int, x, grid_size: int | None = None,
                       cluster_tol: float = DEFAULT_CLUSTER_TOL) -> np.ndarray:
    """Average of ``(T^{phi,theta})^{(x)n}(X)`` over a uniform phase grid.

    The phase dependence is a trigonometric polynomial with integer
    frequencies bounded by ``n`` in every coordinate, so any grid with more
    than ``n`` points per coordinate reproduces the torus average exactly.
    The ``phi`` and ``theta`` averages are taken separately, which equals the
    joint product-grid average by linearity of the Petz map.
    """
    grid_size = n + 1 if grid_size is None else int(grid_size)
    if grid_size <= n:
        raise ParameterError(f"grid_size={grid_size} must exceed n={n}; smaller grids alias")
    ref = PetzReference(sigma, channel, cluster_tol)
    ref_n = ref.power(n)
    x = np.asarray(x, dtype=complex)
    if x.shape != (ref_n.dim_in, ref_n.dim_in):
        raise ShapeError(f"expected a {ref_n.dim_in}x{ref_n.dim_in} operator, got {x.shape}")
    u_out = (_kron_power(ref.u_out(phi), n) for phi in phase_grid(grid_size, ref.d2))
    inner = _average_conjugation(u_out, x)
    recovered = ref_n.petz(inner)
    u_sig = (_kron_power(ref.u_sigma(theta), n) for theta in phase_grid(grid_size, ref.d1))
    return _average_conjugation(u_sig, recovered)


def zero_phase_atom(ref: PetzReference) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(ref.d1), np.zeros(ref.d2)


def rotated_outputs(ref: PetzReference, thetas: Sequence, phis: Sequence, x) -> np.ndarray:
    """``T^{phi_j, theta_j}(X)`` for every atom ``j``, stacked along axis 0."""
    x = ref.check_input(x)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    v_out = np.concatenate(ref.spec_out.bases, axis=1)
    v_sig = np.concatenate(ref.spec_sigma.bases, axis=1)
    e_out = np.exp(1j * np.repeat(phis, ref.spec_out.multiplicities, axis=1))
    e_sig = np.exp(1j * np.repeat(thetas, ref.spec_sigma.multiplicities, axis=1))
    u_out = np.einsum("ik,mk,jk->mij", v_out, e_out, v_out.conj())
    u_sig = np.einsum("ik,mk,jk->mij", v_sig, e_sig, v_sig.conj())
    rotated_in = u_out @ x @ np.conj(np.swapaxes(u_out, 1, 2))
    rec = ref.petz_batch(rotated_in)
    return u_sig @ rec @ np.conj(np.swapaxes(u_sig, 1, 2))
