"""Seeded verification of the recoverability inequalities on small instances.

Each ``check_*`` function returns a :class:`CheckResult` whose ``verdicts``
and ``slacks`` share keys; a slack is ``bound - value`` (positive means the
inequality holds with room to spare; identities use minus the error) and the
verdict passes when the slack is at least ``-tol``. ``run_suite`` drives every enabled check over instances
generated deterministically from ``(seed, instance index)``.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channels import (
    Channel,
    make_rng,
    partial_trace,
    partial_trace_channel,
    random_channel,
    random_density,
    tensor_power,
)
from .entropies import (
    cmi,
    fidelity_bound,
    max_relative_entropy,
    measured_relative_entropy,
    relative_entropy,
)
from .errors import InstanceError, ParameterError
from .linalg import funm, hermitian, op_norm
from .pinching import dense_cap, type_count
from .recovery import PetzReference, RecoveryMap, phase_grid, rotated_outputs

PASS, FAIL, INCONCLUSIVE, SKIPPED = "pass", "fail", "inconclusive", "skipped"
CHECKS = ("dpi", "theorem2", "prop1", "lemma2", "lemma3", "prop3", "cmi")
DEFAULT_TOLERANCES = {
    "dpi": 1e-9,
    "theorem2": 1e-6,
    "prop1": 1e-7,
    "lemma2": 1e-9,
    "lemma3": 1e-5,
    "prop3": 1e-6,
    "prop3_recovery": 1e-8,
    "cmi": 1e-6,
    "cmi_identity": 1e-8,
}
MAX_ATOMS = 4096


@dataclass
class Instance:
    rho: np.ndarray
    sigma: np.ndarray
    channel: Channel
    seed: int = 0
    label: str = ""

    @property
    def dim_a(self) -> int:
        return self.channel.dim_in

    @property
    def dim_b(self) -> int:
        return self.channel.dim_out

    def descriptor(self) -> dict:
        return {
            "label": self.label,
            "seed": self.seed,
            "dimA": self.dim_a,
            "dimB": self.dim_b,
            "krausCount": len(self.channel.kraus),
        }


@dataclass
class CheckResult:
    name: str
    verdicts: dict = field(default_factory=dict)
    slacks: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    best_map: Optional[dict] = None
    extra: Optional[dict] = field(default=None, repr=False)

    def record(self, key: str, slack: float, tol: float, inconclusive: bool = False) -> None:
        self.slacks[key] = float(slack)
        if inconclusive:
            self.verdicts[key] = INCONCLUSIVE
        else:
            self.verdicts[key] = PASS if slack >= -tol else FAIL

    @property
    def status(self) -> str:
        states = set(self.verdicts.values()) - {SKIPPED}
        if not states:
            return SKIPPED
        for s in (FAIL, INCONCLUSIVE):
            if s in states:
                return s
        return PASS

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "verdicts": dict(self.verdicts),
            "slacks": {k: _num(v) for k, v in self.slacks.items()},
            "values": {k: _num(v) for k, v in self.values.items()},
        }
        if self.notes:
            out["notes"] = list(self.notes)
        if self.best_map is not None:
            out["bestMap"] = self.best_map
        return out


def _num(x):
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def random_instance(rng, dim_a: int, dim_b: int, kraus_count: int = 2, seed: int = 0, label: str = "") -> Instance:
    """Full-rank ``rho``, ``sigma`` and a random channel; ``kraus_count`` is raised to make an isometry possible."""
    kraus_count = max(kraus_count, math.ceil(dim_a / dim_b))
    rho = random_density(dim_a, rng=rng)
    sigma = random_density(dim_a, rng=rng)
    channel = random_channel(dim_a, dim_b, kraus_count, rng)
    return Instance(rho, sigma, channel, seed, label)


# --- gap -------------------------------------------------------------------


def gap(inst: Instance) -> float:
    """``D(rho||sigma) - D(N(rho)||N(sigma))`` in nats (``inf`` if the first term is infinite)."""
    d_in = relative_entropy(inst.rho, inst.sigma)
    d_out = relative_entropy(inst.channel(inst.rho), inst.channel(inst.sigma))
    if math.isinf(d_in):
        return math.inf
    return d_in - d_out


def check_dpi(inst: Instance, tol: float = DEFAULT_TOLERANCES["dpi"]) -> CheckResult:
    res = CheckResult("dpi")
    g = gap(inst)
    res.values["gap"] = g
    if math.isinf(g):
        res.notes.append("infinite relative entropy; checks skipped")
        res.verdicts["gap_nonnegative"] = SKIPPED
        res.slacks["gap_nonnegative"] = math.inf
        return res
    res.record("gap_nonnegative", g, tol)
    return res


# --- minimization of D_M over a convex hull -----------------------------------


@dataclass
class HullMinimum:
    value: float
    weights: np.ndarray
    mixture: np.ndarray
    converged: bool
    iterations: int
    fw_gap: float


def minimize_dm_over_hull(rho, atoms: np.ndarray, max_iter: int = 500, fw_tol: float = 1e-9,
                          weights=None) -> HullMinimum:
    """Minimize ``w -> D_M(rho || sum_j w_j atoms[j])`` over the probability simplex.

    Exponentiated-gradient (mirror) descent with an adaptive step. The
    gradient ``-tr(atoms[j] omega)`` comes from the optimal witness
    ``omega`` (envelope theorem), and ``<grad, w> - min_j grad_j`` bounds the
    suboptimality, which is used as the stopping rule.
    """
    atoms = np.asarray(atoms, dtype=complex)
    m = len(atoms)
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)

    def evaluate(w, warm=None):
        mix = np.tensordot(w, atoms, axes=1)
        res = measured_relative_entropy(rho, mix, initial=warm)
        if math.isinf(res.value):
            return res, mix, None
        grad = -np.einsum("mij,ji->m", atoms, res.witness).real
        return res, mix, grad

    cur, mix, grad = evaluate(w)
    if grad is None:
        return HullMinimum(math.inf, w, mix, True, 0, math.inf)
    converged = cur.converged
    eta = 1.0
    it = 0
    fw = float(grad @ w - grad.min())
    while it < max_iter and fw > fw_tol:
        it += 1
        shifted = grad - grad.min()
        accepted = False
        while eta > 1e-12:
            w_new = w * np.exp(-eta * shifted)
            w_new /= w_new.sum()
            new, mix_new, grad_new = evaluate(w_new, cur.log_witness)
            if grad_new is not None and new.value <= cur.value:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        w, cur, mix, grad = w_new, new, mix_new, grad_new
        converged = cur.converged
        eta = min(eta * 1.5, 1e6)
        fw = float(grad @ w - grad.min())
    return HullMinimum(cur.value, w, mix, converged, it, fw)


def phase_atoms(ref: PetzReference, grid_size: int, rng=None, max_atoms: int = MAX_ATOMS):
    """Phase pairs ``(theta, phi)`` for the discretized convex hull.

    The first phase of each vector is pinned to 0: a global phase cancels
    under conjugation, so this loses no maps. The full product grid is used
    when it has at most ``max_atoms`` points; otherwise ``max_atoms`` points
    are drawn uniformly from the torus. The zero-phase (plain Petz) atom is
    always at index 0.
    """
    d1, d2 = ref.d1, ref.d2
    free = (d1 - 1) + (d2 - 1)
    if grid_size ** free <= max_atoms:
        grid = phase_grid(grid_size, free)
    else:
        rng = make_rng(0) if rng is None else rng
        grid = np.vstack([np.zeros((1, free)), rng.uniform(0.0, 2.0 * np.pi, size=(max_atoms, free))])
    thetas = np.hstack([np.zeros((len(grid), 1)), grid[:, : d1 - 1]])
    phis = np.hstack([np.zeros((len(grid), 1)), grid[:, d1 - 1:]])
    return thetas, phis


def theorem2_search(inst: Instance, phase_grid_size: int = 8, rng=None, max_iter: int = 500):
    """Search the discretized hull of rotated Petz maps for the smallest ``D_M(rho || (R o N)(rho))``."""
    ref = PetzReference(inst.sigma, inst.channel)
    thetas, phis = phase_atoms(ref, phase_grid_size, rng)
    atoms = rotated_outputs(ref, thetas, phis, inst.channel(inst.rho))
    atoms = 0.5 * (atoms + np.conj(np.swapaxes(atoms, 1, 2)))

    vertex = measured_relative_entropy(inst.rho, atoms[0])
    hull = minimize_dm_over_hull(inst.rho, atoms, max_iter=max_iter)
    if vertex.value <= hull.value:
        weights = np.zeros(len(atoms))
        weights[0] = 1.0
        value, converged = vertex.value, vertex.converged
    else:
        weights, value, converged = hull.weights, hull.value, hull.converged
    keep = weights > 1e-12
    w = weights[keep] / weights[keep].sum()
    rmap = RecoveryMap("convex", ref, weights=w, atoms=list(zip(thetas[keep], phis[keep])))
    recovered = hermitian(np.tensordot(w, atoms[keep], axes=1))
    final = measured_relative_entropy(inst.rho, recovered)
    return {
        "map": rmap,
        "recovered": recovered,
        "dm_best": final.value,
        "converged": converged and final.converged,
        "atoms": len(atoms),
        "iterations": hull.iterations,
        "fw_gap": hull.fw_gap,
        "petz_dm": vertex.value,
        "hull_dm": hull.value,
        "dm_before_pruning": value,
    }


def check_theorem2(inst: Instance, phase_grid_size: int = 8, tol: float = DEFAULT_TOLERANCES["theorem2"],
                   rng=None, max_iter: int = 500) -> CheckResult:
    """``gap >= D_M(rho || (R o N)(rho)) >= -2 log F(rho, (R o N)(rho))`` for the best hull map found."""
    res = CheckResult("theorem2")
    g = gap(inst)
    res.values["gap"] = g
    if math.isinf(g):
        res.notes.append("infinite gap; checks skipped")
        return res
    found = theorem2_search(inst, phase_grid_size, rng, max_iter)
    dm = found["dm_best"]
    fb = fidelity_bound(inst.rho, found["recovered"])
    res.values.update(
        dmBest=dm,
        fidelityBound=fb,
        petzDM=found["petz_dm"],
        atoms=found["atoms"],
        iterations=found["iterations"],
        fwGap=found["fw_gap"],
    )
    inconclusive = not found["converged"]
    if inconclusive:
        res.notes.append("D_M optimizer did not converge")
    res.record("gap_ge_dm", g - dm, tol, inconclusive)
    res.record("dm_ge_fidelity", dm - fb, tol, inconclusive)
    res.best_map = found["map"].to_dict()
    res.extra = found
    return res


# --- pinching recovery bound at finite n --------------------------------------


def check_prop1_finite_n(inst: Instance, n_max: int = 3, tol: float = DEFAULT_TOLERANCES["prop1"]) -> CheckResult:
    """``(1/n) D(rho^n || R^n(N(rho)^n)) <= gap + (log|types_sigma| + log|types_N(sigma)|)/n``."""
    res = CheckResult("prop1")
    g = gap(inst)
    res.values["gap"] = g
    if math.isinf(g):
        res.notes.append("infinite gap; checks skipped")
        return res
    ref = PetzReference(inst.sigma, inst.channel)
    cap = dense_cap()
    out_rho = inst.channel(inst.rho)
    for n in range(1, n_max + 1):
        if max(inst.dim_a, inst.dim_b) ** n > cap:
            res.notes.append(f"n_max truncated to {n - 1} by dense cap {cap}")
            break
        rmap = RecoveryMap("pinchingRecovery", ref, n=n)
        recovered = rmap(tensor_power(out_rho, n))
        value = relative_entropy(tensor_power(inst.rho, n), recovered) / n
        slack_terms = math.log(type_count(n, ref.d1)) + math.log(type_count(n, ref.d2))
        bound = g + slack_terms / n
        res.values[f"value_n{n}"] = value
        res.values[f"bound_n{n}"] = bound
        res.record(f"n{n}", bound - value, tol)
    return res


def prop1_values(inst: Instance, n_max: int = 3) -> list[tuple[int, float, float]]:
    """``(n, value_n, bound_n)`` triples as computed by :func:`check_prop1_finite_n`."""
    res = check_prop1_finite_n(inst, n_max)
    out = []
    n = 1
    while f"value_n{n}" in res.values:
        out.append((n, res.values[f"value_n{n}"], res.values[f"bound_n{n}"]))
        n += 1
    return out


# --- operator Jensen trace inequality -----------------------------------------


def lemma2_sides(inst: Instance, sigma_prime, n: int = 1) -> tuple[float, float]:
    """``(tr(N^n(rho^n) log s^n), tr(rho^n log N^dagger^n(s^n)))`` for ``s = sigma_prime``."""
    rho_n = tensor_power(inst.rho, n)
    s_n = tensor_power(hermitian(sigma_prime, "sigma_prime"), n)
    ch = inst.channel.power(n)
    lhs = np.trace(ch(rho_n) @ _strict_log(s_n)).real
    rhs = np.trace(rho_n @ _strict_log(ch.adjoint(s_n))).real
    return float(lhs), float(rhs)


def _strict_log(a) -> np.ndarray:
    return funm(a, np.log)


def check_lemma2(inst: Instance, sigma_prime, n: int = 1, tol: float = DEFAULT_TOLERANCES["lemma2"]) -> bool:
    lhs, rhs = lemma2_sides(inst, sigma_prime, n)
    return lhs <= rhs + tol


def lemma2_result(inst: Instance, sigma_prime, n_values: Sequence[int], tol: float = DEFAULT_TOLERANCES["lemma2"]) -> CheckResult:
    res = CheckResult("lemma2")
    cap = dense_cap()
    for n in n_values:
        if max(inst.dim_a, inst.dim_b) ** n > cap:
            res.notes.append(f"n={n} skipped by dense cap {cap}")
            continue
        lhs, rhs = lemma2_sides(inst, sigma_prime, n)
        res.values[f"lhs_n{n}"] = lhs
        res.values[f"rhs_n{n}"] = rhs
        res.record(f"n{n}", rhs - lhs, tol)
    return res


# --- hull bound on tensor powers (small n) ------------------------------------


def lemma3_sides(rho, sigmas: Sequence, weights, n: int = 2, max_iter: int = 500):
    """Left side ``(1/n) D_M(rho^n || sum_x w_x sigma_x^n)`` and right side ``min_conv D_M(rho || .)``."""
    weights = np.asarray(weights, dtype=float)
    mix_n = sum(w * tensor_power(s, n) for w, s in zip(weights, sigmas))
    lhs = measured_relative_entropy(tensor_power(rho, n), hermitian(mix_n))
    rhs = minimize_dm_over_hull(rho, np.array([hermitian(s) for s in sigmas]), max_iter=max_iter)
    return lhs, rhs


def check_lemma3_small(rho, sigmas: Sequence, weights, n: int = 2, tol: float = DEFAULT_TOLERANCES["lemma3"]) -> Optional[bool]:
    """``True``/``False`` for the inequality, ``None`` when an optimizer did not converge."""
    res = lemma3_result(rho, sigmas, weights, n, tol)
    if res.status == INCONCLUSIVE:
        return None
    return res.passed


def lemma3_result(rho, sigmas, weights, n: int = 2, tol: float = DEFAULT_TOLERANCES["lemma3"]) -> CheckResult:
    res = CheckResult("lemma3")
    lhs, rhs = lemma3_sides(rho, sigmas, weights, n)
    res.values["lhs"] = lhs.value / n
    res.values["rhs"] = rhs.value
    res.values["rhsWeights"] = list(rhs.weights)
    inconclusive = not (lhs.converged and rhs.converged)
    if inconclusive:
        res.notes.append("D_M optimizer did not converge")
    res.record("lhs_ge_rhs", lhs.value / n - rhs.value, tol, inconclusive)
    return res


# --- exact recovery and max relative entropy ----------------------------------


def check_prop3(inst: Instance, tol: float = DEFAULT_TOLERANCES["prop3"],
                recovery_tol: float = DEFAULT_TOLERANCES["prop3_recovery"]) -> CheckResult:
    """Petz map with reference ``rho`` recovers ``rho``; then ``gap <= D_max((R o N)(sigma) || sigma)``."""
    res = CheckResult("prop3")
    out_rho = inst.channel(inst.rho)
    w = np.linalg.eigvalsh(hermitian(out_rho))
    if w[0] <= inst.dim_b * np.finfo(float).eps * w[-1]:
        res.notes.append("N(rho) is rank deficient; instance skipped")
        return res
    rmap = RecoveryMap.petz(inst.rho, inst.channel)
    recovered_rho = rmap(out_rho)
    err = op_norm(recovered_rho - inst.rho)
    res.values["recoveryError"] = err
    res.record("recovers_rho", -err, recovery_tol)
    g = gap(inst)
    dmax_bits = max_relative_entropy(rmap(inst.channel(inst.sigma)), inst.sigma)
    res.values["gap"] = g
    res.values["dmaxBits"] = dmax_bits
    res.record("gap_le_dmax", dmax_bits * math.log(2.0) - g, tol)
    return res


# --- conditional mutual information -------------------------------------------


def cmi_instance(rho_abc, dims: Sequence[int], seed: int = 0, label: str = "") -> Instance:
    """``(rho_ABC, id_A (x) rho_BC, tr_C)``."""
    dims = [int(d) for d in dims]
    rho_bc = partial_trace(rho_abc, dims, [1, 2])
    sigma = np.kron(np.eye(dims[0]), rho_bc)
    return Instance(hermitian(rho_abc), sigma, partial_trace_channel(dims, [0, 1]), seed, label)


def check_cmi_corollary(rho_abc, dims: Sequence[int] = (2, 2, 2), phase_grid_size: int = 8,
                        tol: float = DEFAULT_TOLERANCES["cmi"],
                        identity_tol: float = DEFAULT_TOLERANCES["cmi_identity"], rng=None,
                        max_iter: int = 500) -> CheckResult:
    dims = [int(d) for d in dims]
    inst = cmi_instance(rho_abc, dims)
    res = check_theorem2(inst, phase_grid_size, tol, rng, max_iter)
    res.name = "cmi"
    i_abc = cmi(rho_abc, dims)
    res.values["cmi"] = i_abc
    res.record("gap_equals_cmi", -abs(res.values["gap"] - i_abc), identity_tol)

    found = getattr(res, "extra", None)
    if found is None:
        return res
    rmap: RecoveryMap = found["map"]
    rho_bc = partial_trace(rho_abc, dims, [1, 2])
    rho_b = partial_trace(rho_abc, dims, [1])
    local = RecoveryMap("convex", PetzReference(rho_bc, partial_trace_channel(dims[1:], [0])),
                        weights=rmap.weights, atoms=rmap.atoms)
    res.values["localMapError"] = op_norm(local(rho_b) - rho_bc)
    res.record("maps_rhoB_to_rhoBC", -res.values["localMapError"], identity_tol)
    fact = factorization_error(rmap, local, dims[0], rng)
    res.values["factorizationError"] = fact
    res.record("factorizes", -fact, identity_tol)
    return res


def factorization_error(rmap: RecoveryMap, local: RecoveryMap, dim_a: int, rng=None, trials: int = 3) -> float:
    """Max deviation between ``rmap`` and ``id_A (x) local`` on random Hermitian inputs."""
    rng = make_rng(0) if rng is None else rng
    d_in = local.dim_in
    worst = 0.0
    for _ in range(trials):
        g = rng.standard_normal((dim_a * d_in,) * 2) + 1j * rng.standard_normal((dim_a * d_in,) * 2)
        x = g + g.conj().T
        blocks = x.reshape(dim_a, d_in, dim_a, d_in)
        d_out = local.dim_out
        expected = np.zeros((dim_a, d_out, dim_a, d_out), dtype=complex)
        for i in range(dim_a):
            for j in range(dim_a):
                expected[i, :, j, :] = local.apply(blocks[i, :, j, :])
        expected = expected.reshape(dim_a * d_out, dim_a * d_out)
        worst = max(worst, op_norm(rmap(x) - expected) / max(1.0, op_norm(x)))
    return worst


def markov_chain_state(p_b, p_a_given_b, p_c_given_b) -> np.ndarray:
    """Diagonal state of the classical Markov chain ``A - B - C``."""
    p_b = np.asarray(p_b, dtype=float)
    pa = np.asarray(p_a_given_b, dtype=float)  # pa[b, a]
    pc = np.asarray(p_c_given_b, dtype=float)  # pc[b, c]
    joint = np.einsum("b,ba,bc->abc", p_b, pa, pc)
    return np.diag(joint.reshape(-1)).astype(complex)


# --- suite -----------------------------------------------------------------------


@dataclass
class SuiteConfig:
    seed: int = 42
    instances: int = 4
    dimsA: list = field(default_factory=lambda: [2])
    dimsB: list = field(default_factory=lambda: [2])
    krausCount: int = 2
    phaseGridSize: int = 4
    nMax: int = 2
    tolerances: dict = field(default_factory=dict)
    checks: list = field(default_factory=lambda: list(CHECKS))
    maxIter: int = 500
    recordTimings: bool = False
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteConfig":
        errors = validate_config(data)
        if errors:
            raise ParameterError("invalid config: " + "; ".join(errors))
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def validate_config(data) -> list[str]:
    """All problems with a raw config mapping (empty list when valid)."""
    if not isinstance(data, dict):
        return ["config must be a JSON object"]
    errors = []
    known = set(SuiteConfig.__dataclass_fields__)
    for key in data:
        if key not in known:
            errors.append(f"unknown key {key!r}")

    def pos_int(key, minimum=1):
        if key in data and (not isinstance(data[key], int) or isinstance(data[key], bool) or data[key] < minimum):
            errors.append(f"{key} must be an integer >= {minimum}")

    pos_int("seed", 0)
    pos_int("instances", 0)
    pos_int("krausCount")
    pos_int("phaseGridSize")
    pos_int("nMax")
    pos_int("maxIter")
    pos_int("workers")
    for key in ("dimsA", "dimsB"):
        if key in data:
            v = data[key]
            if not isinstance(v, list) or not v or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in v):
                errors.append(f"{key} must be a non-empty list of positive integers")
    if "checks" in data:
        v = data["checks"]
        if not isinstance(v, list) or not all(c in CHECKS for c in v):
            errors.append(f"checks must be a list drawn from {list(CHECKS)}")
    if "tolerances" in data:
        v = data["tolerances"]
        if not isinstance(v, dict):
            errors.append("tolerances must be an object")
        else:
            for k, t in v.items():
                if k not in DEFAULT_TOLERANCES:
                    errors.append(f"unknown tolerance {k!r}")
                elif not isinstance(t, (int, float)) or isinstance(t, bool) or t < 0:
                    errors.append(f"tolerance {k!r} must be a non-negative number")
    if "recordTimings" in data and not isinstance(data["recordTimings"], bool):
        errors.append("recordTimings must be a boolean")
    return errors


CHECK_STREAM = {name: i + 1 for i, name in enumerate(CHECKS)}


def suite_instance(config: SuiteConfig, index: int) -> Instance:
    rng = make_rng(config.seed, index)
    dim_a = int(rng.choice(config.dimsA))
    dim_b = int(rng.choice(config.dimsB))
    return random_instance(rng, dim_a, dim_b, config.krausCount, config.seed, f"instance-{index}")


def run_instance(config: SuiteConfig, index: int) -> dict:
    """Report for one instance; any failure is re-raised as :class:`InstanceError`."""
    try:
        return _run_instance(config, index)
    except Exception as exc:
        raise InstanceError(f"instance-{index}", f"{type(exc).__name__}: {exc}") from exc


def _run_instance(config: SuiteConfig, index: int) -> dict:
    inst = suite_instance(config, index)
    report = {"index": index, "instance": inst.descriptor()}
    checks = {}
    timings = {}
    summary = {"gap": gap(inst), "dmBest": None, "fidelityBound": None, "bestMap": None}
    for name in CHECKS:
        if name not in config.checks:
            continue
        rng = make_rng(config.seed, index, CHECK_STREAM[name])
        start = time.perf_counter()
        result = _run_check(name, inst, config, rng)
        timings[name] = 1000.0 * (time.perf_counter() - start)
        checks[name] = result.to_dict()
        if name == "theorem2" and "dmBest" in result.values:
            summary["dmBest"] = result.values["dmBest"]
            summary["fidelityBound"] = result.values["fidelityBound"]
            summary["bestMap"] = result.best_map
    report.update({k: (_num(v) if isinstance(v, float) else v) for k, v in summary.items()})
    report["checks"] = checks
    if config.recordTimings:
        report["timingsMs"] = timings
    return report


def _run_check(name: str, inst: Instance, config: SuiteConfig, rng) -> CheckResult:
    if name == "dpi":
        return check_dpi(inst, config.tol("dpi"))
    if name == "theorem2":
        return check_theorem2(inst, config.phaseGridSize, config.tol("theorem2"), rng, config.maxIter)
    if name == "prop1":
        return check_prop1_finite_n(inst, config.nMax, config.tol("prop1"))
    if name == "lemma2":
        sigma_prime = random_density(inst.dim_b, rng=rng)
        return lemma2_result(inst, sigma_prime, range(1, config.nMax + 1), config.tol("lemma2"))
    if name == "lemma3":
        if inst.dim_a ** 2 > dense_cap():
            res = CheckResult("lemma3")
            res.notes.append("skipped by dense cap")
            return res
        sigmas = [random_density(inst.dim_a, rng=rng) for _ in range(2)]
        return lemma3_result(inst.rho, sigmas, [0.5, 0.5], 2, config.tol("lemma3"))
    if name == "prop3":
        return check_prop3(inst, config.tol("prop3"), config.tol("prop3_recovery"))
    if name == "cmi":
        rho_abc = random_density(8, rng=rng)
        return check_cmi_corollary(rho_abc, (2, 2, 2), config.phaseGridSize, config.tol("cmi"),
                                   config.tol("cmi_identity"), rng, config.maxIter)
    raise ParameterError(f"unknown check {name!r}")


def run_suite(config, seed: Optional[int] = None) -> list[dict]:
    """Run all enabled checks on ``config.instances`` seeded instances, in index order."""
    if isinstance(config, dict):
        config = SuiteConfig.from_dict(config)
    if seed is not None:
        config.seed = int(seed)
    indices = range(config.instances)
    if config.workers > 1 and config.instances > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(run_instance, [config] * config.instances, indices))
    return [run_instance(config, i) for i in indices]


def failed(reports: Sequence[dict]) -> bool:
    return any(FAIL in chk["verdicts"].values() for r in reports for chk in r["checks"].values())


def summarize(reports: Sequence[dict]) -> list[dict]:
    """Per-check counts of pass/fail/inconclusive and the worst (smallest) slack."""
    rows: dict[str, dict] = {}
    for r in reports:
        for name, chk in r["checks"].items():
            row = rows.setdefault(name, {"check": name, "instances": 0, PASS: 0, FAIL: 0, INCONCLUSIVE: 0, SKIPPED: 0,
                                         "worstSlack": None})
            row["instances"] += 1
            row[chk["status"]] += 1
            for s in chk["slacks"].values():
                if isinstance(s, (int, float)) and (row["worstSlack"] is None or s < row["worstSlack"]):
                    row["worstSlack"] = s
    return [rows[name] for name in CHECKS if name in rows]


def dumps_report(reports: Sequence[dict]) -> str:
    return json.dumps(list(reports), indent=2, sort_keys=True) + "\n"
