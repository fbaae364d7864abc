import json
import math

import numpy as np
import pytest

from petzlab import (
    Channel,
    make_rng,
    measured_relative_entropy,
    random_channel,
    random_density,
    random_unitary,
    unitary_channel,
)
from petzlab.entropies import classical_relative_entropy, witness_value
from petzlab.harness import (
    CHECKS,
    FAIL,
    INCONCLUSIVE,
    PASS,
    CheckResult,
    Instance,
    SuiteConfig,
    check_cmi_corollary,
    check_dpi,
    check_lemma2,
    check_lemma3_small,
    check_prop1_finite_n,
    check_prop3,
    check_theorem2,
    dumps_report,
    failed,
    gap,
    lemma2_sides,
    lemma3_sides,
    markov_chain_state,
    minimize_dm_over_hull,
    phase_atoms,
    prop1_values,
    random_instance,
    run_suite,
    summarize,
    theorem2_search,
    validate_config,
)
from petzlab.recovery import PetzReference


def classical_channel(p_y_given_x):
    """Kraus form of a stochastic matrix ``p[y, x]``."""
    p = np.asarray(p_y_given_x, dtype=float)
    ops = []
    for y in range(p.shape[0]):
        for x in range(p.shape[1]):
            k = np.zeros(p.shape)
            k[y, x] = math.sqrt(p[y, x])
            ops.append(k)
    return Channel(ops)


def classical_instance(rng, d_a=3, d_b=2):
    p, q = rng.dirichlet(np.ones(d_a)), rng.dirichlet(np.ones(d_a))
    stoch = rng.dirichlet(np.ones(d_b), size=d_a).T  # stoch[y, x]
    return p, q, stoch, Instance(np.diag(p).astype(complex), np.diag(q).astype(complex), classical_channel(stoch))


def unitary_instance(rng, d=3):
    return Instance(random_density(d, rng=rng), random_density(d, rng=rng), unitary_channel(random_unitary(d, rng)))


def test_gap_examples(rng):
    assert gap(unitary_instance(rng)) == pytest.approx(0.0, abs=1e-10)
    rho = random_density(3, rng=rng)
    assert gap(Instance(rho, rho, random_channel(3, 2, 2, rng))) == pytest.approx(0.0, abs=1e-12)
    for i in range(20):
        assert gap(random_instance(rng, 1 + i % 4, 1 + (i // 4) % 4)) >= -1e-9


def test_dpi_infinite_gap_skipped():
    inst = Instance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), unitary_channel(np.eye(2)))
    res = check_dpi(inst)
    assert math.isinf(res.values["gap"]) and res.status == "skipped"
    assert check_theorem2(inst).verdicts == {}


def test_theorem2_unitary_exact_recovery(rng):
    res = check_theorem2(unitary_instance(rng), phase_grid_size=4)
    assert res.status == PASS
    assert res.values["gap"] == pytest.approx(0.0, abs=1e-9)
    assert res.values["dmBest"] == pytest.approx(0.0, abs=1e-9)
    assert res.values["petzDM"] == pytest.approx(0.0, abs=1e-9)


def test_theorem2_classical_bayes_oracle(rng):
    for _ in range(5):
        p, q, stoch, inst = classical_instance(rng)
        # Bayes recovery: r(x) = sum_y q(x) stoch(y|x) (N p)(y) / (N q)(y)
        npp, nq = stoch @ p, stoch @ q
        bayes = q * (stoch.T @ (npp / nq))
        oracle = classical_relative_entropy(p, bayes)
        found = theorem2_search(inst, 4)
        assert found["petz_dm"] == pytest.approx(oracle, abs=1e-9)
        assert oracle <= gap(inst) + 1e-7
        assert found["dm_best"] <= gap(inst) + 1e-7


def test_theorem2_random_instances(rng):
    for d_a, d_b in [(2, 2), (2, 3), (3, 2)]:
        inst = random_instance(rng, d_a, d_b)
        res = check_theorem2(inst, 8)
        assert res.status == PASS, res.to_dict()
        assert res.values["dmBest"] <= res.values["petzDM"] + 1e-12
        assert res.best_map["kind"] == "convex"
        assert abs(sum(res.best_map["weights"]) - 1.0) <= 1e-12


def test_grid_doubling_does_not_increase_dm(rng):
    for _ in range(3):
        inst = random_instance(rng, 2, 2)
        coarse = theorem2_search(inst, 4)["dm_best"]
        fine = theorem2_search(inst, 8)["dm_best"]
        assert fine <= coarse + 1e-9


def test_phase_atoms_layout(rng):
    inst = random_instance(rng, 3, 2)
    ref = PetzReference(inst.sigma, inst.channel)
    thetas, phis = phase_atoms(ref, 4)
    assert thetas.shape == (4 ** 3, 3) and phis.shape == (4 ** 3, 2)
    assert np.all(thetas[0] == 0) and np.all(phis[0] == 0)
    assert np.all(thetas[:, 0] == 0) and np.all(phis[:, 0] == 0)
    thetas, phis = phase_atoms(ref, 8, make_rng(1), max_atoms=100)
    assert len(thetas) == 101 and np.all(thetas[0] == 0) and np.all(phis[0] == 0)


def test_hull_minimization_finds_mixture(rng):
    s1, s2 = random_density(2, rng=rng), random_density(2, rng=rng)
    rho = 0.3 * s1 + 0.7 * s2
    hull = minimize_dm_over_hull(rho, np.array([s1, s2]))
    assert hull.value <= 1e-8
    assert np.allclose(hull.weights, [0.3, 0.7], atol=1e-3)


def test_prop1_examples(rng):
    p, q, stoch, inst = classical_instance(rng, 2, 2)
    inst = Instance(inst.rho, inst.rho, inst.channel)
    (n, value, bound), = prop1_values(inst, 1)
    assert value == pytest.approx(0.0, abs=1e-10) and bound >= value

    inst = random_instance(rng, 2, 2)
    (n, value, bound), = prop1_values(inst, 1)
    assert bound - gap(inst) == pytest.approx(2 * math.log(2), abs=1e-12)

    res = check_prop1_finite_n(inst, 3)
    assert res.status == PASS and len(res.verdicts) == 3


def test_prop1_truncated_by_cap(rng, monkeypatch):
    monkeypatch.setenv("PETZLAB_CAP", "4")
    res = check_prop1_finite_n(random_instance(rng, 2, 2), 3)
    assert len(res.verdicts) == 2 and "truncated" in res.notes[0]


def test_lemma2_examples(rng):
    inst = unitary_instance(rng, 2)
    sp = random_density(2, rng=rng)
    for n in (1, 2):
        lhs, rhs = lemma2_sides(inst, sp, n)
        assert abs(lhs - rhs) <= 1e-9
    inst = random_instance(rng, 2, 2)
    assert check_lemma2(inst, sp, 1, 1e-9)
    assert check_lemma2(inst, sp, 2, 1e-9)


def test_lemma3_commuting_single_sigma_additive(rng):
    p, q = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2))
    rho, sigma = np.diag(p).astype(complex), np.diag(q).astype(complex)
    lhs, rhs = lemma3_sides(rho, [sigma], [1.0], 2)
    assert lhs.value / 2 == pytest.approx(rhs.value, abs=1e-6)


def test_lemma3_product_witness_is_additive(rng):
    rho, sigma = random_density(2, rng=rng), random_density(2, rng=rng)
    single = measured_relative_entropy(rho, sigma)
    doubled = witness_value(np.kron(single.witness, single.witness), np.kron(rho, rho), np.kron(sigma, sigma))
    assert doubled / 2 == pytest.approx(single.value, abs=1e-6)
    lhs, rhs = lemma3_sides(rho, [sigma], [1.0], 2)
    assert lhs.value / 2 >= rhs.value - 1e-9


def test_lemma3_rho_in_hull(rng):
    s1, s2 = random_density(2, rng=rng), random_density(2, rng=rng)
    rho = 0.5 * (s1 + s2)
    lhs, rhs = lemma3_sides(rho, [s1, s2], [0.5, 0.5], 2)
    assert rhs.value <= 1e-8
    assert check_lemma3_small(rho, [s1, s2], [0.5, 0.5], 2) is True


def test_lemma3_random(rng):
    rho = random_density(2, rng=rng)
    sigmas = [random_density(2, rng=rng) for _ in range(2)]
    assert check_lemma3_small(rho, sigmas, [0.5, 0.5], 2, 1e-5) is True


def test_prop3_examples(rng):
    res = check_prop3(unitary_instance(rng, 2))
    assert res.status == PASS and res.values["gap"] == pytest.approx(0.0, abs=1e-9)
    assert res.values["dmaxBits"] == pytest.approx(0.0, abs=1e-8)
    rho = random_density(3, rng=rng)
    res = check_prop3(Instance(rho, rho, random_channel(3, 2, 2, rng)))
    assert res.status == PASS and res.values["dmaxBits"] == pytest.approx(0.0, abs=1e-8)
    res = check_prop3(random_instance(rng, 3, 3))
    assert res.status == PASS and res.values["recoveryError"] <= 1e-8


def test_prop3_rank_deficient_skipped(rng):
    rho = np.diag([1.0, 0.0]).astype(complex)
    res = check_prop3(Instance(rho, np.eye(2) / 2, unitary_channel(np.eye(2))))
    assert res.status == "skipped"


def test_cmi_product_state(rng):
    rho = np.kron(np.kron(random_density(2, rng=rng), random_density(2, rng=rng)), random_density(2, rng=rng))
    res = check_cmi_corollary(rho, (2, 2, 2), 4)
    assert res.status == PASS
    assert abs(res.values["cmi"]) <= 1e-8
    assert res.values["dmBest"] <= 1e-6


def test_cmi_markov_chain(rng):
    p_b = rng.dirichlet(np.ones(2))
    rho = markov_chain_state(p_b, rng.dirichlet(np.ones(2), 2), rng.dirichlet(np.ones(2), 2))
    res = check_cmi_corollary(rho, (2, 2, 2), 4)
    assert res.status == PASS
    assert abs(res.values["cmi"]) <= 1e-8 and res.values["dmBest"] <= 1e-6


def test_cmi_random_state(rng):
    res = check_cmi_corollary(random_density(8, rng=rng), (2, 2, 2), 4)
    assert res.status == PASS, res.to_dict()
    assert res.values["gap"] + 1e-6 >= res.values["dmBest"] >= res.values["fidelityBound"] - 1e-6


def test_check_result_statuses():
    res = CheckResult("x")
    assert res.status == "skipped"
    res.record("a", 0.1, 1e-9)
    assert res.status == PASS
    res.record("b", 0.0, 0.0, inconclusive=True)
    assert res.status == INCONCLUSIVE
    res.record("c", -1.0, 1e-9)
    assert res.status == FAIL
    assert not failed([{"checks": {"x": {"verdicts": {"b": INCONCLUSIVE}}}}])
    assert failed([{"checks": {"x": res.to_dict()}}])


def test_config_validation():
    assert validate_config({}) == []
    errors = validate_config({"instances": -1, "dimsA": [], "checks": ["nope"], "bogus": 1,
                              "tolerances": {"dpi": "x", "zzz": 1}})
    assert len(errors) == 6
    assert validate_config([]) == ["config must be a JSON object"]


def test_run_suite_empty():
    assert run_suite({"instances": 0}) == []
    assert dumps_report([]) == "[]\n"


def test_run_suite_filter_and_determinism():
    cfg = {"instances": 2, "checks": ["lemma2", "dpi"], "seed": 3}
    first = run_suite(cfg)
    assert all(set(r["checks"]) == {"lemma2", "dpi"} for r in first)
    assert dumps_report(first) == dumps_report(run_suite(cfg))
    assert "timingsMs" not in first[0]
    other = run_suite(cfg, seed=4)
    assert dumps_report(other) != dumps_report(first)
    rows = summarize(first)
    assert [r["check"] for r in rows] == ["dpi", "lemma2"]
    assert rows[0]["pass"] == 2


def test_run_suite_parallel_matches_sequential():
    cfg = {"instances": 3, "checks": ["dpi", "prop3"], "seed": 11}
    assert dumps_report(run_suite(cfg)) == dumps_report(run_suite({**cfg, "workers": 2}))


def test_run_suite_report_is_json_serializable():
    cfg = SuiteConfig(instances=1, checks=list(CHECKS), phaseGridSize=2, recordTimings=True)
    report = json.loads(dumps_report(run_suite(cfg)))
    assert set(report[0]["checks"]) == set(CHECKS)
    assert report[0]["bestMap"]["kind"] == "convex"
    assert set(report[0]["timingsMs"]) == set(CHECKS)
    assert not failed(report)
