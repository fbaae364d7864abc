import json
import math
from pathlib import Path

import numpy as np
import pytest

import petzlab.harness as harness
from petzlab import io as pio
from petzlab import make_rng, random_channel, random_density, tensor_power
from petzlab.cli import default_config, main
from petzlab.errors import ShapeError

DATA = Path(__file__).parent / "data"
KL_EXAMPLE = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)


def parse_record(text):
    out = {}
    for line in text.strip().splitlines():
        key, value = line.split(None, 1)
        out[key] = value.strip()
    return out


@pytest.fixture
def instance(tmp_path):
    rng = make_rng(99)
    sigma = random_density(3, rng=rng)
    ch = random_channel(3, 2, 2, rng)
    pio.save_matrix(tmp_path / "sigma.json", sigma)
    pio.save_channel(tmp_path / "channel.json", ch)
    pio.save_matrix(tmp_path / "nsigma.json", ch(sigma))
    pio.save_matrix(tmp_path / "nsigma2.json", tensor_power(ch(sigma), 2), [2, 2])
    return tmp_path, sigma, ch


def test_matrix_round_trip(tmp_path, rng):
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    pio.save_matrix(tmp_path / "a.json", a)
    back, dims = pio.load_matrix(tmp_path / "a.json")
    assert np.max(np.abs(back - a)) <= 1e-12 and dims == [3]
    data = json.loads((tmp_path / "a.json").read_text())
    assert data["matrix"][0][1] == [a[0, 1].real, a[0, 1].imag]


def test_channel_round_trip(tmp_path, rng):
    ch = random_channel(3, 2, 2, rng)
    pio.save_channel(tmp_path / "c.json", ch)
    back = pio.load_channel(tmp_path / "c.json")
    assert (back.dim_in, back.dim_out) == (3, 2)
    assert all(np.max(np.abs(a - b)) <= 1e-12 for a, b in zip(ch.kraus, back.kraus))


def test_parse_errors_carry_context(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dims": [2], "matrix": [[[1, 0], [0, 0]], [[0, 0], "x"]]}')
    with pytest.raises(ShapeError, match=r"bad.json.matrix\[1\]\[1\]"):
        pio.load_matrix(bad)
    bad.write_text('{"dims": [3], "matrix": [[[1, 0]]]}')
    with pytest.raises(ShapeError, match="dims"):
        pio.load_matrix(bad)
    bad.write_text("{not json")
    with pytest.raises(ShapeError, match="invalid JSON"):
        pio.load_matrix(bad)


def test_fmt():
    assert pio.fmt(1 / 3) == "0.333333333333"
    assert pio.fmt(math.inf) == "infinity"
    assert pio.fmt(True) == "true"


def test_entropy_equal_states(tmp_path, capsys, rng):
    rho = random_density(2, rng=rng)
    pio.save_matrix(tmp_path / "r.json", rho)
    assert main(["entropy", str(tmp_path / "r.json"), str(tmp_path / "r.json")]) == 0
    rec = parse_record(capsys.readouterr().out)
    for key in ("D", "D_M", "-2logF", "D_max"):
        assert abs(float(rec[key])) <= 1e-9
    assert float(rec["F"]) == pytest.approx(1.0)


def test_entropy_classical_pair_and_bits(tmp_path, capsys):
    pio.save_matrix(tmp_path / "r.json", np.diag([0.5, 0.5]))
    pio.save_matrix(tmp_path / "s.json", np.diag([0.25, 0.75]))
    args = ["entropy", str(tmp_path / "r.json"), str(tmp_path / "s.json")]
    main(args)
    nats = parse_record(capsys.readouterr().out)
    assert float(nats["D"]) == pytest.approx(KL_EXAMPLE, rel=1e-11)
    assert float(nats["D_M"]) == pytest.approx(KL_EXAMPLE, rel=1e-11)
    assert nats["D_M_converged"] == "true"
    main(args + ["--base", "bits"])
    bits = parse_record(capsys.readouterr().out)
    for key in ("D", "D_M", "-2logF", "D_max"):
        assert float(bits[key]) == pytest.approx(float(nats[key]) / math.log(2), rel=1e-11)
    assert bits["F"] == nats["F"]


def test_entropy_disjoint_support(tmp_path, capsys):
    pio.save_matrix(tmp_path / "r.json", np.diag([1.0, 0.0]))
    pio.save_matrix(tmp_path / "s.json", np.diag([0.0, 1.0]))
    main(["entropy", str(tmp_path / "r.json"), str(tmp_path / "s.json")])
    rec = parse_record(capsys.readouterr().out)
    assert rec["D"] == "infinity" and float(rec["F"]) == 0.0


def test_entropy_gap(instance, capsys):
    path, sigma, ch = instance
    rng = make_rng(1)
    pio.save_matrix(path / "rho.json", random_density(3, rng=rng))
    main(["entropy", str(path / "rho.json"), str(path / "sigma.json"), "--channel", str(path / "channel.json")])
    rec = parse_record(capsys.readouterr().out)
    assert float(rec["gap"]) >= -1e-9


def test_recover_petz(instance, capsys):
    path, sigma, ch = instance
    out = path / "out.json"
    assert main(["recover", "--sigma", str(path / "sigma.json"), "--channel", str(path / "channel.json"),
                 "--x", str(path / "nsigma.json"), "--kind", "petz", "--out", str(out)]) == 0
    rec = parse_record(capsys.readouterr().out)
    assert float(rec["trace_residual"]) <= 1e-9
    back, _ = pio.load_matrix(out)
    assert np.max(np.abs(back - sigma)) <= 1e-9


def test_recover_rotated_zero_matches_petz(instance):
    path, sigma, ch = instance
    common = ["--sigma", str(path / "sigma.json"), "--channel", str(path / "channel.json"),
              "--x", str(path / "nsigma.json")]
    main(["recover", *common, "--kind", "petz", "--out", str(path / "p.json")])
    main(["recover", *common, "--kind", "rotatedPetz", "--out", str(path / "r.json")])
    assert np.array_equal(pio.load_matrix(path / "p.json")[0], pio.load_matrix(path / "r.json")[0])


def test_recover_pinching_and_spec(instance):
    path, sigma, ch = instance
    common = ["--sigma", str(path / "sigma.json"), "--channel", str(path / "channel.json")]
    main(["recover", *common, "--x", str(path / "nsigma2.json"), "--kind", "pinchingRecovery", "--n", "2",
          "--out", str(path / "o.json")])
    back, dims = pio.load_matrix(path / "o.json")
    assert dims == [3, 3]
    assert np.max(np.abs(back - tensor_power(sigma, 2))) <= 1e-9
    spec = {"kind": "convex", "weights": [0.25, 0.75],
            "atoms": [{"theta": [0, 1, 2], "phi": [0, 1]}, {"theta": [0, 0, 0], "phi": [0, 0]}]}
    (path / "spec.json").write_text(json.dumps(spec))
    main(["recover", *common, "--x", str(path / "nsigma.json"), "--spec", str(path / "spec.json"),
          "--out", str(path / "c.json")])
    assert np.max(np.abs(pio.load_matrix(path / "c.json")[0] - sigma)) <= 1e-9


def test_recover_invalid_kind_is_usage_error(instance, capsys):
    path, _, _ = instance
    with pytest.raises(SystemExit) as exc:
        main(["recover", "--sigma", str(path / "sigma.json"), "--channel", str(path / "channel.json"),
              "--x", str(path / "nsigma.json"), "--kind", "bogus", "--out", str(path / "o.json")])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert "petz, rotatedPetz, convex, pinchingRecovery" in err
    assert not (path / "o.json").exists()


def test_cli_refuses_large_matrices(tmp_path):
    pio.save_matrix(tmp_path / "big.json", np.eye(101) / 101)
    with pytest.raises(SystemExit) as exc:
        main(["entropy", str(tmp_path / "big.json"), str(tmp_path / "big.json")])
    assert exc.value.code == 2


def test_cli_parse_error_exit_code(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("[1, 2]")
    assert main(["entropy", str(tmp_path / "bad.json"), str(tmp_path / "bad.json")]) == 2
    assert "bad.json" in capsys.readouterr().err


def test_verify_malformed_config(tmp_path):
    (tmp_path / "cfg.json").write_text('{"instances": "many"}')
    out = tmp_path / "report.json"
    assert main(["verify", str(tmp_path / "cfg.json"), "--out", str(out)]) == 2
    assert not out.exists()
    (tmp_path / "cfg.json").write_text("{oops")
    assert main(["verify", str(tmp_path / "cfg.json"), "--out", str(out)]) == 2
    assert main(["verify", str(tmp_path / "cfg.json"), "--tol", "dpi", "--out", str(out)]) == 2
    assert not out.exists()


def test_verify_filter_and_summary(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"instances": 2, "checks": ["lemma2"]}))
    out = tmp_path / "report.json"
    assert main(["verify", str(tmp_path / "cfg.json"), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert all(list(r["checks"]) == ["lemma2"] for r in report)
    summary = capsys.readouterr().out.splitlines()
    assert summary[0].split() == ["check", "instances", "pass", "fail", "inconclusive", "skipped", "worstSlack"]
    assert summary[1].split()[:4] == ["lemma2", "2", "2", "0"]


def test_verify_failing_verdict_exit(tmp_path, capsys, monkeypatch):
    real = harness.check_dpi

    def strict(inst, tol):
        res = real(inst, tol)
        res.record("forced", -1.0, tol)
        return res

    monkeypatch.setattr(harness, "check_dpi", strict)
    (tmp_path / "cfg.json").write_text(json.dumps({"instances": 1, "checks": ["dpi"]}))
    out = tmp_path / "r.json"
    assert main(["verify", str(tmp_path / "cfg.json"), "--out", str(out)]) == 1
    assert json.loads(out.read_text())[0]["checks"]["dpi"]["status"] == "fail"
    assert capsys.readouterr().out.splitlines()[1].split()[:4] == ["dpi", "1", "0", "1"]


def test_verify_runtime_error_exit(tmp_path, capsys, monkeypatch):
    (tmp_path / "cfg.json").write_text(json.dumps({"instances": 1, "dimsA": [3], "checks": ["theorem2"],
                                                   "phaseGridSize": 2}))
    def boom(*args, **kwargs):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(harness, "check_theorem2", boom)
    out = tmp_path / "r.json"
    assert main(["verify", str(tmp_path / "cfg.json"), "--out", str(out)]) == 3
    assert "instance-0" in capsys.readouterr().err
    assert not out.exists()


def test_report_formats(tmp_path, capsys):
    (tmp_path / "empty.json").write_text("[]")
    assert main(["report", str(tmp_path / "empty.json"), "--format", "csv"]) == 0
    assert capsys.readouterr().out == ",".join(pio.CSV_COLUMNS) + "\n"
    (tmp_path / "cfg.json").write_text(json.dumps({"instances": 1, "checks": ["dpi", "lemma2", "prop3"]}))
    main(["verify", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "r.json")])
    capsys.readouterr()
    main(["report", str(tmp_path / "r.json"), "--format", "csv"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split(",")[5] for line in lines[1:]] == ["dpi", "lemma2", "prop3"]
    with pytest.raises(SystemExit) as exc:
        main(["report", str(tmp_path / "r.json"), "--format", "xml"])
    assert exc.value.code == 2


def test_rand_writes_loadable_instance(tmp_path, capsys):
    assert main(["rand", "--dim-a", "3", "--dim-b", "2", "--seed", "5", "--out", str(tmp_path / "inst")]) == 0
    rho, _ = pio.load_matrix(tmp_path / "inst" / "rho.json")
    ch = pio.load_channel(tmp_path / "inst" / "channel.json")
    assert abs(np.trace(rho) - 1) <= 1e-12 and (ch.dim_in, ch.dim_out) == (3, 2)
    first = (tmp_path / "inst" / "rho.json").read_text()
    main(["rand", "--dim-a", "3", "--dim-b", "2", "--seed", "5", "--out", str(tmp_path / "again")])
    assert (tmp_path / "again" / "rho.json").read_text() == first


def test_shipped_default_config():
    cfg = default_config()
    assert cfg["seed"] == 42


def test_default_suite_markdown_golden(tmp_path, capsys):
    out = tmp_path / "default.json"
    assert main(["verify", "--out", str(out)]) == 0
    capsys.readouterr()
    main(["report", str(out), "--format", "markdown"])
    assert capsys.readouterr().out == (DATA / "default_report.md").read_text()


def test_report_renders_serialized_infinity():
    reports = [{"index": 0, "instance": {"label": "x"},
                "checks": {"prop3": {"status": "pass", "values": {"dmaxBits": "inf"}, "slacks": {"s": 1.0}}},
                "gap": "inf"}]
    row = pio.render_csv(reports).splitlines()[1].split(",")
    assert row[pio.CSV_COLUMNS.index("gap")] == "infinity"
