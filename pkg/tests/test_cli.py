"""End-to-end tests of the batch CLI, driven in-process through main()."""
import filecmp
import json
from pathlib import Path

import pytest

from kesym.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return str(p)


def _edited(base, tmp_path, name, mutate):
    cfg = json.loads((CONFIGS / base).read_text(encoding="utf-8"))
    mutate(cfg)
    return _write(tmp_path, name, cfg)


# ---------------------------------------------------------------------------
# verify-symmetry


def test_verify_symmetry_pass(capsys):
    code = main(["verify-symmetry", "--config",
                 str(CONFIGS / "sl2_free.json")])
    out = capsys.readouterr().out
    assert code == 0
    for name in ("G1", "G2", "G3"):
        assert f"{name}: pass" in out


def test_verify_symmetry_single_generator(capsys):
    code = main(["verify-symmetry", "--config",
                 str(CONFIGS / "sl2_free.json"), "--generator", "G2"])
    out = capsys.readouterr().out
    assert code == 0
    assert "G2: pass" in out
    assert "G1" not in out


def test_verify_symmetry_unknown_generator(capsys):
    code = main(["verify-symmetry", "--config",
                 str(CONFIGS / "sl2_free.json"), "--generator", "NOPE"])
    err = capsys.readouterr().err
    assert code == 2
    assert "config error" in err


def test_verify_symmetry_failure(tmp_path, capsys):
    path = _edited("sl2_free.json", tmp_path, "bad.json",
                   lambda c: c["generators"].update(
                       {"BAD": {"xi": "x^2", "eta1": "0", "eta2": "0"}}))
    code = main(["verify-symmetry", "--config", path])
    out = capsys.readouterr().out
    assert code == 1
    assert "BAD: FAIL" in out
    assert "not a symmetry: BAD" in out


def test_verify_symmetry_unbound_function(capsys):
    # no model section: the default coupling shapes have no closed bodies
    code = main(["verify-symmetry", "--config",
                 str(CONFIGS / "exp_family.json")])
    err = capsys.readouterr().err
    assert code == 2
    assert "config error" in err


# ---------------------------------------------------------------------------
# determining


def test_determining_stdout(capsys):
    code = main(["determining", "--config", str(CONFIGS / "sl2_free.json")])
    out = capsys.readouterr().out
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) >= 9
    assert all(line.endswith("= 0") for line in lines)
    assert any("xi_xx" in line for line in lines)


def test_determining_file_output(tmp_path, capsys):
    code = main(["determining", "--config", str(CONFIGS / "sl2_free.json"),
                 "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "wrote" in out
    text = (tmp_path / "determining.txt").read_text(encoding="utf-8")
    assert all(line.endswith("= 0") for line in text.strip().splitlines())


# ---------------------------------------------------------------------------
# commutators


def test_commutators_table(capsys):
    code = main(["commutators", "--config", str(CONFIGS / "sl2_free.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "[G1, G2] = G1" in out
    assert "[G1, G3] = (2)*G2" in out
    assert "[G2, G3] = G3" in out
    assert "classification: sl2R" in out


def test_commutators_symbolic_family(capsys):
    code = main(["commutators", "--config",
                 str(CONFIGS / "exp_family.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "[H1, H2] = (2*b^3)*H3" in out
    assert "classification: sl2R" in out


def test_commutators_symbolic_without_values(tmp_path, capsys):
    path = _edited("exp_family.json", tmp_path, "noconst.json",
                   lambda c: c.pop("constants"))
    code = main(["commutators", "--config", path])
    out = capsys.readouterr().out
    assert code == 0
    assert "[H1, H2] = (2*b^3)*H3" in out
    assert "needs numeric values" in out


def test_commutators_need_two(tmp_path, capsys):
    path = _edited("sl2_free.json", tmp_path, "one.json",
                   lambda c: c.update(
                       generators={"G1": c["generators"]["G1"]}))
    code = main(["commutators", "--config", path])
    assert code == 2
    assert "at least two" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# simulate / pinney


def test_simulate_run(tmp_path, capsys):
    code = main(["simulate", "--config", str(CONFIGS / "ke_run.json"),
                 "--out", str(tmp_path), "--polar"])
    out = capsys.readouterr().out
    assert code == 0
    assert "drift check passed" in out
    traj = (tmp_path / "trajectory.csv").read_text(encoding="utf-8")
    assert traj.splitlines()[0] == "t,x,y,xdot,ydot,I,E"
    drift = (tmp_path / "drift.csv").read_text(encoding="utf-8")
    assert drift.splitlines()[0] == "t,invariant,value,delta"
    polar = (tmp_path / "polar.csv").read_text(encoding="utf-8")
    assert polar.splitlines()[0] == "t,r,theta,rdot,thetadot"
    assert len(polar.splitlines()) == 202


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        assert main(["simulate", "--config", str(CONFIGS / "ke_run.json"),
                     "--out", str(d)]) == 0
    for name in ("trajectory.csv", "drift.csv"):
        assert filecmp.cmp(a / name, b / name, shallow=False)
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_missing_run_section(tmp_path, capsys):
    path = _edited("ke_run.json", tmp_path, "norun.json",
                   lambda c: c.pop("run"))
    code = main(["simulate", "--config", path])
    assert code == 2
    assert "required" in capsys.readouterr().err


def test_simulate_bad_init_length(tmp_path, capsys):
    path = _edited("ke_run.json", tmp_path, "badinit.json",
                   lambda c: c["run"].update(init=[1.0, 1.0]))
    code = main(["simulate", "--config", path])
    assert code == 2
    assert "init" in capsys.readouterr().err


def test_pinney_run(tmp_path, capsys):
    code = main(["pinney", "--config", str(CONFIGS / "pinney.json"),
                 "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "drift check passed" in out
    text = (tmp_path / "pinney.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0] == "t,rho,rhodot,sigma,first_integral"
    assert len(text.splitlines()) == 202


# ---------------------------------------------------------------------------
# cartan / lagrangian-check


def test_cartan_run(capsys):
    code = main(["cartan", "--config", str(CONFIGS / "ke_run.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "xi = 0" in out
    assert "[pass] conservation" in out
    assert "Hessian pairing" in out


def test_lagrangian_check_pass(capsys):
    code = main(["lagrangian-check", "--config",
                 str(CONFIGS / "ke_run.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "[pass] coupling compatibility" in out
    assert out.count("Euler-Lagrange matches") == 2
    assert "[FAIL]" not in out


def test_lagrangian_check_incompatible(tmp_path, capsys):
    path = _edited("ke_run.json", tmp_path, "incompat.json",
                   lambda c: c["model"].update(f="u", g="u"))
    code = main(["lagrangian-check", "--config", path])
    out = capsys.readouterr().out
    assert code == 1
    assert "[FAIL]" in out


# ---------------------------------------------------------------------------
# config and usage errors


def test_missing_config_file(capsys):
    code = main(["determining", "--config", "no_such_file.json"])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json", encoding="utf-8")
    code = main(["determining", "--config", str(p)])
    assert code == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    path = _edited("sl2_free.json", tmp_path, "extra.json",
                   lambda c: c.update(bogus=1))
    code = main(["determining", "--config", path])
    err = capsys.readouterr().err
    assert code == 2
    assert "at /" in err  # JSON-pointer locating the offender


def test_unknown_model_key(tmp_path, capsys):
    path = _edited("sl2_free.json", tmp_path, "badmodel.json",
                   lambda c: c["model"].update(q=3))
    code = main(["determining", "--config", path])
    err = capsys.readouterr().err
    assert code == 2
    assert "at /model" in err


def test_bad_expression(tmp_path, capsys):
    path = _edited("sl2_free.json", tmp_path, "badexpr.json",
                   lambda c: c["model"].update(w="1 +* 2"))
    code = main(["determining", "--config", path])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_output_path_escape(tmp_path, capsys):
    path = _edited("ke_run.json", tmp_path, "escape.json",
                   lambda c: c["outputs"].update(
                       trajectory="../evil.csv"))
    code = main(["simulate", "--config", path, "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 2
    assert "must stay inside the output directory" in err
    assert not (tmp_path.parent / "evil.csv").exists()


def test_usage_errors():
    with pytest.raises(SystemExit) as ei:
        main([])
    assert ei.value.code == 2
    with pytest.raises(SystemExit) as ei:
        main(["verify-symmetry"])  # --config is required
    assert ei.value.code == 2
    with pytest.raises(SystemExit) as ei:
        main(["simulate", "--config", "x.json", "--rtol", "-1"])
    assert ei.value.code == 2
