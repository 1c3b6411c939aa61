import json
from pathlib import Path

import numpy as np
import pytest

from dyonsolve.cli import ConfigError, RunConfig, emit_plot_data, main, read_profile_csv, write_profile_csv
from dyonsolve.params import derive

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


@pytest.fixture(scope="module")
def zero_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("zero")
    code = main(["run", "--config", str(CONFIGS / "zero_gauge.json"), "--out", str(out)])
    return code, out


def test_check_valid_config(capsys):
    assert main(["check", "--config", str(CONFIGS / "acceptance.json")]) == 0
    derived = json.loads(capsys.readouterr().out)
    assert derived["kappa_decay"] == pytest.approx(0.4)


def test_check_rejects_unknown_keys(tmp_path):
    base = json.loads((CONFIGS / "acceptance.json").read_text())
    for bad in ({**base, "extra": 1},
                {**base, "solver": {**base["solver"], "fptol": 1e-8}},
                {**base, "flags": {"orcale": True}},
                {**base, "parameters": {**base["parameters"], "lam": 2.0}}):
        assert main(["check", "--config", str(_cfg(tmp_path, bad))]) == 1
        with pytest.raises(ConfigError):
            RunConfig.from_dict(bad)


@pytest.mark.parametrize("solver", [{"N": 50}, {"N": 2_000_000}, {"fp_tol": 1e-16}, {"fp_tol": 0.1},
                                    {"theta": 0.0}, {"r_start": 2.0, "r_max": 1.0}])
def test_out_of_range_overrides(solver):
    base = json.loads((CONFIGS / "acceptance.json").read_text())
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "solver": solver})


def test_h1_violation_writes_error(tmp_path):
    base = json.loads((CONFIGS / "acceptance.json").read_text())
    base["parameters"].update(A0=0.6, B0=0.6)
    out = tmp_path / "out"
    assert main(["run", "--config", str(_cfg(tmp_path, base)), "--out", str(out)]) == 1
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "ValidationError"
    assert any(v.startswith("H1") for v in err["violations"])
    assert "A0^2" in err["message"]


def test_not_converged_writes_error(tmp_path):
    base = json.loads((CONFIGS / "acceptance.json").read_text())
    base["solver"].update(max_iters=1, N=300)
    out = tmp_path / "out"
    assert main(["run", "--config", str(_cfg(tmp_path, base)), "--out", str(out)]) == 1
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "NotConverged"
    assert len(err["trace"]["iterations"]) == 1


def test_csv_round_trip_is_exact(tmp_path, zero_solution):
    prof = zero_solution[2]
    write_profile_csv(tmp_path / "p.csv", prof)
    back = read_profile_csv(tmp_path / "p.csv")
    assert np.array_equal(back.grid, prof.grid)
    assert np.array_equal(back.values, prof.values)
    assert np.array_equal(back.derivs, prof.derivs)
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert header.startswith("r,f,rho,A,B,h,sigma,df")


def test_empty_profile_plot_guard(tmp_path, accept_consts):
    with pytest.raises(ValueError):
        emit_plot_data(None, accept_consts, tmp_path)


def test_run_writes_all_outputs(zero_run):
    _, out = zero_run
    for name in ("params.json", "profile.csv", "trace.json", "report.json", "plotdata_fields.csv",
                 "plotdata_decay.csv", "oracle_profile.csv", "compare.json"):
        assert (out / name).is_file(), name
    assert not (out / "error.json").exists()
    cmp = json.loads((out / "compare.json").read_text())
    assert cmp["max_gap"] <= 1e-4


def test_exit_status_tracks_report(zero_run):
    code, out = zero_run
    report = json.loads((out / "report.json").read_text())
    trace = json.loads((out / "trace.json").read_text())
    cmp = json.loads((out / "compare.json").read_text())
    assert code == (0 if report["overall"] and trace["converged"] and cmp["passed"] else 1)


def test_zero_run_gauge_columns(zero_run):
    _, out = zero_run
    data = np.genfromtxt(out / "plotdata_fields.csv", delimiter=",", names=True)
    assert np.all(data["A"] == 0.0) and np.all(data["B"] == 0.0)


def test_decay_reference_line(zero_run):
    _, out = zero_run
    report = json.loads((out / "report.json").read_text())
    fit = next(d for d in report["decay_fits"] if d["quantity_id"] == "f")
    d = np.genfromtxt(out / "plotdata_decay.csv", delimiter=",", names=True)
    r = d["r"]
    i0 = int(np.searchsorted(r, fit["window"][0]))
    kappa = json.loads((out / "params.json").read_text())["derived"]["kappa_decay"]
    assert d["ref_f"][i0] == pytest.approx(d["log_f"][i0], abs=1e-12)
    assert np.allclose(d["ref_f"], -kappa * (r - r[i0]) + d["log_f"][i0], rtol=0, atol=1e-12)


def test_params_json_round_trip(zero_run):
    _, out = zero_run
    echo = json.loads((out / "params.json").read_text())
    cfg = RunConfig.from_dict(echo)
    assert derive(cfg.parameters, cfg.solver.get("alpha")).to_dict() == echo["derived"]
    echo["derived"]["kappa_decay"] += 1e-15
    with pytest.raises(ConfigError):
        RunConfig.from_dict(echo)


def test_profile_is_deterministic(zero_run, tmp_path):
    _, out = zero_run
    cfg = json.loads((CONFIGS / "zero_gauge.json").read_text())
    cfg["flags"]["oracle"] = False
    again = tmp_path / "again"
    main(["run", "--config", str(_cfg(tmp_path, cfg)), "--out", str(again)])
    assert (again / "profile.csv").read_bytes() == (out / "profile.csv").read_bytes()
