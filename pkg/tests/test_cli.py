import csv
import json
import math

import jsonschema
import numpy as np
import pytest

from fbl import cli, schema_path
from fbl.distmath import g_closed, v_closed
from fbl.rates import binary_entropy, bpsk_dolinar_capacity


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def column(rows, header, name):
    i = header.index(name)
    return np.array([float(r[i]) for r in rows])


def load_schema(name):
    return json.loads(schema_path(name).read_text())


@pytest.fixture(scope="module")
def figs(tmp_path_factory):
    d = tmp_path_factory.mktemp("figs")
    out = {}
    for name in ("fig1", "fig2", "fig3"):
        path = d / f"{name}.csv"
        assert cli.run([name, "--out", str(path)]) == 0
        out[name] = path
    return out


class TestFig1:
    def test_header_and_rows(self, figs):
        header, rows = read_csv(figs["fig1"])
        assert header == ["n_s", "v", "v_het", "ratio"]
        assert len(rows) == 200
        ns = column(rows, header, "n_s")
        assert ns[0] == pytest.approx(1e-4) and ns[-1] == pytest.approx(1e4)
        assert np.all(np.diff(np.log10(ns)) > 0)

    def test_unit_row(self, figs):
        header, rows = read_csv(figs["fig1"])
        ns = column(rows, header, "n_s")
        i = int(np.where(ns == 1.0)[0][0])
        assert column(rows, header, "v")[i] == 2.0

    def test_ratio_limit(self, figs):
        header, rows = read_csv(figs["fig1"])
        assert abs(column(rows, header, "ratio")[-1] - 1) <= 1e-3

    def test_nats(self, tmp_path, figs):
        path = tmp_path / "f1n.csv"
        assert cli.run(["fig1", "--out", str(path), "--nats"]) == 0
        header, rows = read_csv(path)
        _, bits = read_csv(figs["fig1"])
        np.testing.assert_allclose(
            column(rows, header, "v"), column(bits, header, "v") * math.log(2) ** 2, rtol=1e-15
        )
        np.testing.assert_array_equal(column(rows, header, "ratio"), column(bits, header, "ratio"))


class TestFig2:
    def test_columns(self, figs):
        header, rows = read_csv(figs["fig2"])
        assert header == ["n", "holevo_rate", "heterodyne_rate", "holevo_capacity", "het_capacity"]
        n = column(rows, header, "n")
        assert n[0] == 100 and n[-1] == 10**7
        assert np.all(column(rows, header, "holevo_capacity") == g_closed(0.1))
        hol = column(rows, header, "holevo_rate")
        het = column(rows, header, "heterodyne_rate")
        assert np.all(np.diff(hol) >= 0) and np.all(np.diff(het) >= 0)
        assert np.all(hol > het)


class TestFig3:
    def test_columns(self, figs):
        header, rows = read_csv(figs["fig3"])
        assert header == ["n", "c1", "c_infinity", "dt_bound_rate", "bpsk_normal_rate"]
        c_inf = column(rows, header, "c_infinity")
        assert c_inf[0] == pytest.approx(binary_entropy(0.15), rel=1e-3)
        assert np.all(c_inf == c_inf[0])
        c1 = column(rows, header, "c1")
        assert np.all(c1 == bpsk_dolinar_capacity(0.1783))
        dt = column(rows, header, "dt_bound_rate")
        assert np.all(np.diff(dt) >= 0)
        assert np.all(dt <= c1)
        n = column(rows, header, "n")
        normal = column(rows, header, "bpsk_normal_rate")
        assert n[-1] == 10**6
        assert abs(normal[-1] / c_inf[-1] - 1) <= 0.01


class TestDeterminism:
    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3"])
    def test_rerun_byte_identical(self, tmp_path, figs, name):
        path = tmp_path / "again.csv"
        assert cli.run([name, "--out", str(path)]) == 0
        assert path.read_bytes() == figs[name].read_bytes()

    def test_unwritable_output(self, tmp_path, capsys):
        assert cli.run(["fig1", "--out", str(tmp_path / "missing" / "x.csv")]) == 1
        assert "missing" in capsys.readouterr().err


def sweep_config(tmp_path, **over):
    cfg = {
        "method": "holevo_normal",
        "grid": {"variable": "n", "min": 10, "max": 10000, "points": 12, "scale": "log"},
        "fixed": {"eps": 0.5, "mean_photon": 0.4, "transmissivity": 0.5},
        "output": str(tmp_path / "sweep.csv"),
        "format": "csv",
    }
    cfg.update(over)
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


class TestSweep:
    def test_half_is_constant_capacity(self, tmp_path):
        path, cfg = sweep_config(tmp_path)
        assert cli.run(["sweep", "--config", str(path)]) == 0
        header, rows = read_csv(cfg["output"])
        assert header == cli.SWEEP_HEADER
        assert len(rows) == 12
        np.testing.assert_allclose(column(rows, header, "rate"), g_closed(0.2), rtol=1e-15)
        assert {r[header.index("method")] for r in rows} == {"holevo_normal"}

    def test_json_validates(self, tmp_path):
        path, cfg = sweep_config(
            tmp_path,
            method="constrained_normal",
            grid={"variable": "eps", "min": 1e-6, "max": 0.1, "points": 7, "scale": "log"},
            fixed={"n": 100, "mean_photon": 0.5, "delta1": 0.01, "delta2": 0.1, "ww14_constant": 0.9},
            format="json",
            output=str(tmp_path / "out.json"),
        )
        assert cli.run(["sweep", "--config", str(path)]) == 0
        doc = json.loads((tmp_path / "out.json").read_text())
        jsonschema.validate(doc, load_schema("sweep"))
        assert len(doc["rows"]) == 7
        assert all(isinstance(r["feasible"], bool) for r in doc["rows"])

    @pytest.mark.parametrize("method", ["heterodyne_normal", "bpsk_holevo_normal", "bpsk_dolinar_capacity", "dt_bound"])
    def test_every_method_runs(self, tmp_path, method):
        path, cfg = sweep_config(
            tmp_path, method=method,
            grid={"variable": "N_S", "min": 0.05, "max": 1.0, "points": 4},
            fixed={"n": 200, "eps": 1e-3},
        )
        assert cli.run(["sweep", "--config", str(path)]) == 0
        header, rows = read_csv(cfg["output"])
        np.testing.assert_allclose(column(rows, header, "mean_photon"), np.linspace(0.05, 1.0, 4))

    def test_out_override_and_units(self, tmp_path):
        path, cfg = sweep_config(tmp_path)
        alt = tmp_path / "alt.csv"
        assert cli.run(["sweep", "--config", str(path), "--out", str(alt), "--nats"]) == 0
        header, rows = read_csv(alt)
        np.testing.assert_allclose(column(rows, header, "rate"), g_closed(0.2) * math.log(2), rtol=1e-15)

    def test_round_trip_idempotent(self, tmp_path):
        _, raw = sweep_config(tmp_path)
        once = cli.SweepConfig.from_dict(raw).to_dict()
        twice = cli.SweepConfig.from_dict(once).to_dict()
        assert once == twice
        assert json.dumps(once, sort_keys=True) == json.dumps(twice, sort_keys=True)

    @pytest.mark.parametrize(
        "over,field",
        [
            (dict(method="magic"), "method"),
            (dict(grid={"variable": "n", "min": 5, "max": 1, "points": 3}), "grid.min"),
            (dict(grid={"variable": "n", "min": 1, "max": 5, "points": 1}), "grid.points"),
            (dict(grid={"variable": "eps", "min": 0.1, "max": 1.5, "points": 3}), "grid.min"),
            (dict(grid={"variable": "q", "min": 1, "max": 5, "points": 3}), "grid.variable"),
            (dict(fixed={"eps": 0.1}), "fixed.mean_photon"),
            (dict(fixed={"eps": 0.1, "mean_photon": 0.1, "colour": 1}), "fixed.colour"),
            (dict(format="xml"), "format"),
        ],
    )
    def test_config_errors_name_field(self, tmp_path, capsys, over, field):
        path, _ = sweep_config(tmp_path, **over)
        assert cli.run(["sweep", "--config", str(path)]) == 2
        assert field in capsys.readouterr().err

    def test_missing_file_is_config_error(self, tmp_path):
        assert cli.run(["sweep", "--config", str(tmp_path / "nope.json")]) == 2

    def test_bad_json_is_config_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.run(["sweep", "--config", str(p)]) == 2

    def test_numeric_error_code(self, tmp_path, capsys):
        path, _ = sweep_config(
            tmp_path, method="constrained_normal",
            fixed={"eps": 0.1, "mean_photon": 0.1, "delta1": 0.5, "delta2": 0.1, "ww14_constant": 0.5},
        )
        assert cli.run(["sweep", "--config", str(path)]) == 3
        assert "delta1" in capsys.readouterr().err


def sim_config(tmp_path, **over):
    cfg = {
        "ensemble": {"kind": "bpsk", "mean_photon": 0.1783},
        "M": 2,
        "eps": 0.3,
        "eta_slack": 0.1,
        "d": 25,
        "trials": 200,
        "seed": 7,
        "output": str(tmp_path / "report.json"),
    }
    cfg.update(over)
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


class TestSimulate:
    def test_report_validates(self, tmp_path):
        path, cfg = sim_config(tmp_path)
        assert cli.run(["simulate", "--config", str(path)]) == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        jsonschema.validate(doc, load_schema("simulate"))
        rep = doc["report"]
        assert rep["seed"] == 7 and rep["d"] == 25
        assert rep["bound_holds"] is True
        assert rep["mean_error"] <= rep["analytic_bound"]

    def test_byte_identical_across_runs_and_threads(self, tmp_path, monkeypatch):
        path, _ = sim_config(tmp_path)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert cli.run(["simulate", "--config", str(path), "--out", str(a)]) == 0
        monkeypatch.setenv("FBL_THREADS", "4")
        assert cli.run(["simulate", "--config", str(path), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_flag_overrides(self, tmp_path):
        path, _ = sim_config(tmp_path, seed=None)
        assert cli.run(["simulate", "--config", str(path)]) == 2
        assert cli.run(["simulate", "--config", str(path), "--seed", "5"]) == 0
        assert json.loads((tmp_path / "report.json").read_text())["report"]["seed"] == 5

    def test_single_message(self, tmp_path):
        path, _ = sim_config(tmp_path, M=1)
        assert cli.run(["simulate", "--config", str(path)]) == 0
        rep = json.loads((tmp_path / "report.json").read_text())["report"]
        assert rep["mean_error"] <= 0.3 - 0.1 + 3 * (rep["ci99_error"][1] - rep["ci99_error"][0])
        assert rep["mean_collision"] is None

    def test_finite_ensemble(self, tmp_path):
        ens = {"kind": "finite", "states": [
            {"alpha": [0.5, 0.0], "probability": 0.5},
            {"amplitudes": [[0, 0], [1, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0]],
             "probability": 0.5},
        ]}
        path, _ = sim_config(tmp_path, ensemble=ens, d=10, trials=50)
        assert cli.run(["simulate", "--config", str(path)]) == 0

    def test_round_trip_idempotent(self, tmp_path):
        _, raw = sim_config(tmp_path)
        once = cli.SimConfig.from_dict(raw).to_dict()
        assert cli.SimConfig.from_dict(once).to_dict() == once

    @pytest.mark.parametrize(
        "over,field",
        [
            (dict(M=0), "M"),
            (dict(eta_slack=0.5), "eta_slack"),
            (dict(ensemble={"kind": "squeezed"}), "ensemble.kind"),
            (dict(ensemble={"kind": "bpsk"}), "ensemble.mean_photon"),
            (dict(trials="many"), "trials"),
            (dict(defect_tolerance=2.0), "defect_tolerance"),
        ],
    )
    def test_config_errors(self, tmp_path, capsys, over, field):
        path, _ = sim_config(tmp_path, **over)
        assert cli.run(["simulate", "--config", str(path)]) == 2
        assert field in capsys.readouterr().err

    def test_truncation_is_numeric_error(self, tmp_path, capsys):
        path, _ = sim_config(tmp_path, ensemble={"kind": "bpsk", "mean_photon": 4.0}, d=6)
        assert cli.run(["simulate", "--config", str(path)]) == 3
        assert "increase d" in capsys.readouterr().err

    def test_bad_threads(self, tmp_path, monkeypatch):
        path, _ = sim_config(tmp_path)
        monkeypatch.setenv("FBL_THREADS", "lots")
        assert cli.run(["simulate", "--config", str(path)]) == 2


def test_main_entry_point(tmp_path, monkeypatch):
    monkeypatch.setattr("sys.argv", ["fbl", "fig1", "--out", str(tmp_path / "x.csv")])
    with pytest.raises(SystemExit) as exc:
        cli.main()
    assert exc.value.code == 0
