import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from kdblockade import __version__
from kdblockade.cli import main
from kdblockade.config import load_config
from kdblockade.dynamics import pi_pulse_coupling

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
NODE = 2 * math.sqrt(2) - 2


def write_config(path, doc):
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return str(path)


def golden(name, **changes):
    doc = yaml.safe_load((CONFIGS / name).read_text())
    for block, values in changes.items():
        if isinstance(values, dict):
            doc.setdefault(block, {}).update(values)
        else:
            doc[block] = values
    return doc


def read_rows(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


class TestBlockade:
    def test_two_level(self, capsys):
        assert main(["blockade", "--n", "2", "--nm", "2"]) == 0
        out = capsys.readouterr().out
        assert "0.828427" in out and "2.898979" in out

    def test_twelve(self, capsys):
        assert main(["blockade", "--n", "12", "--nm", "2"]) == 0
        roots = [float(tok) for tok in capsys.readouterr().out.split() if tok.lstrip("-").replace(".", "").isdigit()]
        assert any(abs(r + 0.60) <= 0.01 for r in roots)

    def test_no_roots(self, capsys):
        assert main(["blockade", "--n", "0", "--nm", "2"]) == 2
        assert "error" in capsys.readouterr().err

    def test_map(self, tmp_path):
        path = tmp_path / "map.csv"
        assert main(["blockade", "--n", "2", "--map", str(path), "--samples", "41"]) == 0
        assert len(path.read_text().splitlines()) == 2 + 41

    def test_bad_argument(self):
        assert main(["blockade", "--n", "two"]) == 2


class TestSimulate:
    def test_inversion(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "simulate", str(CONFIGS / "inversion.yaml")]) == 0
        summary = json.loads((tmp_path / "inversion_summary.json").read_text())
        p = summary["final_populations"]
        assert p[2] > 0.98 and p[4] < 0.002
        assert summary["max_norm_drift"] < 1e-6
        state = json.loads((tmp_path / "inversion_final_state.json").read_text())
        amps = np.asarray(state["amplitudes"])
        assert amps.shape == (8, 2)
        rows = read_rows(tmp_path / "inversion_trajectory.csv")
        assert list(rows[0])[:2] == ["t", "P_0"] and float(rows[-1]["P_2"]) == pytest.approx(p[2])

    def test_zero_coupling_identity(self, tmp_path):
        cfg = write_config(tmp_path / "zero.yaml", golden("inversion.yaml", drive={"coupling": 0.0}))
        assert main(["--output-dir", str(tmp_path), "simulate", cfg]) == 0
        summary = json.loads((tmp_path / "inversion_summary.json").read_text())
        assert summary["final_populations"][0] == 1.0
        assert summary["max_norm_drift"] == 0.0

    def test_bell(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "simulate", str(CONFIGS / "bell2d.yaml")]) == 0
        summary = json.loads((tmp_path / "bell2d_summary.json").read_text())
        assert summary["bell_fidelity"] > 0.95 and summary["P_2_2"] < 1e-3
        header = (tmp_path / "bell2d_trajectory.csv").read_text().splitlines()[1]
        assert header.startswith("t,P_0_0,P_0_1")

    def test_truncation_exit(self, tmp_path):
        doc = golden("inversion.yaml", drive={"blockade": None, "delta_p": 0.0, "coupling": 0.5}, simulation={"truncation": 6})
        del doc["drive"]["blockade"]
        assert main(["--output-dir", str(tmp_path), "simulate", write_config(tmp_path / "c.yaml", doc)]) == 4

    def test_integration_exit(self, tmp_path, capsys):
        doc = golden("inversion.yaml", drive={"tau_KD": 4.0}, simulation={"dt_min": 0.5, "rtol": 1e-14, "atol": 1e-16})
        assert main(["--output-dir", str(tmp_path), "simulate", write_config(tmp_path / "c.yaml", doc)]) == 3
        assert "step" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        doc = golden("inversion.yaml", drive={"lambda": 0.1})
        assert main(["--output-dir", str(tmp_path), "simulate", write_config(tmp_path / "c.yaml", doc)]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["simulate", str(tmp_path / "nope.yaml")]) == 2

    def test_byte_identical(self, tmp_path):
        cfg = str(CONFIGS / "return.yaml")
        for sub in ("a", "b"):
            assert main(["--threads", "1", "--output-dir", str(tmp_path / sub), "simulate", cfg]) == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_provenance_headers(self, tmp_path):
        cfg = CONFIGS / "inversion.yaml"
        _, digest = load_config(cfg)
        assert main(["--output-dir", str(tmp_path), "simulate", str(cfg)]) == 0
        first = (tmp_path / "inversion_trajectory.csv").read_text().splitlines()[0]
        assert digest in first and __version__ in first
        summary = json.loads((tmp_path / "inversion_summary.json").read_text())
        assert digest in summary["provenance"]
        state = json.loads((tmp_path / "inversion_final_state.json").read_text())
        assert state["config_sha256"] == digest and __version__ in state["tool"]


def state_file(path, amplitudes, time=0.0):
    c = np.asarray(amplitudes, dtype=complex)
    doc = {"dimension": 1, "time": time, "config_sha256": "test", "amplitudes": np.stack([c.real, c.imag], -1).tolist()}
    path.write_text(json.dumps(doc))
    return str(path)


class TestWigner:
    def test_ground_state(self, tmp_path, capsys):
        path = state_file(tmp_path / "g_final_state.json", [1, 0, 0, 0])
        assert main(["--output-dir", str(tmp_path), "wigner", path]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["W_origin"] == pytest.approx(1 / math.pi, abs=1e-4)
        assert report["position_marginal_total"] == pytest.approx(1.0, abs=1e-4)
        assert report["momentum_marginal_total"] == pytest.approx(1.0, abs=1e-4)
        rows = read_rows(tmp_path / "g_marginal_x.csv")
        diff = max(abs(float(r["position_density"]) - float(r["abs_psi_sq"])) for r in rows)
        assert diff < 1e-6
        assert (tmp_path / "g_wigner.csv").exists() and (tmp_path / "g_marginal_p.csv").exists()

    def test_binary(self, tmp_path):
        path = state_file(tmp_path / "g_final_state.json", [0, 1])
        assert main(["--output-dir", str(tmp_path), "wigner", path, "--format", "binary", "--spacing", "0.25"]) == 0
        assert (tmp_path / "g_wigner.bin").read_bytes()[:4] == b"KDWG"

    def test_cat(self, tmp_path, capsys, two_cat):
        _, _, traj = two_cat
        final = traj.final
        path = state_file(tmp_path / "cat_final_state.json", final.amplitudes, final.time)
        assert main(["--output-dir", str(tmp_path), "wigner", path, "--time", str(final.time + 0.375), "--spacing", "0.125"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["W_min"] < 0
        assert report["integral"] == pytest.approx(1.0, abs=1e-4)

    def test_cap(self, tmp_path):
        c = np.zeros(402)
        c[401] = 1.0
        assert main(["--output-dir", str(tmp_path), "wigner", state_file(tmp_path / "big.json", c)]) == 5

    def test_missing_state(self, tmp_path):
        assert main(["wigner", str(tmp_path / "none.json")]) == 2


class TestDesign:
    def test_electron(self, tmp_path, capsys):
        assert main(["--output-dir", str(tmp_path), "design", str(CONFIGS / "design_electron.yaml")]) == 0
        report = json.loads((tmp_path / "design_electron_design.json").read_text())
        assert report["scales"]["Omega_0"] == pytest.approx(3.22e12, rel=0.02)
        assert report["scales"]["lambda_KD"] == pytest.approx(533e-9, rel=0.01)
        assert len(report["timescales"]["links"]) == 4
        assert "ratio" in capsys.readouterr().out

    def test_tppf84(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "design", str(CONFIGS / "design_TPPF84.yaml")]) == 0
        report = json.loads((tmp_path / "design_TPPF84_design.json").read_text())
        assert report["scales"]["lambda_KD"] == pytest.approx(6819e-9, rel=0.01)

    def test_missing_polarizability(self, tmp_path):
        doc = {
            "mode": "physical",
            "particle": {"kind": "polarizable", "mass": 1e-22},
            "trap": {"lambda_TL": 5e-6, "I_S": 1e6, "W_y_TL": 2e-5, "W_z_TL": 9e-3, "tau_TL": 0.0, "v_z": 0.02},
            "kd": {"I_KD": 2e3, "tau_KD": 0.1, "W_y_KD": 1e-4, "W_z_KD": 8e-3, "N_m": 2, "delta_p": -1.93},
        }
        assert main(["--output-dir", str(tmp_path), "design", write_config(tmp_path / "d.yaml", doc)]) == 2

    def test_needs_physical(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "design", str(CONFIGS / "inversion.yaml")]) == 2


class TestSweep:
    def test_rabi_peak(self, tmp_path):
        assert main(["--threads", "2", "--output-dir", str(tmp_path), "sweep", str(CONFIGS / "sweep_rabi.yaml")]) == 0
        rows = read_rows(tmp_path / "rabi_sweep_lambda_peak.csv")
        assert [r["status"] for r in rows] == ["ok"] * 21
        lam = np.array([float(r["lambda_peak"]) for r in rows])
        assert np.all(np.diff(lam) > 0)
        p2 = np.array([float(r["P_2"]) for r in rows])
        target = pi_pulse_coupling(0, 2, (2 + NODE) / 2, 40.0)
        assert abs(lam[np.argmax(p2)] - target) <= 0.02 * target

    def test_node_dip(self, tmp_path):
        doc = golden("sweep_rabi.yaml", sweep={"parameter": "delta_p", "start": NODE - 0.05, "stop": NODE + 0.05, "samples": 11})
        doc["drive"] = {"N_m": 2, "delta_p": NODE, "coupling": "pi-pulse", "tau_KD": 40}
        # off the node |4> and |6> fill up, so leave room above them
        doc["simulation"]["truncation"] = 20
        assert main(["--output-dir", str(tmp_path), "sweep", write_config(tmp_path / "s.yaml", doc)]) == 0
        rows = read_rows(tmp_path / "rabi_sweep_delta_p.csv")
        p4 = np.array([float(r["P_4"]) for r in rows])
        assert [r["status"] for r in rows] == ["ok"] * 11
        assert int(np.argmin(p4)) == 5
        assert min(p4[0], p4[-1]) > 1e3 * p4[5]

    def test_empty_range(self, tmp_path):
        cfg = str(CONFIGS / "sweep_rabi.yaml")
        assert main(["--output-dir", str(tmp_path), "sweep", cfg, "--param", "tau_KD", "--start", "40", "--stop", "50", "--samples", "0"]) == 2

    def test_rows_deterministic(self, tmp_path):
        cfg = str(CONFIGS / "sweep_rabi.yaml")
        args = ["--param", "lambda_peak", "--start", "0.015", "--stop", "0.02", "--samples", "4"]
        assert main(["--threads", "1", "--output-dir", str(tmp_path / "a"), "sweep", cfg, *args]) == 0
        assert main(["--threads", "3", "--output-dir", str(tmp_path / "b"), "sweep", cfg, *args]) == 0
        name = "rabi_sweep_lambda_peak.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
