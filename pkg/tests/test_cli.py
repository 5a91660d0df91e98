import csv
import subprocess
import sys

import numpy as np
import pytest

from netmis.cli import main
from netmis.graph import gen_preferential_attachment
from netmis.sim import synthetic_crt


def write_unit_csv(path, name, values):
    with open(path, "w") as fh:
        fh.write(f"unit,{name}\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{v}\n")
    return str(path)


def write_edges(path, net):
    with open(path, "w") as fh:
        for i, j in net.edges().tolist():
            fh.write(f"{i} {j}\n")
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def pa_files(tmp_path):
    a = gen_preferential_attachment(80, 3)
    rng = np.random.default_rng(0)
    z = rng.integers(0, 2, 80)
    y = rng.normal(size=80) + z
    return {
        "net": write_edges(tmp_path / "a.txt", a),
        "net2": write_edges(tmp_path / "b.txt", gen_preferential_attachment(80, 4)),
        "nu": write_unit_csv(tmp_path / "nu.csv", "nu", rng.random(80) * 0.5),
        "z": write_unit_csv(tmp_path / "z.csv", "z", z),
        "y": write_unit_csv(tmp_path / "y.csv", "y", y.tolist()),
        "dir": tmp_path,
    }


@pytest.fixture
def crt_files(tmp_path):
    t = synthetic_crt(schools=2, classes=4, students=6, contamination=0.0, seed=1)
    with open(tmp_path / "clusters.txt", "w") as fh:
        for i, c in enumerate(t.classes):
            fh.write(f"{i} {c}\n")
    return {
        "net": write_edges(tmp_path / "crt.txt", t.a_sp),
        "clusters": str(tmp_path / "clusters.txt"),
        "blocks": write_unit_csv(tmp_path / "school.csv", "school", t.school),
        "z": write_unit_csv(tmp_path / "z.csv", "z", t.data.z),
        "y": write_unit_csv(tmp_path / "y.csv", "y", t.data.y.tolist()),
        "dir": tmp_path,
    }


def test_probs_output_and_thread_determinism(pa_files):
    d = pa_files["dir"]
    base = ["probs", "--network", pa_files["net"], "--thresholds", pa_files["nu"], "--R", "700", "--seed", "3"]
    assert main(base + ["--out", str(d / "p1.csv"), "--threads", "1"]) == 0
    assert main(base + ["--out", str(d / "p4.csv"), "--threads", "4"]) == 0
    b1, b4 = (d / "p1.csv").read_bytes(), (d / "p4.csv").read_bytes()
    assert b1 == b4
    assert b"\r" not in b1
    rows = read_rows(d / "p1.csv")
    assert len(rows) == 80 * 4 and list(rows[0]) == ["unit", "level", "p", "count"]
    for r in rows:
        assert float(r["p"]) == (int(r["count"]) + 1) / 701


def test_estimate_single_and_collection(pa_files):
    d = pa_files["dir"]
    out = d / "est.csv"
    rc = main(["estimate", "--network", pa_files["net"], "--network", pa_files["net2"],
               "--outcomes", pa_files["y"], "--assignment", pa_files["z"], "--R", "500",
               "--contrast", "c11:c00", "--out", str(out)])
    assert rc == 0
    rows = read_rows(out)
    assert {r["networks"] for r in rows} == {"0", "1", "0+1"}
    assert {r["estimator"] for r in rows} == {"HT", "Hajek"}
    for r in rows:
        assert r["level_a"] == "c11" and r["level_b"] == "c00"
    nmr = [int(r["n_effective"]) for r in rows if r["networks"] == "0+1"]
    single = [int(r["n_effective"]) for r in rows if r["networks"] == "0"]
    assert nmr[0] <= single[0]


def test_pba_point_mass_matches_baseline(crt_files):
    d = crt_files["dir"]
    rc = main(["pba", "--network", crt_files["net"], "--clusters", crt_files["clusters"],
               "--design", "cluster:4", "--outcomes", crt_files["y"], "--assignment", crt_files["z"],
               "--kernel", "contamination", "--blocks", crt_files["blocks"], "--theta", "theta0=point_mass:0",
               "--contrast", "c11:c00", "--iters", "5", "--R", "200",
               "--out", str(d / "pba.csv"), "--summary-out", str(d / "summary.csv")])
    assert rc == 0
    summary = {r["row"]: r for r in read_rows(d / "summary.csv")}
    assert summary["systematic"]["mean"] == summary["baseline"]["mean"]
    assert len(read_rows(d / "pba.csv")) == 5


def test_pba_thread_determinism(crt_files):
    d = crt_files["dir"]
    base = ["pba", "--network", crt_files["net"], "--clusters", crt_files["clusters"],
            "--design", "cluster:4", "--outcomes", crt_files["y"], "--assignment", crt_files["z"],
            "--kernel", "contamination", "--blocks", crt_files["blocks"], "--theta", "theta0=uniform:0,0.05",
            "--iters", "8", "--R", "150", "--random-error", "--seed", "9"]
    assert main(base + ["--out", str(d / "t1.csv"), "--threads", "1"]) == 0
    assert main(base + ["--out", str(d / "t3.csv"), "--threads", "3"]) == 0
    assert (d / "t1.csv").read_bytes() == (d / "t3.csv").read_bytes()


def test_unknown_kernel_is_usage_error(pa_files, capsys):
    with pytest.raises(SystemExit) as info:
        main(["pba", "--network", pa_files["net"], "--outcomes", pa_files["y"],
              "--assignment", pa_files["z"], "--kernel", "rewire", "--out", str(pa_files["dir"] / "x.csv")])
    assert info.value.code == 2
    err = capsys.readouterr().err
    assert "edge_flip" in err and "censor_fill" in err and "contamination" in err
    assert not (pa_files["dir"] / "x.csv").exists()


def test_bad_edge_list_leaves_no_output(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 x\n")
    out = tmp_path / "p.csv"
    assert main(["probs", "--network", str(bad), "--n", "3", "--R", "10", "--out", str(out)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert not out.exists()
    assert list(tmp_path.glob(".netmis-*")) == []


def test_config_file_and_flag_override(tmp_path, pa_files):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(f"network: {pa_files['net']}\nR: 50\nseed: 1\ndesign: {{kind: bernoulli, p: 0.3}}\n")
    assert main(["probs", "--config", str(cfg), "--out", str(tmp_path / "a.csv")]) == 0
    assert main(["probs", "--config", str(cfg), "--R", "60", "--out", str(tmp_path / "b.csv")]) == 0
    a, b = read_rows(tmp_path / "a.csv"), read_rows(tmp_path / "b.csv")
    assert float(a[0]["p"]) * 51 == int(a[0]["count"]) + 1
    assert float(b[0]["p"]) * 61 == pytest.approx(int(b[0]["count"]) + 1)


def test_simulate_default_grid_rows(tmp_path):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--scenario", "misreport", "--reps", "5", "--n", "120", "--R", "100",
               "--estimator", "HT", "--out", str(out)])
    assert rc == 0
    rows = read_rows(out)
    assert [r["point"] for r in rows] == [str(round(0.025 * i, 3)) for i in range(11)]


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "netmis.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("probs", "estimate", "pba", "simulate"):
        assert cmd in r.stdout
