import json
import math
import subprocess
import sys

import numpy as np
import pytest

from rlocal.analysis import PermutationPrior, error_lower_bound, hamming_distortion, relative_error
from rlocal.cli import main
from rlocal.core import BlockPermutation
from rlocal.io import read_permutation_csv, read_table, write_matrix_csv, write_permutation_csv, write_pgm
from rlocal.pam import run_pam
from rlocal.synth import GenSpec, gen_instance
from rlocal.udgp import build_Bu, udgp_partition


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "rlocal" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rlocal.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "unscramble" in proc.stdout


def test_solve_identity_toy(tmp_path):
    rng = np.random.default_rng(0)
    B = rng.standard_normal((8, 2))
    write_matrix_csv(tmp_path / "B.csv", B)
    write_matrix_csv(tmp_path / "Y.csv", B @ [[1.0], [2.0]])
    rc = main(["solve", "--B", str(tmp_path / "B.csv"), "--Y", str(tmp_path / "Y.csv"),
               "--partition", "r=1", "--out", str(tmp_path / "o")])
    assert rc == 0
    assert read_permutation_csv(tmp_path / "o" / "P_hat.csv").is_identity()
    report = read_table(tmp_path / "o" / "solve_report.csv")[0]
    assert report["iterations"] == "1" and report["stop_reason"] == "tolerance"


def test_solve_udgp_files(tmp_path):
    write_matrix_csv(tmp_path / "B.csv", build_Bu(4))
    write_matrix_csv(tmp_path / "Y.csv", [3, 9, 7, 6, 2, 4])
    cfg = write_config(tmp_path / "solve.json", {"B": "B.csv", "Y": "Y.csv", "partition": "3,2,1"})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    from rlocal.io import read_matrix_csv

    np.testing.assert_allclose(read_matrix_csv(tmp_path / "o" / "X_hat.csv")[:, 0], [9, 7, 3], atol=1e-8)
    P = read_permutation_csv(tmp_path / "o" / "P_hat.csv", udgp_partition(4))
    assert P == BlockPermutation(udgp_partition(4), ((1, 2, 0), (1, 0), (0,)))


def test_solve_then_score(tmp_path):
    inst = gen_instance(GenSpec(n=60, d=4, m=3, r=12, snr=50.0, seed=3))
    write_matrix_csv(tmp_path / "B.csv", inst.B)
    write_matrix_csv(tmp_path / "Y.csv", inst.Y)
    write_matrix_csv(tmp_path / "X_star.csv", inst.truth.Xstar)
    write_permutation_csv(tmp_path / "P_star.csv", inst.truth.Pstar)
    assert main(["solve", "--B", str(tmp_path / "B.csv"), "--Y", str(tmp_path / "Y.csv"),
                 "--partition", "r=12", "--out", str(tmp_path)]) == 0
    assert main(["score", "--P-hat", str(tmp_path / "P_hat.csv"), "--P-star", str(tmp_path / "P_star.csv"),
                 "--X-hat", str(tmp_path / "X_hat.csv"), "--X-star", str(tmp_path / "X_star.csv"),
                 "--out", str(tmp_path)]) == 0
    row = read_table(tmp_path / "score.csv")[0]
    res = run_pam(inst)
    assert int(row["d_H"]) == hamming_distortion(res.P_hat, inst.truth.Pstar)
    assert float(row["relative_error"]) == relative_error(res.X_hat, inst.truth.Xstar)


def test_bench_outputs(tmp_path):
    cfg = write_config(tmp_path / "b.json", {"grid": {"n": [40], "d": [3], "m": [2], "r": [4, 8], "snr": ["inf", 100]}})
    assert main(["bench", "--config", cfg, "--trials", "3", "--seed", "5", "--out", str(tmp_path / "o")]) == 0
    rows = read_table(tmp_path / "o" / "bench.csv")
    assert len(rows) == 12 and all(r["status"] == "ok" for r in rows)
    assert {r["snr"] for r in rows} == {"inf", "100"}
    summary = read_table(tmp_path / "o" / "bench_summary.csv")
    assert len(summary) == 8 and {s["count"] for s in summary} == {"3"}
    assert len(read_table(tmp_path / "o" / "bench_timings.csv")) == 12
    header = (tmp_path / "o" / "bench.csv").read_text().splitlines()[:2]
    echoed = json.loads(header[1].removeprefix("# config: "))
    assert echoed["seed"] == 5 and echoed["trials"] == 3 and "out" not in echoed


def test_udgp_outputs(tmp_path):
    assert main(["udgp", "--d", "8", "--trials", "2", "--set", "variances=[5]", "--set", "sigma2=[0,0.1]",
                 "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "udgp.csv")
    assert len(rows) == 4
    assert [float(s["sigma2"]) for s in read_table(tmp_path / "udgp_summary.csv")] == [0.0, 0.1]


def test_bound_outputs(tmp_path):
    cfg = {"n": 1000, "m": 1, "snr": [1, 100], "priors": [{"model": "r_local", "r": 100}, {"model": "k_sparse", "k": 500}]}
    assert main(["bound", "--config", write_config(tmp_path / "c.json", cfg), "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "bound.csv")
    assert len(rows) == 4
    expected = error_lower_bound(1000, 1, 100.0, PermutationPrior("r_local", 1000, r=100))
    assert float(rows[1]["lower_bound"]) == expected


def test_unscramble_csv_identity(tmp_path):
    rng = np.random.default_rng(0)
    basis = rng.random((3, 16))
    train = tmp_path / "train"
    train.mkdir()
    for i in range(6):
        write_matrix_csv(train / f"{i:02d}.csv", (rng.random(3) @ basis).reshape(4, 4) / 3)
    write_matrix_csv(tmp_path / "t.csv", (rng.random(3) @ basis).reshape(4, 4) / 3)
    rc = main(["unscramble", "--train-dir", str(train), "--target", str(tmp_path / "t.csv"),
               "--partition", "r=1", "--d", "3", "--out", str(tmp_path / "o")])
    assert rc == 0
    row = read_table(tmp_path / "o" / "unscramble.csv")[0]
    assert math.isinf(float(row["psnr_db"])) and row["d_H"] == "0"


def test_unscramble_pgm(tmp_path):
    rng = np.random.default_rng(1)
    train = tmp_path / "train"
    train.mkdir()
    for i in range(4):
        write_pgm(train / f"{i}.pgm", rng.random((4, 4)))
    write_pgm(tmp_path / "t.pgm", rng.random((4, 4)))
    assert main(["unscramble", "--train-dir", str(train), "--target", str(tmp_path / "t.pgm"),
                 "--partition", "r=4", "--d", "2", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "reconstructed.pgm").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["bench", "--set", "grid={\"n\":[10],\"d\":[2],\"m\":[1],\"r\":[3],\"snr\":[1]}"],
        ["bench"],
        ["bound", "--set", "n=10", "--set", "m=1", "--set", "snr=[1]", "--set", "priors=[{\"model\":\"r_local\",\"r\":3}]"],
        ["udgp", "--d", "5", "--set", "pam.epsilon=2"],
        ["udgp", "--d", "5", "--set", "bogus=1"],
        ["solve", "--B", "missing.csv", "--Y", "missing.csv", "--partition", "r=1"],
    ],
    ids=["r-not-dividing", "missing-grid", "bad-prior", "bad-pam", "unknown-key", "missing-file"],
)
def test_config_errors(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_config_file_errors(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["bound", "--config", str(tmp_path / "bad.json")]) == 2
    (tmp_path / "wrong.json").write_text(json.dumps({"command": "udgp", "d": 5}))
    assert main(["bound", "--config", str(tmp_path / "wrong.json")]) == 2


def test_data_errors(tmp_path):
    write_matrix_csv(tmp_path / "B.csv", np.ones((4, 2)))
    write_matrix_csv(tmp_path / "Y.csv", np.ones((5, 1)))
    (tmp_path / "ragged.csv").write_text("1,2\n3\n")
    base = ["solve", "--B", str(tmp_path / "B.csv"), "--partition", "r=1", "--out", str(tmp_path)]
    assert main(base + ["--Y", str(tmp_path / "Y.csv")]) == 3
    assert main(base[:2] + [str(tmp_path / "ragged.csv")] + base[3:] + ["--Y", str(tmp_path / "Y.csv")]) == 3


def test_solver_abort(tmp_path):
    write_matrix_csv(tmp_path / "B.csv", np.ones((4, 1)))
    write_matrix_csv(tmp_path / "Y.csv", np.full((4, 1), 1e300))
    assert main(["solve", "--B", str(tmp_path / "B.csv"), "--Y", str(tmp_path / "Y.csv"),
                 "--partition", "r=2", "--out", str(tmp_path)]) == 4


def test_reruns_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "b.json", {"grid": {"n": [40], "d": [3], "m": [2], "r": [8], "snr": [20]}, "trials": 3})
    assert main(["bench", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["bench", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    for name in ("bench.csv", "bench_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(["bench", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a" / "bench.csv").read_bytes() != (tmp_path / "c" / "bench.csv").read_bytes()
