import csv
import json
import re
import subprocess
import sys

import pytest

import battenv as bv
from battenv import _kernels, bench, cli, specio


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def parity_hash(text):
    return re.search(r"parity hash: (\w+)", text).group(1)


FAST = ["--nbatch", "1,7,64"]


@pytest.mark.slow
def test_parity_default_passes(capsys):
    code, out, _ = run(["parity"], capsys)
    assert code == 0, out
    assert out.count("PASS") == 5 and "FAIL" not in out


@pytest.mark.slow
def test_parity_hash_thread_invariant(capsys):
    _, a, _ = run(["parity", "--nthread", "0"], capsys)
    _, b, _ = run(["parity", "--nthread", "8"], capsys)
    assert parity_hash(a) == parity_hash(b)


def test_corrupted_kernel_fails(capsys, monkeypatch):
    real = _kernels.step_chunk

    def corrupted(M, lo, hi, state, *rest):
        real(M, lo, hi, state, *rest)
        state[lo:hi, 1] += 1e-12

    monkeypatch.setattr(_kernels, "step_chunk", corrupted)
    code, out, _ = run(["parity", "--preset", "pendulum"], capsys)
    assert code != 0
    assert re.search(r"FAIL\s+step vs rollout", out)


def test_gate_runs_before_timing(monkeypatch, capsys):
    real = _kernels.step_chunk
    timed = []

    def corrupted(M, lo, hi, state, *rest):
        real(M, lo, hi, state, *rest)
        state[lo:hi, 0] += 1.0

    monkeypatch.setattr(_kernels, "step_chunk", corrupted)
    monkeypatch.setattr(bench, "time_calls", lambda *a, **k: timed.append(1))
    code, _, err = run(["bench-step", "--preset", "pendulum", "--nbatch", "8", "--nthread", "0"], capsys)
    assert code == 1 and "correctness gate" in err
    assert not timed


@pytest.mark.parametrize("name", list(bench.BENCHMARKS))
def test_bench_commands_write_csv_and_plot(name, tmp_path, capsys):
    out_csv, out_svg = tmp_path / "r.csv", tmp_path / "r.svg"
    argv = [name, "--preset", "pendulum" if name != "bench-hfield" else "terrain-walker",
            "--nbatch", "4,16", "--nthread", "2", "--nstep", "2", "--warmup", "1", "--repeats", "3",
            "--fractions", "0.5,1.0", "--seed", "3", "--csv", str(out_csv), "--plot", str(out_svg)]
    code, out, _ = run(argv, capsys)
    assert code == 0, out
    assert "DoF counts only" in out or "DoF" in out
    with open(out_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == bench.CSV_COLUMNS
    assert {r["seed"] for r in rows} == {"3"}
    assert {int(r["nbatch"]) for r in rows} >= {16}
    assert out_svg.read_text().startswith("<svg")


def test_csv_deterministic_except_timing(tmp_path, capsys):
    cols = [c for c in bench.CSV_COLUMNS if c not in ("median", "q1", "q3")]
    rows = []
    for k in range(2):
        path = tmp_path / f"{k}.csv"
        run(["bench-jacobian", "--preset", "franka9", "--nbatch", "4,8", "--nthread", "1",
             "--warmup", "0", "--repeats", "2", "--csv", str(path)], capsys)
        with open(path) as fh:
            rows.append([[r[c] for c in cols] for r in csv.DictReader(fh)])
    assert rows[0] == rows[1]


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bench-step", "--nbatch", "a,b"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["bench-step", "--preset", "nosuch"])
    assert exc.value.code == 2
    assert run(["bench-step", "--preset", "pendulum", "--repeats", "0"], capsys)[0] == 2
    assert run(["bench-reset", "--preset", "pendulum", "--fractions", "0,1"], capsys)[0] == 2
    assert run(["bench-step", "--model", str(tmp_path / "missing.json")], capsys)[0] == 2
    assert run(["gen-model", "nosuch", "-"], capsys)[0] == 2
    capsys.readouterr()


def test_csv_write_failure(tmp_path, capsys):
    bad = tmp_path / "no" / "such" / "dir.csv"
    code, _, err = run(["bench-forward", "--preset", "pendulum", "--nbatch", "2", "--repeats", "1",
                        "--warmup", "0", "--csv", str(bad)], capsys)
    assert code == 1 and "cannot write" in err


def test_gen_model_go1(tmp_path, capsys):
    path = tmp_path / "go1.json"
    assert run(["gen-model", "go1-18", str(path)], capsys)[0] == 0
    m = bv.build_chain_model(specio.load_spec(path))
    assert m.nq == m.nv == 18 and m.nu == 14


def test_gen_model_pendulum_is_p1(capsys):
    code, out, _ = run(["gen-model", "pendulum", "-"], capsys)
    assert code == 0
    doc = json.loads(out)
    m = bv.build_chain_model(specio.spec_from_dict(doc))
    assert (m.nq, m.nu, m.nsite, m.nsensordata, m.dof_M[0], m.timestep) == (1, 1, 1, 5, 1.0, 0.01)


@pytest.mark.parametrize("name", bv.preset_names())
def test_gen_model_roundtrip(name, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["gen-model", name, str(a)], capsys)[0] == 0
    assert run(["gen-model", str(a), str(b)], capsys)[0] == 0
    assert a.read_text() == b.read_text()


def test_gen_model_write_failure(tmp_path, capsys):
    assert run(["gen-model", "pendulum", str(tmp_path / "x" / "y.json")], capsys)[0] == 1


def test_model_flag(tmp_path, capsys):
    path = tmp_path / "arm.json"
    specio.save_spec(bv.get_preset("franka9"), path)
    code, out, _ = run(["bench-forward", "--model", str(path), "--nbatch", "3", "--repeats", "1", "--warmup", "0"],
                       capsys)
    assert code == 0 and "arm" in out


def test_preset_dof_counts():
    expect = {"franka9": (9, 9), "allegro16": (16, 16), "go1-18": (18, 14), "humanoid56": (56, 52)}
    for name, (nv, nu) in expect.items():
        m = bv.build_chain_model(bv.get_preset(name))
        assert (m.nv, m.nu) == (nv, nu)
    assert bv.build_chain_model(bv.get_preset("chain18")).nv == 18


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "battenv", "gen-model", "pendulum", "-"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and json.loads(res.stdout)["timestep"] == 0.01
