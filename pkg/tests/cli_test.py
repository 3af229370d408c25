import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from src.cli.io import load_graph, read_csv
from src.cli.main import EXIT_IO, EXIT_MATH, EXIT_OK, run
from src.cli.manifest import RunManifest, manifest_path
from src.common.models import ConeSystem, QuantumGraphSpec
from src.graph.tree import expand_truncated_tree
from src.green.engine import wt_recursion


def _write(path, data) -> str:
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def binary_file(tmp_path) -> str:
    return _write(tmp_path / "binary.json", {"regular": {"q": 2}})


@pytest.fixture
def line_file(tmp_path) -> str:
    return _write(tmp_path / "line.json", {"regular": {"q": 1}})


def test_load_graph_shapes(tmp_path, binary_file):
    assert isinstance(load_graph(binary_file), ConeSystem)
    base = _write(tmp_path / "k2.json", {"vertices": [0, 1], "edges": [{"u": 0, "v": 1, "length": 1.0}]})
    assert isinstance(load_graph(base), QuantumGraphSpec)
    with pytest.raises(ValueError):
        load_graph(_write(tmp_path / "odd.json", {"nodes": []}))


def test_spectrum_empty_grid(tmp_path, binary_file):
    out = tmp_path / "s.csv"
    argv = ["spectrum", "--graph", binary_file, "--lmin", "5", "--lmax", "1", "--grid", "10", "--output", str(out)]
    assert run(argv) == EXIT_IO
    assert not out.exists()


def test_spectrum_rejects_failing_cone(tmp_path, capsys):
    graph = _write(
        tmp_path / "bad.json",
        {"matrix": [[1, 1], [0, 2]], "lengths": [1.0, 1.0], "potentials": [{}, {}], "couplings": [0.0, 0.0]},
    )
    argv = ["spectrum", "--graph", graph, "--lmin", "1", "--lmax", "2", "--grid", "3", "--output", str(tmp_path / "s.csv")]
    assert run(argv) == EXIT_MATH
    assert "witness" in capsys.readouterr().out


def test_green_writes_csv_and_manifest(tmp_path, binary_file):
    out = tmp_path / "g.csv"
    argv = ["green", "--graph", binary_file, "--z", "3+0.5i", "--depth", "3", "--output", str(out), "--workers", "1"]
    assert run(argv) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 16
    assert rows[0]["node"] == "-1"
    manifest = RunManifest.load(manifest_path(out))
    assert manifest.argv()[0] == "green"
    assert "--depth" in manifest.argv()
    assert str(out) in manifest.output_digests
    assert "workers" not in manifest.flags


def test_verify_line(tmp_path, line_file):
    out = tmp_path / "v.csv"
    argv = ["verify", "--graph", line_file, "--z", "2+1i", "--depth", "4", "--output", str(out)]
    assert run(argv) == EXIT_OK
    assert all(row["passed"] == "True" for row in read_csv(out))
    assert run(argv + ["--corrupt-zeta"]) == EXIT_MATH


def test_verify_replay(tmp_path):
    state = wt_recursion(expand_truncated_tree(ConeSystem.regular(2), 3), 3 + 0.5j)
    replay = tmp_path / "state.json"
    replay.write_text(state.to_json())
    assert run(["verify", "--replay", str(replay), "--output", str(tmp_path / "v.csv")]) == EXIT_OK


def test_perturb_is_reproducible(tmp_path, binary_file):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        argv = [
            "perturb", "--graph", binary_file, "--lam", "5", "--eps", "0", "--samples", "8",
            "--depth", "4", "--boot", "50", "--workers", "1", "--output", str(out),
        ]
        assert run(argv) == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    row = read_csv(tmp_path / "a.csv")[0]
    assert float(row["estimate"]) == 0.0
    assert RunManifest.load(manifest_path(tmp_path / "a.csv")).seed == 0


def test_perturb_guard(tmp_path, binary_file):
    argv = [
        "perturb", "--graph", binary_file, "--lam", "10", "--eps", "0.1", "--samples", "4",
        "--depth", "3", "--workers", "1", "--output", str(tmp_path / "p.csv"),
    ]
    assert run(argv) == EXIT_MATH


def test_oracle_star(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert run(["oracle", "--star", "--lengths", "1", "1", "1", "--output", str(out)]) == EXIT_OK
    assert float(read_csv(out)[0]["e0"]) == pytest.approx(np.pi**2 / 4, rel=1e-10)
    assert "E0" in capsys.readouterr().out


def test_missing_graph_file(tmp_path):
    argv = ["green", "--graph", str(tmp_path / "missing.json"), "--z", "1+1i", "--output", str(tmp_path / "g.csv")]
    assert run(argv) == EXIT_IO


def test_usage_error_exits_with_io_code():
    with pytest.raises(SystemExit) as exc:
        run(["green"])
    assert exc.value.code == EXIT_IO


def test_perturb_eps_sweep_is_monotone(tmp_path, binary_file):
    out = tmp_path / "sweep.csv"
    argv = [
        "perturb", "--graph", binary_file, "--lam", "5", "--eta", "0.05", "--eps", "0.08", "0", "0.02",
        "--samples", "20", "--depth", "5", "--boot", "50", "--workers", "1", "--output", str(out),
    ]
    assert run(argv) == EXIT_OK
    rows = read_csv(out)
    assert [float(r["eps"]) for r in rows] == [0.0, 0.02, 0.08]
    assert all(r["monotone"] == "True" for r in rows)
    estimates = [float(r["estimate"]) for r in rows]
    assert estimates[0] < 1e-8
    assert estimates[0] < estimates[1] < estimates[2]


def test_cli_owns_the_log_format():
    code = "import logging, src.cli.main; print(logging.getLogger().handlers[0].formatter._fmt)"
    result = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        cwd=Path(__file__).resolve().parents[1],
        check=True,
    )
    assert result.stdout.strip() == "[qtree] %(message)s"
