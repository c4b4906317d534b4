import json
import os
import subprocess
import sys

import pytest

from uqp import bench, cli, isa, qir
from uqp.circuits import ghz
from uqp.lowering import emission_cost

from test_isa import GOLDEN


@pytest.fixture
def bell_bin(tmp_path, bell_path):
    out = tmp_path / "bell.uqpb"
    assert cli.main(["compile", str(bell_path), "-o", str(out), "--shots", "10000"]) == 0
    return out


def test_compile_and_disasm(bell_bin, capsys):
    capsys.readouterr()
    assert cli.main(["disasm", str(bell_bin)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 12
    for line, (bits, note) in zip(lines, GOLDEN):
        assert line.startswith(bits) and line.endswith(note)


def test_disasm_of_reassembled_is_identical(bell_bin, tmp_path, capsys):
    _, program = isa.disassemble(bell_bin.read_bytes())
    again = tmp_path / "again.uqpb"
    again.write_bytes(isa.assemble(program))
    capsys.readouterr()
    cli.main(["disasm", str(bell_bin)])
    first = capsys.readouterr().out
    cli.main(["disasm", str(again)])
    assert capsys.readouterr().out == first


def test_run_bell(bell_bin, capsys):
    capsys.readouterr()
    assert cli.main(["run", str(bell_bin), "--seed", "42"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report["histogram"]) == {"00", "11"}
    assert all(abs(v - 5000) <= 150 for v in report["histogram"].values())


def test_run_csv_to_file(bell_bin, tmp_path):
    out, trace = tmp_path / "h.csv", tmp_path / "t.csv"
    assert cli.main(["run", str(bell_bin), "--shots", "20", "--format", "csv", "-o", str(out),
                     "--trace", str(trace)]) == 0
    assert out.read_text().startswith("bitstring,count\n")
    assert len(trace.read_text().splitlines()) == 5


def test_run_neutral_atom(tmp_path, bell_path, capsys):
    out = tmp_path / "na.uqpb"
    assert cli.main(["compile", str(bell_path), "-o", str(out), "--target", "na", "--shots", "5"]) == 0
    capsys.readouterr()
    assert cli.main(["run", str(out), "--seed", "1"]) == 0
    log = json.loads(capsys.readouterr().out)["atom_prep_log"]
    assert log["plan_size"] == len(log["awg_records"])
    assert log["defect_free"]


def test_malformed_input_reports_line(tmp_path, bell_text, capsys):
    bad = tmp_path / "bad.ll"
    bad.write_text(bell_text.replace("%Qubit* null)\n  call void @__quantum__qis__cnot",
                                     "%Qubit* nul)\n  call void @__quantum__qis__cnot"))
    assert cli.main(["compile", str(bad), "-o", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert f"{bad}:10:" in err and "QirSyntaxError" in err


def test_too_many_qubits(tmp_path, capsys):
    src = tmp_path / "big.ll"
    src.write_text(qir.format_qir(ghz(101)))
    assert cli.main(["compile", str(src), "-o", str(tmp_path / "big.uqpb")]) == 1
    assert "QubitCountExceeded" in capsys.readouterr().err


def test_corrupted_and_truncated(bell_bin, tmp_path, capsys):
    data = bell_bin.read_bytes()
    bad = tmp_path / "bad.uqpb"
    bad.write_bytes(b"JUNK" + data[4:])
    assert cli.main(["run", str(bad)]) == 1
    assert "BadMagic" in capsys.readouterr().err
    bad.write_bytes(data[:30])
    assert cli.main(["disasm", str(bad)]) == 1
    assert "TruncatedProgram" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert cli.main(["disasm", str(tmp_path / "nope")]) == 1


def test_usage_error_is_exit_1():
    with pytest.raises(SystemExit) as info:
        cli.main(["compile"])
    assert info.value.code == 1


def test_internal_error_is_exit_2(monkeypatch, bell_bin):
    def boom(*a, **k):
        raise RuntimeError("invariant broken")
    monkeypatch.setattr(cli.isa, "disassemble", boom)
    assert cli.main(["disasm", str(bell_bin)]) == 2


def test_bench_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["bench", "--family", "ghz", "--qubits", "5..100", "--step", "5",
                     "--reps", "2", "--csv", str(out)]) == 0
    rows = bench.read_csv(out)
    assert len(rows) == 20
    assert [r.num_qubits for r in rows] == list(range(5, 101, 5))
    assert all(r.word_count == emission_cost(ghz(r.num_qubits)) for r in rows)
    assert all(r.compile_time > 0 and r.peak_bytes > 0 for r in rows)
    assert not out.read_text().count("noisy")


def test_bench_single_rep_flagged(tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["bench", "--qubits", "2..4", "--step", "1", "--reps", "1", "--csv", str(out)]) == 0
    head = out.read_text().splitlines()
    assert head[1].startswith("# noisy")
    assert len(bench.read_csv(out)) == 3


@pytest.mark.parametrize("rng", ["5..101", "1..10", "10..5", "abc"])
def test_bench_bad_range(tmp_path, rng):
    assert cli.main(["bench", "--qubits", rng, "--csv", str(tmp_path / "x.csv")]) == 1


def test_bench_parallel_same_structure(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["bench", "--family", "qftlike", "--qubits", "2..8", "--step", "3", "--reps", "3", "--csv", str(a)])
    cli.main(["bench", "--family", "qftlike", "--qubits", "2..8", "--step", "3", "--reps", "3", "--csv", str(b),
              "--parallel"])
    ra, rb = bench.read_csv(a), bench.read_csv(b)
    assert [(r.num_qubits, r.gate_count, r.word_count) for r in ra] == \
           [(r.num_qubits, r.gate_count, r.word_count) for r in rb]


def test_console_entry_point(bell_path, tmp_path):
    out = tmp_path / "b.uqpb"
    proc = subprocess.run([sys.executable, "-m", "uqp", "compile", str(bell_path), "-o", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "12 words" in proc.stdout


def test_loglog_slope():
    xs = [1, 2, 4, 8, 16]
    assert bench.loglog_slope(xs, [3 * x ** 1.5 for x in xs]) == pytest.approx(1.5)


def test_replay_benchmark_script(tmp_path):
    from uqp import replay
    if replay.compiled_replay_shots is None or os.environ.get("UQP_PURE_PYTHON") == "1":
        pytest.skip("compiled kernel not in use")
    script = __import__("pathlib").Path(__file__).parents[1] / "benchmarks" / "bench_replay.py"
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, str(script), "--shots", "20", "--repeat", "1", "--csv", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("case,ops,shots,python_s,compiled_s,speedup")
