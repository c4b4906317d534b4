import json
import math

import numpy as np
import pytest

from uqp import isa, qcp, replay
from uqp.circuits import ghz, linear_entangler, qft_like
from uqp.isa import BinaryProgram, MemLoad, QuantumOp, Target
from uqp.lowering import JobOptions, lower
from uqp.qir import Gate1Q, Measure, QuantumKernel

from oracles import kernel_distribution


def compiled(kernel, target=Target.SUPERCONDUCTING, shots=1000) -> BinaryProgram:
    program, _ = lower(kernel, JobOptions(target, shots))
    return isa.load_image(isa.assemble(program))


def chi_square_ok(hist, dist, shots, crit):
    # every observed outcome must be possible, then Pearson's statistic against the oracle
    assert set(hist) <= {k for k, p in dist.items() if p > 1e-12}
    stat = sum((hist.get(k, 0) - shots * p) ** 2 / (shots * p) for k, p in dist.items() if p > 1e-12)
    return stat < crit


def test_bell_statistics(bell_kernel):
    report = qcp.run(qcp.load(compiled(bell_kernel, shots=10_000)), seed=42)
    assert set(report.histogram) == {"00", "11"}
    for k in ("00", "11"):
        assert abs(report.histogram[k] - 5000) <= 150
    assert report.shots == 10_000 == len(report.records)


def test_ghz3_against_oracle():
    k = ghz(3)
    dist = kernel_distribution(k)
    assert dist == pytest.approx({"000": 0.5, "111": 0.5})
    report = qcp.run(qcp.load(compiled(k, shots=10_000)), seed=42)
    assert set(report.histogram) == {"000", "111"}
    for key in dist:
        assert abs(report.histogram[key] - 5000) <= 150


@pytest.mark.parametrize("kernel", [linear_entangler(4), qft_like(3)])
def test_nontrivial_distributions_against_oracle(kernel):
    dist = kernel_distribution(kernel)
    report = qcp.run(qcp.load(compiled(kernel, shots=20_000)), seed=5)
    # critical value of chi2 at 1e-4 tail for up to 15 degrees of freedom is about 44
    assert chi_square_ok(report.histogram, dist, 20_000, 44.3)


def test_same_seed_same_records(bell_kernel):
    inst = qcp.load(compiled(bell_kernel, shots=500))
    a = qcp.run(inst, seed=9)
    b = qcp.run(inst, seed=9)
    c = qcp.run(inst, seed=10)
    assert a.records == b.records
    assert a.records != c.records


def test_backends_agree():
    inst = qcp.load(compiled(qft_like(4), shots=300))
    step = qcp.run(inst, seed=3, fast=False)
    py = qcp.run(inst, seed=3, kernel=replay.python_replay_shots)
    assert step.records == py.records
    if replay.compiled_replay_shots is not None:
        fast = qcp.run(inst, seed=3, kernel=replay.compiled_replay_shots)
        assert fast.records == step.records
        assert fast.backend == "compiled"


def test_shot_partitions_merge():
    inst = qcp.load(compiled(ghz(4), shots=100))
    whole = qcp.run(inst, seed=1)
    head = qcp.run(inst, seed=1, shots=40)
    tail = qcp.run(inst, seed=1, first_shot=40, shots=60)
    merged = head.merge(tail)
    assert merged.records == whole.records
    assert merged.histogram == whole.histogram


def test_trace_independent_of_seed(bell_kernel):
    inst = qcp.load(compiled(bell_kernel))
    a = qcp.run(inst, seed=1, shots=1).pulse_trace
    b = qcp.run(inst, seed=2, shots=1).pulse_trace
    assert a == b
    assert [e.waveform_id for e in a] == ["sc_drag_h", "sc_cr_cnot", "sc_readout", "sc_readout"]


def test_clock_is_sum_of_timings(bell_kernel):
    program = compiled(bell_kernel)
    report = qcp.run(qcp.load(program), seed=0, shots=1)
    timings = [i.timing for i in program.instructions() if isinstance(i, QuantumOp)]
    assert report.final_clock == sum(timings) == 16
    assert [e.t for e in report.pulse_trace] == [0, 4, 8, 12]


def test_step_by_step(bell_kernel):
    inst = qcp.load(compiled(bell_kernel))
    inst.begin_shot(0, 0)
    out = inst.step()
    assert isinstance(out.instruction, isa.EnvInit)
    inst.step()
    assert inst.state.qubit_addr_reg == 0b1
    inst.step()
    assert np.allclose(np.abs(inst.psi) ** 2, [0.5, 0.5, 0, 0])
    inst.step()
    assert inst.state.pair_reg == (0, 1)
    ev = inst.step().events
    assert ev[0].channel == (0, 1)
    inst.step()
    out = inst.step()
    assert out.measured in (0, 1)
    while not inst.state.halted:
        inst.step()
    assert inst.state.result_regs[0] == inst.state.result_regs[1] == out.measured
    with pytest.raises(qcp.ExecutionFault):
        inst.step()


def _raw(words, nq=2, nr=1, target=Target.SUPERCONDUCTING):
    return BinaryProgram(target, nq, nr, 1, tuple(words))


def test_measure_without_result_selector():
    words = [isa.envinit_word(2), isa.encode(MemLoad.single(0)), isa.quantum_word(7, 1 << 11, 4), 0]
    with pytest.raises(qcp.ShotError) as info:
        qcp.run(qcp.load(_raw(words)), shots=1)
    assert info.value.pc == 2
    assert isinstance(info.value.cause, qcp.MeasureWithoutPendingResult)


def test_atomprep_on_superconducting():
    words = [isa.envinit_word(2), isa.atomprep_word(isa.AtomPrepKind.IMAGE_FETCH), 0]
    with pytest.raises(qcp.ShotError) as info:
        qcp.run(qcp.load(_raw(words)), shots=1)
    assert isinstance(info.value.cause, qcp.AtomPrepOnSuperconducting)


def test_qubit_outside_register():
    words = [isa.envinit_word(2), isa.encode(MemLoad.single(5)), isa.quantum_word(15, 0, 4), 0]
    with pytest.raises(qcp.ShotError) as info:
        qcp.run(qcp.load(_raw(words)), shots=1)
    assert info.value.pc == 1


def test_missing_halt():
    with pytest.raises(qcp.ShotError):
        qcp.run(qcp.load(_raw([isa.envinit_word(2)])), shots=1)


def test_load_errors(bell_kernel):
    program = compiled(bell_kernel)
    with pytest.raises(qcp.BadProgram):
        qcp.load(_raw([0]))
    with pytest.raises(qcp.BadProgram):
        qcp.load(_raw([isa.envinit_word(2), 0x1000_0000]))
    lib = qcp.PulseLibrary.default()
    with pytest.raises(qcp.MissingWaveform):
        qcp.load(program, lib.without(Target.SUPERCONDUCTING, "cnot"))
    with pytest.raises(qcp.MissingWaveform):
        qcp.load(program, lib.restricted(Target.NEUTRAL_ATOM))


def test_pulse_lib_env_override(bell_kernel, tmp_path, monkeypatch):
    lib = json.loads(json.dumps({"superconducting": {
        g: {"waveform": f"custom_{g}", "params": {}} for g in ("h", "cnot", "mz")}}))
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(lib))
    monkeypatch.setenv("UQP_PULSE_LIB", str(path))
    report = qcp.run(qcp.load(compiled(bell_kernel)), shots=1)
    assert {e.waveform_id for e in report.pulse_trace} == {"custom_h", "custom_cnot", "custom_mz"}


def test_trace_only_beyond_statevector_cap():
    report = qcp.run(qcp.load(compiled(ghz(30), shots=5)), seed=0)
    assert report.trace_only
    assert report.records == [] and report.histogram == {}
    assert len(report.pulse_trace) == 1 + 29 + 30


def test_exports(bell_kernel):
    report = qcp.run(qcp.load(compiled(bell_kernel, shots=50)), seed=4)
    d = json.loads(report.to_json())
    assert sum(d["histogram"].values()) == 50
    assert d["pulse_trace"][1]["channel"] == [0, 1]
    csv = report.histogram_csv().splitlines()
    assert csv[0] == "bitstring,count" and len(csv) == 1 + len(report.histogram)
    assert report.trace_csv().splitlines()[2].startswith("4,0-1,")


def test_neutral_atom_run(bell_kernel):
    report = qcp.run(qcp.load(compiled(bell_kernel, Target.NEUTRAL_ATOM, shots=30)), seed=11)
    log = report.atom_prep_log
    assert log["defect_free"]
    assert log["plan_size"] == len(log["awg_records"])
    assert set(report.histogram) <= {"00", "11"}
    assert 0 <= log["plan_sizes"]["min"] <= log["plan_sizes"]["max"]


def test_neutral_atom_fast_equals_step(bell_kernel):
    inst = qcp.load(compiled(bell_kernel, Target.NEUTRAL_ATOM, shots=20))
    fast = qcp.run(inst, seed=2)
    slow = qcp.run(inst, seed=2, fast=False)
    assert fast.records == slow.records
    assert fast.atom_prep_log["plan_sizes"] == slow.atom_prep_log["plan_sizes"]


def test_reset_gate_replays_identically():
    k = QuantumKernel("r", 1, 1, (Gate1Q("h", 0), Gate1Q("reset", 0), Gate1Q("x", 0), Measure(0, 0)))
    inst = qcp.load(compiled(k, shots=200))
    fast = qcp.run(inst, seed=8)
    assert fast.histogram == {"1": 200}
    assert fast.records == qcp.run(inst, seed=8, fast=False).records


def _random_table(rng, nq, nr, nops):
    from uqp import statevector as sv
    mats = np.stack([sv.gate_matrix(g, a) for g, a in
                     (("h", None), ("t", None), ("rx", 0.3), ("ry", 1.1), ("sx", None))])
    rows, draws = [], 0
    for _ in range(nops):
        kind = int(rng.integers(7))
        a, b = (int(x) for x in rng.choice(nq, 2, replace=False))
        if kind in (replay.OP_MEASURE, replay.OP_RESET):
            draws += 1
        if kind == replay.OP_FETCH:
            a = int(rng.integers(nr))
        rows.append((kind, a, b, int(rng.integers(len(mats)))))
    return np.array(rows, dtype=np.int64).reshape(-1, 4), mats, rng.random((50, max(draws, 1)))


@pytest.mark.skipif(replay.compiled_replay_shots is None, reason="extension not built")
@pytest.mark.parametrize("seed", range(12))
def test_kernels_agree_on_random_tables(seed):
    rng = np.random.default_rng(seed)
    nq = int(rng.integers(2, 7))
    ops, mats, u = _random_table(rng, nq, 3, int(rng.integers(0, 40)))
    a = replay.python_replay_shots(ops, mats, nq, 3, u)
    b = replay.compiled_replay_shots(ops, mats, nq, 3, u)
    assert np.array_equal(a, b)


def test_backend_selection_env(monkeypatch):
    import importlib
    monkeypatch.setenv("UQP_PURE_PYTHON", "1")
    try:
        mod = importlib.reload(replay)
        assert mod.BACKEND == "python" and mod.replay_shots is mod.python_replay_shots
    finally:
        monkeypatch.undo()  # restore the caller's environment before reloading
        importlib.reload(replay)
