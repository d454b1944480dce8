import numpy as np
import pytest

from ttnembed.circuit import (
    GateLayer,
    LayeredCircuit,
    apply_gate,
    circuit_state,
    identity_layer,
    random_layer,
    random_unitary,
    zero_state,
)
from ttnembed.network import balanced_topology, caterpillar_topology, from_statevector, infidelity, random_ttn
from ttnembed.optimize import EmbedReport, SweepConfig, embed, environment, pairing, svd_update, sweep_optimize
from ttnembed.tensor_core import unitary_fractional_power

from conftest import ghz, random_state


def _circuit(top, rng, depth):
    return LayeredCircuit(top.n_qubits, tuple(random_layer(top, rng) for _ in range(depth)), top)


def test_environment_pairing_equals_overlap(rng):
    top = balanced_topology(6)
    circ = _circuit(top, rng, 2)
    target = random_state(6, rng)
    direct = np.vdot(target, circuit_state(circ))
    for k in (1, 2):
        for node in top.node_ids:
            env = environment(target, circ, k, node)
            gate = next(g for g in circ.layers[k - 1] if g.node_id == node)
            assert abs(pairing(env, gate.unitary) - direct) < 1e-10


def test_environment_linear_in_gate(rng):
    top = balanced_topology(5)
    circ = _circuit(top, rng, 2)
    target = random_state(5, rng)
    env = environment(target, circ, 2, 3)
    g1, g2 = rng.standard_normal((4, 4)), 1j * rng.standard_normal((4, 4))
    # any matrix in the slot, unitary or not, pairs to the dense overlap
    for g in (g1, g2, g1 + 2 * g2):
        state = zero_state(5).reshape((2,) * 5)
        for k, layer in enumerate(circ.layers, start=1):
            for gate in layer:
                state = apply_gate(state, g if (k, gate.node_id) == (2, 3) else gate.unitary, *gate.qubits)
        assert abs(pairing(env, g) - np.vdot(target, state.reshape(-1))) < 1e-10
    assert abs(pairing(env, g1 + 2 * g2) - pairing(env, g1) - 2 * pairing(env, g2)) < 1e-12


def test_environment_single_gate_recovers_gate(rng):
    top = balanced_topology(2)
    u = random_unitary(4, rng)
    target = u[:, 0]
    circ = LayeredCircuit(2, (identity_layer(top),), top)
    env = environment(target, circ, 1, 1)
    u_new, best = svd_update(env)
    assert abs(best - 1) < 1e-12
    assert abs(abs(pairing(env, u_new)) - 1) < 1e-12
    assert np.allclose(u_new[:, 0], target)


def test_environment_identity_circuit_zero_target():
    top = balanced_topology(4)
    circ = LayeredCircuit(4, (identity_layer(top), identity_layer(top)), top)
    env = environment(zero_state(4), circ, 1, 2)
    u_new, best = svd_update(env)
    assert abs(best - 1) < 1e-12
    assert abs(pairing(env, np.eye(4)) - 1) < 1e-12


def test_environment_bad_index(rng):
    top = balanced_topology(4)
    circ = _circuit(top, rng, 1)
    with pytest.raises(IndexError):
        environment(zero_state(4), circ, 2, 1)
    with pytest.raises(IndexError):
        environment(zero_state(4), circ, 1, 9)


def test_svd_update_examples(rng):
    u = random_unitary(4, rng)
    u_new, best = svd_update(u)
    assert np.allclose(u_new, u) and abs(best - 4) < 1e-12
    u_new, best = svd_update(np.diag([2, 1, 1, 0.5]))
    assert np.allclose(u_new, np.eye(4)) and abs(best - 4.5) < 1e-12
    u_new, best = svd_update(np.zeros((4, 4)))
    assert np.array_equal(u_new, np.eye(4)) and best == 0.0


def test_svd_update_optimality_audit(rng):
    env = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    u_new, best = svd_update(env)
    assert abs(pairing(env, u_new) - best) < 1e-10
    for _ in range(200):
        assert abs(pairing(env, random_unitary(4, rng))) <= best + 1e-10


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(sweeps=0)
    with pytest.raises(ValueError):
        SweepConfig(learning_rate=1.5)
    with pytest.raises(ValueError):
        SweepConfig(convergence_tol=-1)


def test_sweep_fixed_point(rng):
    top = balanced_topology(6)
    circ = _circuit(top, rng, 2)
    out, trace = sweep_optimize(circ, circuit_state(circ), SweepConfig(3, 1.0, 0.0))
    assert len(trace) == 3
    assert max(trace) < 1e-10


def test_sweep_ghz8_identity_start_is_stationary():
    # every environment is rank one on |00><00|, so each update keeps |00> -> |00>
    top = balanced_topology(8)
    circ = LayeredCircuit(8, (identity_layer(top), identity_layer(top)), top)
    out, trace = sweep_optimize(circ, ghz(8), SweepConfig(50, 1.0))
    assert abs(trace[-1] - (1 - 1 / np.sqrt(2))) < 1e-12
    assert infidelity(ghz(8), circuit_state(out)) == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-12)


def test_sweep_ghz8_random_start(rng):
    top = balanced_topology(8)
    one = LayeredCircuit(8, (random_layer(top, rng),), top)
    _, trace = sweep_optimize(one, ghz(8), SweepConfig(50, 1.0))
    assert trace[-1] < 1e-10
    two = _circuit(top, rng, 2)
    out, trace = sweep_optimize(two, ghz(8), SweepConfig(50, 1.0))
    assert trace[-1] < 1e-4
    assert abs(infidelity(ghz(8), circuit_state(out)) - trace[-1]) < 1e-12


def test_sweep_zero_rate_leaves_circuit(rng):
    top = caterpillar_topology(5)
    circ = _circuit(top, rng, 2)
    out, _ = sweep_optimize(circ, random_state(5, rng), SweepConfig(4, 0.0, 0.0))
    for a, b in zip(circ.layers, out.layers):
        for g, h in zip(a, b):
            assert np.array_equal(g.unitary, h.unitary)


def test_sweep_monotone_per_update_dense_oracle(rng):
    top = balanced_topology(6)
    circ = _circuit(top, rng, 2)
    target = random_state(6, rng)
    seen = [abs(np.vdot(target, circuit_state(circ)))]

    def check(t, k, node, overlap, current):
        dense = abs(np.vdot(target, circuit_state(current)))
        assert abs(dense - overlap) < 1e-10
        seen.append(dense)

    sweep_optimize(circ, target, SweepConfig(3, 1.0, 0.0), callback=check)
    assert len(seen) == 1 + 3 * 2 * 5
    assert all(b >= a - 1e-9 for a, b in zip(seen, seen[1:]))


def test_sweep_order_is_layer_then_bfs(rng):
    top = balanced_topology(4)
    circ = _circuit(top, rng, 2)
    order = []
    sweep_optimize(circ, random_state(4, rng), SweepConfig(1), callback=lambda t, k, i, ov, c: order.append((k, i)))
    assert order == [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)]


def test_sweep_learning_rate_update_rule(rng):
    # one gate, one update: U_old (U_old^dag U_new)^r
    top = balanced_topology(2)
    old = random_unitary(4, rng)
    circ = LayeredCircuit(2, (GateLayer((identity_layer(top).gates[0].with_unitary(old),)),), top)
    target = random_state(2, rng)
    env = environment(target, circ, 1, 1)
    u_new, _ = svd_update(env)
    expected = old @ unitary_fractional_power(old.conj().T @ u_new, 0.6)
    out, _ = sweep_optimize(circ, target, SweepConfig(1, 0.6))
    assert np.allclose(out.layers[0].gates[0].unitary, expected, atol=1e-12)


def test_early_stop(rng):
    top = balanced_topology(4)
    circ = _circuit(top, rng, 1)
    _, trace = sweep_optimize(circ, circuit_state(circ), SweepConfig(50, 1.0, 1e-12))
    assert len(trace) == 2


@pytest.mark.parametrize("method", ["D_all", "O_all", "Iter_I", "Iter_D"])
def test_embed_exact_for_chi2(rng, method):
    psi0 = random_ttn(balanced_topology(6), 2, rng)
    report = embed(psi0, method, 1, SweepConfig(60, 1.0))
    assert report.final_infidelities()[1] < 1e-8
    assert report.circuit.depth == 1


def test_embed_report_contents(rng):
    psi = random_state(5, rng)
    psi0 = from_statevector(psi, balanced_topology(5), chi_max=2)
    report = embed(psi0, "Iter_D", 3, SweepConfig(5, 0.65), reference=psi)
    assert sorted(report.circuits) == [1, 2, 3]
    assert all(0.0 <= r["infidelity"] <= 1.0 for r in report.records)
    assert sorted(report.final_infidelities()) == [1, 2, 3]
    finals = report.final_infidelities()
    for k, circ in report.circuits.items():
        assert circ.depth == k
        assert abs(infidelity(psi0, circuit_state(circ)) - finals[k]) < 1e-12
    assert report.config["learning_rate"] == 0.65
    text = report.to_csv()
    assert text.splitlines()[0] == "method,K,sweep,infidelity,infidelity_to_state,seconds"
    assert report.to_dict()["method"] == "Iter_D"


def test_embed_iter_d_trace_non_increasing(rng):
    psi0 = random_ttn(balanced_topology(6), 4, rng)
    report = embed(psi0, "Iter_D", 3, SweepConfig(20, 1.0))
    finals = report.final_infidelities()
    d_all = embed(psi0, "D_all", 3).final_infidelities()
    assert finals[1] <= d_all[1] + 1e-9
    assert all(finals[k + 1] <= finals[k] + 1e-9 for k in (1, 2))


def test_embed_unknown_method(rng):
    with pytest.raises(ValueError, match="unknown method"):
        embed(random_ttn(balanced_topology(4), 2, rng), "SGD", 1)


def test_report_csv_file(tmp_path, rng):
    report = embed(random_ttn(balanced_topology(4), 2, rng), "D_all", 2)
    path = tmp_path / "r.csv"
    report.to_csv(path, include_timing=False)
    lines = path.read_text().splitlines()
    assert lines[0] == "method,K,sweep,infidelity,infidelity_to_state"
    assert len(lines) == 3
    assert isinstance(report, EmbedReport)
