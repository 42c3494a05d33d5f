import numpy as np
import pytest

from qpcp.circuits import (NAMED_GATES, GateSpec, GateSpecError, adjoint_circuit, apply_gate, circuit_unitary,
                           project_qubits, register_probabilities, slot_index, to_batch, to_columns, x_gates,
                           zero_batch)


@pytest.mark.parametrize("kwargs", [
    {"targets": (0,), "name": "SWAP"},
    {"targets": (0,), "name": "CNOT"},
    {"targets": (0,)},
    {"targets": (0,), "name": "X", "unitary": np.eye(2)},
    {"targets": (0, 0), "name": "CNOT"},
    {"targets": (0,), "unitary": np.diag([1.0, 2.0])},
    {"targets": (0,), "name": "X", "controls": (1,), "control_state": "01"},
    {"targets": ("q0",), "name": "X"},
    {"targets": (-1,), "name": "X"},
])
def test_malformed_gates(kwargs):
    with pytest.raises(GateSpecError):
        GateSpec(**kwargs)


def test_slot_index():
    assert slot_index("q3") == 3
    assert slot_index(4) is None
    with pytest.raises(GateSpecError):
        slot_index("x1")


def test_control_state_defaults_to_ones():
    g = GateSpec((2,), name="X", controls=(0, 1))
    assert g.control_state == "11"


def test_full_matrix_places_block_at_control_state():
    g = GateSpec((1,), name="X", controls=(0,), control_state="0")
    m = g.full_matrix()
    np.testing.assert_allclose(m[:2, :2], NAMED_GATES["X"])
    np.testing.assert_allclose(m[2:, 2:], np.eye(2))


def test_bell_circuit():
    u = circuit_unitary([GateSpec((0,), name="H"), GateSpec((0, 1), name="CNOT")], 2)
    np.testing.assert_allclose(u[:, 0], np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-12)


def test_qubit_zero_is_most_significant():
    u = circuit_unitary([GateSpec((0,), name="X")], 2)
    assert u[2, 0] == 1


def test_resolve_replaces_slots():
    g = GateSpec(("q1", 0), name="CNOT")
    assert g.slots == {1}
    r = g.resolve(lambda s: 5)
    assert r.targets == (5, 0)
    assert r.slots == set()


def test_apply_gate_refuses_unresolved_slots():
    with pytest.raises(GateSpecError):
        apply_gate(zero_batch(2), GateSpec(("q1",), name="X"))


def test_adjoint_circuit_undoes_circuit():
    circuit = [GateSpec((0,), name="S"), GateSpec((1,), name="T"), GateSpec((0, 1), name="CNOT"),
               GateSpec((1,), unitary=np.array([[0, 1j], [1j, 0]]))]
    u = circuit_unitary(list(circuit) + adjoint_circuit(circuit), 2)
    np.testing.assert_allclose(u, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(GateSpec((0,), name="S").adjoint().matrix, np.diag([1, -1j]))


def test_x_gates():
    gates = x_gates("101", offset=2)
    assert [g.targets for g in gates] == [(2,), (4,)]


def test_register_probabilities_and_projection():
    batch = apply_gate(zero_batch(2), GateSpec((0,), name="H"))
    np.testing.assert_allclose(register_probabilities(batch, [0]), [0.5, 0.5])
    np.testing.assert_allclose(register_probabilities(batch, []), [1.0])
    projected = project_qubits(batch, [0], 1)
    np.testing.assert_allclose(to_columns(projected)[:, 0], [0, 0, 1 / np.sqrt(2), 0], atol=1e-12)


def test_batches_keep_columns_independent():
    columns = np.eye(4, dtype=np.complex128)[:, [0, 3]]
    batch = apply_gate(to_batch(columns, 2), GateSpec((1,), name="X"))
    np.testing.assert_allclose(to_columns(batch), np.eye(4)[:, [1, 2]])
