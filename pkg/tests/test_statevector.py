"""Dense engine checks: gates, measurement branching, fidelities, Choi math."""

import numpy as np
import pytest

from dyncirc import statevector as sv
from dyncirc.circuits import Circuit
from dyncirc.pauli import PauliString


class Site:
    """Minimal noise-site stand-in for exact enumeration tests."""

    def __init__(self, before_index, pauli, omega):
        self.before_index = before_index
        self.pauli = pauli
        self.omega = omega


def test_zero_and_basis_states():
    psi = sv.zero_state(3)
    assert psi[0] == 1.0 and np.count_nonzero(psi) == 1
    phi = sv.basis_state(3, 0b110)
    assert phi[6] == 1.0


def test_capacity_cap():
    with pytest.raises(ValueError):
        sv.zero_state(15)


def test_apply_unitary_rejects_non_unitary():
    bad = np.array([[1.0, 0.0], [0.0, 1.0 + 1e-6]], dtype=complex)
    with pytest.raises(ValueError):
        sv.apply_unitary(sv.zero_state(1), bad, (0,))
    # within tolerance passes
    ok = np.array([[1.0, 0.0], [0.0, 1.0 + 1e-12]], dtype=complex)
    sv.apply_unitary(sv.zero_state(1), ok, (0,))


def test_ccz_truth_table():
    psi = sv.basis_state(3, 0b110)
    out = sv.apply_gate(psi, "ccz", 0, 1, 2)
    assert np.allclose(out, psi)
    psi = sv.basis_state(3, 0b111)
    out = sv.apply_gate(psi, "ccz", 0, 1, 2)
    assert np.allclose(out, -psi)


def test_hadamard_layer_uniform():
    psi = sv.zero_state(4)
    for q in range(4):
        psi = sv.apply_gate(psi, "h", q)
    assert np.allclose(psi, np.full(16, 0.25))


def test_norm_tracked_through_random_circuits():
    rng = np.random.default_rng(11)
    psi = sv.zero_state(5)
    names = ["h", "s", "x", "z", "t", "tdg"]
    for _ in range(200):
        if rng.random() < 0.3:
            q = rng.choice(5, size=2, replace=False)
            psi = sv.apply_gate(psi, "cx", int(q[0]), int(q[1]))
        else:
            psi = sv.apply_gate(psi, str(rng.choice(names)), int(rng.integers(5)))
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12


def test_state_fidelity_basics():
    z = sv.zero_state(1)
    one = sv.basis_state(1, 1)
    plus = sv.apply_gate(z, "h", 0)
    assert sv.state_fidelity(z, z) == pytest.approx(1.0)
    assert sv.state_fidelity(z, one) == pytest.approx(0.0)
    assert sv.state_fidelity(z, plus) == pytest.approx(0.5)


def test_apply_pauli_matches_matrix():
    rng = np.random.default_rng(23)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        p = PauliString(n, int(rng.integers(0, 1 << n)), int(rng.integers(0, 1 << n)),
                        sign=int(rng.choice([1, -1])))
        psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        psi /= np.linalg.norm(psi)
        assert np.allclose(sv.apply_pauli(psi, p), p.to_matrix() @ psi)


def test_collapse_probabilities():
    psi = sv.apply_gate(sv.zero_state(2), "h", 0)
    p0, p1 = sv.measure_probs(psi, 0)
    assert p0 == pytest.approx(0.5) and p1 == pytest.approx(0.5)
    p, st = sv.collapse(psi, 0, 1)
    assert p == pytest.approx(0.5)
    assert np.allclose(st, sv.basis_state(2, 0b10))


def test_overlap_through_ancillas_vs_partial_trace():
    rng = np.random.default_rng(5)
    n, keep = 4, (1, 3)
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    psi /= np.linalg.norm(psi)
    tgt = rng.normal(size=4) + 1j * rng.normal(size=4)
    tgt /= np.linalg.norm(tgt)
    got = sv.overlap_through_ancillas(tgt, psi, keep)
    # oracle: explicit reduced density matrix
    t = psi.reshape(2, 2, 2, 2)
    t = np.moveaxis(t, keep, (0, 1))  # keep axes first
    m = t.reshape(4, 4)
    rho = m @ m.conj().T
    want = float(np.real(tgt.conj() @ rho @ tgt))
    assert got == pytest.approx(want, abs=1e-12)


# ---------------------------------------------------------------------------
# branch executor
# ---------------------------------------------------------------------------


def bell_circuit():
    c = Circuit(2)
    c.add("h", 0, start=0.0)
    c.add("cx", 0, 1, start=0.0)
    return c


def test_bell_measurements_correlated():
    c = bell_circuit()
    c.measure(0, start=1.0)
    c.measure(1, start=1.0)
    branches = sv.run_branches(c)
    dist = sv.outcome_distribution(branches)
    assert dist == pytest.approx({(0, 0): 0.5, (1, 1): 0.5})


def test_deterministic_measurement_single_branch():
    c = Circuit(1)
    c.measure(0, start=0.0)
    branches = sv.run_branches(c)
    assert len(branches) == 1
    assert branches[0].bits == {0: 0}


def test_reset_returns_to_zero():
    c = Circuit(1)
    c.add("h", 0, start=0.0)
    c.add("reset", 0, start=0.0)
    for b in sv.run_branches(c):
        assert np.allclose(b.state, sv.zero_state(1))


SIX_EIGENSTATES = [
    ("z", 0), ("z", 1), ("x", 0), ("x", 1), ("y", 0), ("y", 1),
]


def prep_eigenstate(psi, q, basis, a):
    """|basis,+> for a=0 or |basis,-> for a=1 on qubit q."""
    if a == 1:
        psi = sv.apply_gate(psi, "x", q)
    if basis == "x":
        psi = sv.apply_gate(psi, "h", q)
    elif basis == "y":
        psi = sv.apply_gate(psi, "h", q)
        psi = sv.apply_gate(psi, "s", q)
    return psi


@pytest.mark.parametrize("basis,a", SIX_EIGENSTATES)
def test_teleportation_identity(basis, a):
    # one-Bell-pair teleportation with X/Z corrections returns the input state
    c = Circuit(3)
    c.add("h", 1, start=0.0)
    c.add("cx", 1, 2, start=0.0)
    c.add("cx", 0, 1, start=1.0)
    c.add("h", 0, start=2.0)
    m0 = c.measure(0, start=2.0)
    m1 = c.measure(1, start=2.0)
    c.add("cpauli", 2, start=3.0, pauli="X", parity=(m1,))
    c.add("cpauli", 2, start=3.0, pauli="Z", parity=(m0,))
    init = prep_eigenstate(sv.zero_state(3), 0, basis, a)
    want = prep_eigenstate(sv.zero_state(1), 0, basis, a)
    for b in sv.run_branches(c, initial=init):
        assert sv.overlap_through_ancillas(want, b.state, (2,)) == pytest.approx(1.0)


def test_post_process_mode_matches_feed_forward_distribution():
    # teleport then measure the output in X: classical stats must agree exactly
    c = Circuit(3)
    c.add("h", 1, start=0.0)
    c.add("cx", 1, 2, start=0.0)
    c.add("cx", 0, 1, start=1.0)
    c.add("h", 0, start=2.0)
    m0 = c.measure(0, start=2.0)
    m1 = c.measure(1, start=2.0)
    c.add("cpauli", 2, start=3.0, pauli="X", parity=(m1,))
    c.add("cpauli", 2, start=3.0, pauli="Z", parity=(m0,))
    c.add("h", 2, start=3.0)
    c.measure(2, start=3.0)
    init = prep_eigenstate(sv.zero_state(3), 0, "x", 1)  # teleport |->
    d_ff = sv.outcome_distribution(sv.run_branches(c, mode="feed_forward", initial=init))
    d_pp = sv.outcome_distribution(sv.run_branches(c, mode="post_process", initial=init))
    assert set(d_ff) == set(d_pp)
    for k in d_ff:
        assert d_ff[k] == pytest.approx(d_pp[k], abs=1e-12)


def test_empty_parity_never_fires():
    c = Circuit(1)
    c.measure(0, start=0.0)
    c.add("cpauli", 0, start=1.0, pauli="X", parity=())
    b, = sv.run_branches(c)
    assert np.allclose(b.state, sv.zero_state(1))


# ---------------------------------------------------------------------------
# exact noise enumeration and process fidelity
# ---------------------------------------------------------------------------


def test_enumerate_noise_probabilities_sum_to_one():
    sites = [
        Site(0, PauliString.from_text("XI"), 0.25),
        Site(1, PauliString.from_text("IZ"), 0.4),
        Site(0, PauliString.from_text("YY"), 0.0),  # skipped
    ]
    cfgs = sv.enumerate_noise(sites)
    assert len(cfgs) == 4
    assert sum(p for p, _ in cfgs) == pytest.approx(1.0)


def test_process_fidelity_ideal_is_one():
    c = Circuit(2)
    c.add("cx", 0, 1, start=0.0)
    assert sv.process_fidelity(c, sv.cnot_matrix(), (0, 1)) == pytest.approx(1.0, abs=1e-12)


def test_process_fidelity_saturated_two_pauli_noise_quarter():
    # identity circuit followed by fully mixed Z-on-0 and X-on-1 flips
    c = Circuit(2)
    c.add("barrier", start=0.0)
    sites = [
        Site(1, PauliString.from_text("ZI"), 0.5),
        Site(1, PauliString.from_text("IX"), 0.5),
    ]
    F = sv.process_fidelity(c, np.eye(4, dtype=complex), (0, 1), sites=sites)
    assert F == pytest.approx(0.25, abs=1e-12)


def test_process_fidelity_single_z_rate():
    # CNOT preceded by a Z flip on the control at rate 0.1:
    # F_proc = 1 - omega = (1 + e^{-0.2})/2
    lam = 0.1
    omega = (1 - np.exp(-2 * lam)) / 2
    c = Circuit(2)
    c.add("cx", 0, 1, start=0.0)
    sites = [Site(0, PauliString.from_text("ZI"), omega)]
    F = sv.process_fidelity(c, sv.cnot_matrix(), (0, 1), sites=sites)
    assert F == pytest.approx((1 + np.exp(-0.2)) / 2, abs=1e-12)


def test_average_state_fidelity_with_flips():
    # An always-on X on qubit 0 sends GHZ_3 to an orthogonal state; the
    # saturated (omega = 1/2) bit flip leaves fidelity exactly 1/2.
    from dyncirc.circuits import ghz_unitary

    c = ghz_unitary(3)
    end = len(c.instructions)
    always = [Site(end, PauliString.single(3, 0, "X"), 1.0)]
    assert sv.average_state_fidelity(c, sv.ghz_state(3), sites=always) == pytest.approx(0.0, abs=1e-12)
    saturated = [Site(end, PauliString.single(3, 0, "X"), 0.5)]
    assert sv.average_state_fidelity(c, sv.ghz_state(3), sites=saturated) == pytest.approx(0.5, abs=1e-12)


def test_circuit_unitary_of_cnot():
    c = Circuit(2)
    c.add("cx", 0, 1, start=0.0)
    assert np.allclose(sv.circuit_unitary(c), sv.cnot_matrix())
