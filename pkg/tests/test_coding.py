import math

import numpy as np
import pytest

from oneshot_qcap.channels import depolarizing, identity_channel
from oneshot_qcap.coding import (
    build_position_povm,
    converse_floor,
    derandomize,
    dilation_statistics,
    gentle_checks,
    hn_check,
    report_floors,
    seq_check,
    simulate_broadcast_ea,
    simulate_gp_ea,
    simulate_mac_ea,
    simulate_p2p_ea,
    simulate_unassisted,
)
from oneshot_qcap.linalg import (
    DensityOp,
    HermOp,
    SystemLayout,
    maximally_mixed,
    sample,
    tensor,
)

from conftest import (
    bell_density,
    classically_correlated,
    copy_broadcast_channel,
    gp_controlled_flip_channel,
    gp_discard_channel,
    xor_mac_channel,
)

# Exact success probability of the square-root-measurement decoder for a
# noiseless qubit carrying one bit against a Bell resource: 1/2 + sqrt(3)/4.
PGM_BELL_SUCCESS = 0.5 + math.sqrt(3.0) / 4.0


def sub_identity(dim, seed):
    m = sample("density", dim, seed).matrix * dim
    return 0.9 * m / np.linalg.eigvalsh(m)[-1]


# ---------------------------------------------------------------------------
# position POVM and operator-inequality checks


def test_position_povm_completes_and_embeds():
    test = HermOp(np.diag([0.9, 0.1, 0.6, 0.2]),
                  SystemLayout([("B", 2), ("R", 2)]))
    code = build_position_povm(test, copies=4, resource_label="R")
    total = np.sum(code.povm, axis=0) + code.completion
    assert np.allclose(total, np.eye(code.layout.dim), atol=1e-10)
    assert len(code.povm) == 4
    for el in code.povm:
        evals = np.linalg.eigvalsh(el)
        assert evals[0] >= -1e-10


def test_position_povm_rejects_invalid_test():
    bad = HermOp(np.diag([1.5, 0.0]), SystemLayout([("B", 2)]))
    with pytest.raises(ValueError):
        build_position_povm(bad, copies=2, resource_label="B")


@pytest.mark.parametrize("seed", range(4))
def test_hn_check_nonnegative(seed):
    s = sub_identity(4, seed)
    t = sample("density", 4, seed + 50).matrix * 0.5
    for c in (0.1, 1.0, 7.0):
        assert hn_check(s, t, c) >= -1e-9


def test_hn_check_rejects_bad_constant():
    with pytest.raises(ValueError):
        hn_check(np.eye(2) * 0.5, np.eye(2) * 0.1, 0.0)


def test_seq_check_union_bound():
    rho = sample("density", 4, 3)
    projs = []
    for seed in (7, 8, 9):
        vec = sample("pure", 4, seed).amplitudes
        projs.append(np.outer(vec, vec.conj()))
    lhs, rhs = seq_check(rho, projs)
    assert lhs >= rhs - 1e-12
    assert 0.0 <= lhs <= 1.0 + 1e-12


def test_seq_check_rejects_non_projector():
    rho = sample("density", 2, 1)
    with pytest.raises(ValueError):
        seq_check(rho, [np.eye(2) * 0.5])


def test_gentle_checks_all_modes_hold():
    lay = SystemLayout([("A", 3)])
    rho = sample("density", 3, 11, labels=["A"])
    other = sample("density", 3, 12, labels=["A"])
    pi = sub_identity(3, 13)
    rep = gentle_checks("sqrt_overlap", state=rho, operator=pi, other=other)
    assert rep["holds"]

    rep = gentle_checks("single_operator", state=rho,
                        operator=sub_identity(3, 14))
    assert rep["holds"]

    vec = sample("pure", 3, 15).amplitudes
    pure = DensityOp(np.outer(vec, vec.conj()), lay)
    povm = sample("povm", 3, 16, outcomes=3)
    roots = []
    for el in povm:
        w, v = np.linalg.eigh(el.matrix)
        roots.append(v @ np.diag(np.sqrt(np.clip(w, 0, None))) @ v.conj().T)
    rep = gentle_checks("povm_ensemble", state=pure, povm=roots)
    assert rep["holds"]
    assert rep["equality_holds"] is not False


def test_gentle_checks_unknown_mode():
    with pytest.raises(ValueError):
        gentle_checks("nonsense", state=sample("density", 2, 0))


# ---------------------------------------------------------------------------
# point-to-point entanglement-assisted simulation


def test_p2p_ea_noiseless_qubit_exact_value(id2, bell):
    report = simulate_p2p_ea(id2, bell, rate=1, eps=0.1, delta=0.05)
    assert report.worst_error == pytest.approx(1.0 - PGM_BELL_SUCCESS,
                                               abs=1e-10)
    assert report.bound_satisfied
    dist = report.details["outcome_dist"]
    assert np.allclose(dist.sum(axis=1), 1.0, atol=1e-10)


def test_p2p_ea_fully_depolarizing_is_a_coin_flip(bell):
    ch = depolarizing(1.0, 2, "A", "B")
    report = simulate_p2p_ea(ch, bell, rate=1, eps=0.1, delta=0.05)
    assert report.worst_error == pytest.approx(0.5, abs=1e-10)
    assert not report.rate_feasible
    assert report.bound_satisfied  # Hayashi-Nagaoka bound exceeds 1 here


def test_p2p_ea_feasible_instance_meets_analytic_bound(id2, bell):
    report = simulate_p2p_ea(id2, bell, rate=1, eps=0.05, delta=0.45)
    assert report.rate_feasible
    assert report.worst_error <= min(1.0, report.analytic_bound) + 1e-8


def test_p2p_ea_rejects_misshapen_state(id2):
    bad = sample("density", [2, 2, 2], 5, labels=["A", "R", "X"])
    with pytest.raises(ValueError):
        simulate_p2p_ea(id2, bad, rate=1, eps=0.1, delta=0.05)


# ---------------------------------------------------------------------------
# channel-with-state simulation


def test_gp_ea_discard_matches_p2p(id2, bell, tau_s, gp_input):
    # Discarding the channel state reduces to a noiseless point-to-point
    # qubit; both decoders then smooth at the same level.
    gp = simulate_gp_ea(gp_discard_channel(), tau_s, gp_input, rate=1,
                        eps=0.15, delta=0.05)
    p2p = simulate_p2p_ea(id2, bell, rate=1, eps=0.1, delta=0.05)
    assert np.allclose(gp.details["outcome_dist"],
                       p2p.details["outcome_dist"], atol=1e-10)
    assert gp.bound_satisfied


def test_gp_ea_controlled_flip_bound_holds(tau_s, gp_input):
    report = simulate_gp_ea(gp_controlled_flip_channel(), tau_s, gp_input,
                            rate=1, eps=0.15, delta=0.05)
    assert report.bound_satisfied
    assert 0.0 <= report.worst_error <= 1.0


def test_gp_ea_rejects_wrong_channel_state(tau_s, gp_input):
    wrong = DensityOp(np.diag([1.0, 0.0]), SystemLayout([("S", 2)]))
    with pytest.raises(ValueError):
        simulate_gp_ea(gp_discard_channel(), wrong, gp_input, rate=1,
                       eps=0.15, delta=0.05)


# ---------------------------------------------------------------------------
# broadcast simulation


def test_broadcast_ea_copy_channel():
    psi = tensor(bell_density("A", "RB"),
                 maximally_mixed(SystemLayout([("RC", 2)])))
    report = simulate_broadcast_ea(copy_broadcast_channel(), psi,
                                   rates=(1, 1), epsilons=(0.1, 0.1),
                                   delta=0.05)
    assert report.bound_satisfied
    worst_b, worst_c = report.details["per_receiver_worst_error"]
    # Charlie's resource carries no information, so he cannot beat guessing.
    assert worst_c >= 0.5 - 1e-9
    assert worst_b <= worst_c
    assert report.worst_error == pytest.approx(max(worst_b, worst_c), abs=1e-12)


def test_broadcast_ea_rejects_correlated_resources():
    mat = np.zeros((8, 8), dtype=complex)
    for i in range(2):
        mat[i * 3 + i * 2 + i, i * 3 + i * 2 + i] = 0.5  # |iii><iii| diagonal
    mat = np.diag([0.5, 0, 0, 0, 0, 0, 0, 0.5]).astype(complex)
    psi = DensityOp(mat, SystemLayout([("A", 2), ("RB", 2), ("RC", 2)]))
    with pytest.raises(ValueError):
        simulate_broadcast_ea(copy_broadcast_channel(), psi, rates=(1, 1),
                              epsilons=(0.1, 0.1), delta=0.05)


# ---------------------------------------------------------------------------
# multiple-access simulation


def mac_inputs():
    return (classically_correlated("A", "RA"),
            classically_correlated("B", "RB"))


@pytest.mark.parametrize("strategy", ["sequential", "pgm_a_first",
                                      "pgm_b_first"])
def test_mac_ea_xor_all_strategies(strategy):
    psi_a, psi_b = mac_inputs()
    report = simulate_mac_ea(xor_mac_channel(), psi_a, psi_b, rates=(1, 1),
                             epsilons=(0.05, 0.1), delta=0.02,
                             strategy=strategy)
    assert report.scenario == "mac_ea"
    assert report.bound_satisfied
    dist = report.details["outcome_dist"]
    assert dist.shape == (4, 9)  # (m1, m2) rows; 3 x 3 outcome grid w/ aborts
    assert np.allclose(dist.sum(axis=1), 1.0, atol=1e-9)


def test_mac_ea_unknown_strategy():
    psi_a, psi_b = mac_inputs()
    with pytest.raises(ValueError):
        simulate_mac_ea(xor_mac_channel(), psi_a, psi_b, rates=(1, 1),
                        epsilons=(0.05, 0.1), delta=0.02, strategy="joint")


# ---------------------------------------------------------------------------
# unassisted simulation


def test_p2p_ua_identity_with_shared_randomness(id2):
    corr = classically_correlated("A", "U")
    report = simulate_unassisted("p2p", id2, corr, 1, 0.1, delta=0.6)
    assert report.scenario == "p2p_ua"
    assert report.rate_feasible
    assert report.avg_error <= min(1.0, report.analytic_bound) + 1e-8
    assert report.reported_error == pytest.approx(report.avg_error, abs=1e-12)


def test_p2p_ua_rejects_nonclassical_register(id2, bell):
    with pytest.raises(ValueError):
        simulate_unassisted("p2p", id2, bell.permuted(["A", "B'"]), 1, 0.1,
                            delta=0.3)


def test_mac_ua_xor():
    psi_a = classically_correlated("A", "UA")
    psi_b = classically_correlated("B", "UB")
    report = simulate_unassisted("mac", xor_mac_channel(), psi_a, (1, 1),
                                 (0.1, 0.1), delta=0.05, psi_b=psi_b)
    assert report.scenario == "mac_ua"
    assert report.bound_satisfied


# ---------------------------------------------------------------------------
# derandomization


def test_derandomize_rate_one_is_perfect(id2):
    corr = classically_correlated("A", "U")
    code = derandomize("p2p", id2, corr, 1, 0.1, 0.6)
    assert code.exhaustive
    assert code.strings == (0, 1)
    assert code.error == pytest.approx(0.0, abs=1e-12)
    assert code.randomized_error == pytest.approx(0.25, abs=1e-10)


def test_derandomize_beats_randomized_average(id2):
    corr = classically_correlated("A", "U")
    code = derandomize("p2p", id2, corr, 2, 0.1, 0.6)
    assert code.exhaustive
    assert code.error <= code.randomized_error + 1e-12
    assert code.error == pytest.approx(0.5, abs=1e-10)
    assert code.randomized_error == pytest.approx(0.53125, abs=1e-10)


# ---------------------------------------------------------------------------
# accounting cross-checks


def test_dilation_statistics_match_direct_traces():
    test = HermOp(np.diag([0.8, 0.15, 0.55, 0.3]),
                  SystemLayout([("B", 2), ("R", 2)]))
    code = build_position_povm(test, copies=2, resource_label="R")
    state = sample("density", [2, 2, 2], 21, labels=list(code.layout.labels))
    probs = dilation_statistics(code, state)
    direct = [float(np.real(np.trace(el @ state.matrix)))
              for el in code.povm]
    assert np.allclose(probs[:-1], direct, atol=1e-8)
    assert probs[-1] == pytest.approx(1.0 - sum(direct), abs=1e-8)


def test_converse_floor_perfect_code():
    dist = np.eye(4)
    out = converse_floor(dist, 2.0, sigmas=3)
    assert out["holds"]
    assert out["floor"] >= 2.0 - 1e-7


def test_report_floors_p2p_and_mac(id2, bell):
    p2p = simulate_p2p_ea(id2, bell, rate=1, eps=0.1, delta=0.05)
    floors = report_floors(p2p, sigmas=3)
    assert len(floors) == 1 and floors[0]["holds"]

    psi_a, psi_b = mac_inputs()
    mac = simulate_mac_ea(xor_mac_channel(), psi_a, psi_b, rates=(1, 1),
                          epsilons=(0.05, 0.1), delta=0.02,
                          strategy="sequential")
    floors = report_floors(mac, sigmas=3)
    assert len(floors) == 1 and floors[0]["holds"]


def test_report_floors_broadcast():
    psi = tensor(bell_density("A", "RB"),
                 maximally_mixed(SystemLayout([("RC", 2)])))
    report = simulate_broadcast_ea(copy_broadcast_channel(), psi,
                                   rates=(1, 1), epsilons=(0.1, 0.1),
                                   delta=0.05)
    floors = report_floors(report, sigmas=3)
    assert len(floors) == 2
    assert all(f["holds"] for f in floors)
