import math

import numpy as np
import pytest

from oneshot_qcap.divergences import (
    SupportError,
    dh_classical_oracle,
    dh_eps,
    dh_rank1_oracle,
    dmax,
    relative_entropy,
)
from oneshot_qcap.linalg import DensityOp, SystemLayout, basis_ket, sample

from conftest import bell_density, pure_density


def diag_state(p):
    p = np.asarray(p, dtype=float)
    return DensityOp(np.diag(p).astype(complex),
                     SystemLayout([("A", len(p))]))


def test_relative_entropy_vanishes_on_equal_states():
    rho = sample("density", 3, 1)
    assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-10)


def test_relative_entropy_classical_kl():
    rho = diag_state([0.75, 0.25])
    sig = diag_state([0.5, 0.5])
    expected = 0.75 * math.log2(0.75 / 0.5) + 0.25 * math.log2(0.25 / 0.5)
    assert relative_entropy(rho, sig) == pytest.approx(expected, abs=1e-10)


def test_relative_entropy_support_violation():
    rho = diag_state([1.0, 0.0])
    sig = diag_state([0.0, 1.0])
    with pytest.raises(SupportError):
        relative_entropy(rho, sig)


def test_dmax_classical():
    rho = diag_state([0.8, 0.2])
    sig = diag_state([0.5, 0.5])
    assert dmax(rho, sig) == pytest.approx(math.log2(1.6), abs=1e-10)


def test_dmax_bell_vs_product_is_two_bits():
    rho = bell_density("A", "B")
    assert dmax(rho, np.eye(4) / 4) == pytest.approx(2.0, abs=1e-10)


def test_dmax_correlated_bit_penalty_is_one_bit():
    mat = np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)
    rho = DensityOp(mat, SystemLayout([("A", 2), ("B", 2)]))
    assert dmax(rho, np.eye(4) / 4) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.25, 0.5])
def test_self_divergence_closed_form(eps):
    rho = sample("density", 4, int(eps * 100) + 1)
    value = dh_eps(rho, rho, eps).value
    assert value == pytest.approx(-math.log2(1 - eps) if eps else 0.0,
                                  abs=1e-9)


def test_dh_zero_eps_pure_state():
    rho = pure_density(basis_ket(0, SystemLayout([("A", 2)])))
    sig = diag_state([0.3, 0.7])
    # At eps = 0 the optimal test is the support projector of rho.
    assert dh_eps(rho, sig, 0.0).value == pytest.approx(-math.log2(0.3),
                                                        abs=1e-9)


def test_dh_witness_is_feasible_and_consistent():
    rho = sample("density", 4, 2)
    sig = sample("density", 4, 3)
    res = dh_eps(rho, sig, 0.2)
    w = res.witness
    evals = np.linalg.eigvalsh(np.asarray(w.operator))
    assert evals[0] >= -1e-10 and evals[-1] <= 1 + 1e-10
    assert w.type1 == pytest.approx(0.8, abs=1e-9)  # Tr(L rho) = 1 - eps
    assert res.value == pytest.approx(-math.log2(w.type2), abs=1e-9)


def test_dh_weak_duality_brackets_the_value():
    rho = sample("density", 5, 4)
    sig = sample("density", 5, 5)
    res = dh_eps(rho, sig, 0.3)
    assert res.value <= res.dual_bound + 1e-7


def test_dh_matches_classical_oracle_small():
    p = [0.5, 0.3, 0.2]
    q = [0.2, 0.3, 0.5]
    rho, sig = diag_state(p), diag_state(q)
    for eps in (0.0, 0.1, 0.25):
        assert dh_eps(rho, sig, eps).value == pytest.approx(
            dh_classical_oracle(p, q, eps), abs=1e-8)


def test_dh_classical_oracle_hand_computed():
    # p = (0.75, 0.25), q = (0.25, 0.75), eps = 0.25: accept outcome 0 fully,
    # reaching exactly 1 - eps; type-II error = q_0 = 0.25.
    assert dh_classical_oracle([0.75, 0.25], [0.25, 0.75], 0.25) == \
        pytest.approx(2.0, abs=1e-12)


def test_dh_unbounded_on_orthogonal_supports():
    rho = diag_state([1.0, 0.0])
    sig = diag_state([0.0, 1.0])
    res = dh_eps(rho, sig, 0.1)
    assert res.unbounded


def test_dh_monotone_in_eps():
    rho = sample("density", 3, 6)
    sig = sample("density", 3, 7)
    values = [dh_eps(rho, sig, e).value for e in (0.05, 0.2, 0.5)]
    assert values[0] <= values[1] + 1e-9 <= values[2] + 2e-9


def test_rank1_oracle_agrees_for_pure_states():
    for seed in range(3):
        rho = pure_density(sample("pure", 2, seed))
        sig = sample("density", 2, seed + 10)
        for eps in (0.1, 0.3):
            assert dh_rank1_oracle(rho, sig, eps, seed=seed) == pytest.approx(
                dh_eps(rho, sig, eps).value, abs=1e-6)


def test_rank1_oracle_rejects_mixed_input():
    rho = diag_state([0.5, 0.5])
    with pytest.raises(ValueError):
        dh_rank1_oracle(rho, rho, 0.1)
