"""Decoding strategies on a multiple-access channel, compared exactly.

Two senders each hold one bit; the channel outputs their XOR.  The receiver
can decode the pair of messages either with two square-root measurements in
sequence (the first one disturbs the state the second one sees) or with a
chain of projective yes/no tests realized through a pointer qubit.

The projective chain pays 4(eps1 + eps2 + 2 delta) in the error bound, linear
in both per-message errors.  The two-stage square-root decoder pays
eps2 + 2 delta + 3 sqrt(eps1 + 2 delta) on its second stage: the first
stage's disturbance enters under a square root, which is far worse for small
eps1.  This demo evaluates both bounds on a grid and then runs all three
decoders exactly on the same inputs.
"""

import math

import numpy as np

from oneshot_qcap import simulate_mac_ea
from oneshot_qcap.channels import KrausChannel
from oneshot_qcap.linalg import DensityOp, SystemLayout


def xor_channel():
    kraus = []
    for a in range(2):
        for b in range(2):
            k = np.zeros((2, 4))
            k[(a + b) % 2, 2 * a + b] = 1.0
            kraus.append(k)
    return KrausChannel(kraus, SystemLayout([("A", 2), ("B", 2)]),
                        SystemLayout([("C", 2)]))


def correlated(label_in, label_res):
    mat = np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)
    return DensityOp(mat, SystemLayout([(label_in, 2), (label_res, 2)]))


def main():
    delta = 0.05
    print("== analytic error bounds ==")
    print(f"  {'eps1':>5} {'eps2':>5} {'sequential':>11} {'two-stage':>10}")
    for eps1 in (0.04, 0.08, 0.12):
        for eps2 in (0.0, 0.1, 0.2):
            seq = 4 * (eps1 + eps2 + 2 * delta)
            two = eps2 + 2 * delta + 3 * math.sqrt(eps1 + 2 * delta)
            print(f"  {eps1:>5} {eps2:>5} {seq:>11.4f} {two:>10.4f}")
    print("  The sequential bound wins across this whole grid: it depends"
          "\n  linearly on eps1 where the two-stage bound pays sqrt(eps1).\n")

    print("== exact simulations (XOR channel, R1 = R2 = 1) ==")
    ch = xor_channel()
    psi_a = correlated("A", "RA")
    psi_b = correlated("B", "RB")
    print(f"  {'strategy':<14} {'worst error':>12} {'bound':>8}")
    for strategy in ("sequential", "pgm_a_first", "pgm_b_first"):
        rep = simulate_mac_ea(ch, psi_a, psi_b, (1, 1), (0.08, 0.1), delta,
                              strategy=strategy)
        print(f"  {strategy:<14} {rep.worst_error:>12.6f}"
              f" {min(1.0, rep.analytic_bound):>8.4f}")
    print("\n  All decoders honor their bounds.  At one qubit per register"
          "\n  the guarantees cap at 1 and the exact errors need not follow"
          "\n  the same ordering; the comparison above is about the bounds,"
          "\n  which is where the sequential chain wins.")


if __name__ == "__main__":
    main()
