"""Converse and achievability rate expressions, corollaries, and the local
searches behind their min-over-sigma / max-over-psi optimizations.

Values are in bits.  Negative achievable rates are flagged infeasible rather
than clamped; the sigma minimization and psi maximization are best-effort
local searches whose full candidate traces are returned so callers can judge
convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import KrausChannel, apply_on
from .coding import _classical_blocks, _product_check  # shared validation
from .divergences import dh_eps, dmax
from .linalg import DensityOp, Ket, SystemLayout, partial_trace, tensor

__all__ = [
    "RateBound",
    "converse_value",
    "achievable_rate",
    "identity_channel_corollary",
    "corollary_relaxations",
    "optimize_input_state",
]

UNIFORM_TOL = 1e-9


@dataclass(frozen=True)
class RateBound:
    """A rate expression evaluated at a concrete input state.

    ``per_sender`` holds one value per message stream; ``value`` is the first
    of them (the single rate for one-sender scenarios).  ``ceiling`` carries
    the dimension ceilings of the unassisted converses, ``sum_rate`` the
    sum-rate expression where one exists.  ``optimizer_trace`` lists every
    (candidate description, value) pair examined by the sigma search.
    """

    scenario: str
    kind: str
    value: float
    per_sender: tuple[float, ...]
    sum_rate: float | None
    ceiling: float | None
    infeasible: bool
    evaluated_at: str
    optimizer_trace: tuple


def _dh_value(rho: DensityOp, alt_mat: np.ndarray, eps: float) -> float:
    res = dh_eps(rho, alt_mat, eps)
    return math.inf if res.unbounded else res.value


def _min_over_sigma(joint: DensityOp, res_labels: Sequence[str], eps: float,
                    candidates, optimize: bool, restarts: int, seed: int):
    """min over states sigma on the non-resource block of D_H(joint || sigma x res).

    The joint is permuted to [outputs..., resources...]; candidates always
    include the joint's own output marginal.  Local refinement parameterizes
    sigma = G^dag G / Tr(G^dag G) over complex G and runs a simplex descent.
    """
    out_labels = [l for l in joint.layout.labels if l not in set(res_labels)]
    joint = joint.permuted(out_labels + list(res_labels))
    res_marg = partial_trace(joint, list(res_labels)).permuted(list(res_labels))
    d_out = int(np.prod([joint.layout.dim_of(l) for l in out_labels]))

    def value_of(sig: np.ndarray) -> float:
        return _dh_value(joint, np.kron(sig, res_marg.matrix), eps)

    trace = []
    out_marg = partial_trace(joint, out_labels).permuted(out_labels)
    cand_mats = [("output marginal", out_marg.matrix),
                 ("maximally mixed", np.eye(d_out) / d_out)]
    for i, c in enumerate(candidates or []):
        mat = c.matrix if isinstance(c, DensityOp) else np.asarray(c, dtype=complex)
        cand_mats.append((f"candidate {i}", mat))
    best = math.inf
    best_desc = None
    for desc, mat in cand_mats:
        val = value_of(mat)
        trace.append((desc, val))
        if val < best:
            best, best_desc = val, desc

    if optimize:
        from scipy.optimize import minimize

        rng = np.random.default_rng(seed)

        def unpack(x: np.ndarray) -> np.ndarray:
            g = (x[: d_out * d_out] + 1j * x[d_out * d_out:]).reshape(d_out, d_out)
            sig = g.conj().T @ g
            tr = float(np.real(np.trace(sig)))
            if tr < 1e-14:
                sig = np.eye(d_out)
                tr = d_out
            return sig / tr

        def objective(x: np.ndarray) -> float:
            v = value_of(unpack(x))
            return v if math.isfinite(v) else 1e6

        starts = []
        for desc, mat in cand_mats:
            w, v = np.linalg.eigh(mat)
            g = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
            starts.append(np.concatenate([np.real(g).ravel(), np.imag(g).ravel()]))
        for _ in range(restarts):
            starts.append(rng.standard_normal(2 * d_out * d_out))
        for k, x0 in enumerate(starts):
            res = minimize(objective, x0, method="Nelder-Mead",
                           options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-12})
            trace.append((f"descent {k}", float(res.fun)))
            if res.fun < best:
                best, best_desc = float(res.fun), f"descent {k}"
    return best, best_desc, trace


def _make_bound(scenario, kind, per_sender, *, sum_rate=None, ceiling=None,
                evaluated_at="", trace=()) -> RateBound:
    per_sender = tuple(float(v) for v in per_sender)
    infeasible = kind == "achievable" and any(v < 0 for v in per_sender)
    return RateBound(
        scenario=scenario,
        kind=kind,
        value=per_sender[0],
        per_sender=per_sender,
        sum_rate=None if sum_rate is None else float(sum_rate),
        ceiling=None if ceiling is None else float(ceiling),
        infeasible=infeasible,
        evaluated_at=evaluated_at,
        optimizer_trace=tuple(trace),
    )


def _check_uniform(state: DensityOp, label: str):
    d = state.layout.dim_of(label)
    marg = partial_trace(state, [label])
    if float(np.max(np.abs(marg.matrix - np.eye(d) / d))) > UNIFORM_TOL:
        raise ValueError(f"converse requires a uniform classical register {label!r}")


def _mac_joints(ch: KrausChannel, psi_a: DensityOp, psi_b: DensityOp):
    from .coding import _split_sender_state

    a_label, b_label = ch.in_layout.labels
    res_a, side_a = _split_sender_state(psi_a, a_label)
    res_b, side_b = _split_sender_state(psi_b, b_label)
    omega = apply_on(ch, tensor(psi_a, psi_b), [a_label, b_label])
    return omega, res_a, res_b, [s for s in (side_a, side_b) if s is not None]


def converse_value(scenario: str, ch: KrausChannel, psi: DensityOp,
                   eps, sigma_candidates=None, optimize: bool = False, *,
                   psi_b: DensityOp | None = None, tau: DensityOp | None = None,
                   restarts: int = 4, seed: int = 0) -> RateBound:
    """Upper bound on the rate(s) of any code, evaluated at one input state.

    The minimization over the receiver-side state sigma is carried out over
    the supplied candidates (the channel-output marginal is always included)
    and, with ``optimize``, refined by local descent.  Unassisted scenarios
    additionally report the dimension ceiling log|B| / (1 - eps) and require
    uniform classical registers, matching the converse statements.
    """
    if scenario == "p2p_ea":
        (a_label,) = ch.in_layout.labels
        res = [l for l in psi.layout.labels if l != a_label][0]
        joint = apply_on(ch, psi, [a_label])
        val, desc, trace = _min_over_sigma(joint, [res], eps, sigma_candidates,
                                           optimize, restarts, seed)
        return _make_bound(scenario, "converse", [val],
                           evaluated_at=f"psi on {psi.layout.labels}, sigma = {desc}",
                           trace=trace)

    if scenario == "gp_ea":
        a_label, s_label = ch.in_layout.labels
        res = [l for l in psi.layout.labels if l not in (a_label, s_label)][0]
        _product_check(psi, [[s_label], [res]])
        if tau is not None:
            s_marg = partial_trace(psi, [s_label])
            if float(np.max(np.abs(s_marg.matrix - tau.matrix))) > 1e-9:
                raise ValueError("state's S marginal does not match the channel state")
        joint = apply_on(ch, psi, [a_label, s_label])
        val, desc, trace = _min_over_sigma(joint, [res], eps, sigma_candidates,
                                           optimize, restarts, seed)
        return _make_bound(scenario, "converse", [val],
                           evaluated_at=f"psi on {psi.layout.labels}, sigma = {desc}",
                           trace=trace)

    if scenario == "broadcast_ea":
        (a_label,) = ch.in_layout.labels
        out_b, out_c = ch.out_layout.labels
        res_b, res_c = [l for l in psi.layout.labels if l != a_label]
        _product_check(psi, [[res_b], [res_c]])
        eps1, eps2 = eps
        full = apply_on(ch, psi, [a_label])
        v1, d1, t1 = _min_over_sigma(partial_trace(full, [out_b, res_b]),
                                     [res_b], eps1, sigma_candidates,
                                     optimize, restarts, seed)
        v2, d2, t2 = _min_over_sigma(partial_trace(full, [out_c, res_c]),
                                     [res_c], eps2, sigma_candidates,
                                     optimize, restarts, seed)
        return _make_bound(scenario, "converse", [v1, v2],
                           evaluated_at=f"sigma_B = {d1}, tau_C = {d2}",
                           trace=tuple(t1) + tuple(t2))

    if scenario == "mac_ea":
        # Conditioned variant: alternatives fixed by the state's own marginals.
        eps1, eps2 = eps
        omega, res_a, res_b, sides = _mac_joints(ch, psi, psi_b)
        outs = list(ch.out_layout.labels)
        base = outs + sides
        vals = []
        for res, e in ((res_a, eps1), (res_b, eps2)):
            joint = partial_trace(omega, base + [res]).permuted(base + [res])
            alt = tensor(partial_trace(omega, base).permuted(base),
                         partial_trace(omega, [res]))
            vals.append(_dh_value(joint, alt.permuted(list(joint.layout.labels)).matrix, e))
        return _make_bound(scenario, "converse", vals,
                           evaluated_at="alternatives = state marginals",
                           trace=(("rho_{out,sides} x rho_res", tuple(vals)),))

    if scenario == "mac_ea_hdw":
        # Sum-rate variant for pure two-register sender states.
        eps1, eps2 = eps
        for st in (psi, psi_b):
            purity = float(np.real(np.trace(st.matrix @ st.matrix)))
            if purity < 1 - 1e-9:
                raise ValueError("this converse variant needs pure sender states")
        omega, res_a, res_b, _ = _mac_joints(ch, psi, psi_b)
        outs = list(ch.out_layout.labels)
        rho = omega.permuted(outs + [res_a, res_b])
        rho_c = partial_trace(rho, outs).permuted(outs)
        rho_a = partial_trace(rho, [res_a])
        rho_b = partial_trace(rho, [res_b])
        rho_cb = partial_trace(rho, outs + [res_b]).permuted(outs + [res_b])
        rho_ca = partial_trace(rho, outs + [res_a]).permuted(outs + [res_a])
        v1 = _dh_value(rho.permuted(outs + [res_b, res_a]),
                       np.kron(rho_cb.matrix, rho_a.matrix), eps1)
        v2 = _dh_value(rho, np.kron(rho_ca.matrix, rho_b.matrix), eps2)
        vsum = _dh_value(rho, np.kron(np.kron(rho_c.matrix, rho_a.matrix),
                                      rho_b.matrix), eps1 + eps2)
        return _make_bound(scenario, "converse", [v1, v2], sum_rate=vsum,
                           evaluated_at="alternatives = state marginals",
                           trace=(("per-sender and sum-rate", (v1, v2, vsum)),))

    if scenario in ("p2p_ua", "gp_ua"):
        in_labels = list(ch.in_layout.labels)
        u_label = [l for l in psi.layout.labels if l not in in_labels][0]
        _classical_blocks(psi, u_label)
        _check_uniform(psi, u_label)
        if scenario == "gp_ua":
            s_label = in_labels[1]
            _product_check(psi, [[s_label], [u_label]])
        joint = apply_on(ch, psi, in_labels)
        val, desc, trace = _min_over_sigma(joint, [u_label], eps,
                                           sigma_candidates, optimize,
                                           restarts, seed)
        ceiling = math.log2(ch.out_dim) / (1 - eps)
        return _make_bound(scenario, "converse", [val], ceiling=ceiling,
                           evaluated_at=f"sigma = {desc}", trace=trace)

    if scenario == "broadcast_ua":
        eps1, eps2 = eps
        (a_label,) = ch.in_layout.labels
        out_b, out_c = ch.out_layout.labels
        u_label, v_label = [l for l in psi.layout.labels if l != a_label]
        for l in (u_label, v_label):
            _classical_blocks(psi, l)
            _check_uniform(psi, l)
        _product_check(psi, [[u_label], [v_label]])
        full = apply_on(ch, psi, [a_label])
        v1, d1, t1 = _min_over_sigma(partial_trace(full, [out_b, u_label]),
                                     [u_label], eps1, sigma_candidates,
                                     optimize, restarts, seed)
        v2, d2, t2 = _min_over_sigma(partial_trace(full, [out_c, v_label]),
                                     [v_label], eps2, sigma_candidates,
                                     optimize, restarts, seed)
        ceiling = math.log2(ch.out_dim) / (1 - eps1 - eps2)
        return _make_bound(scenario, "converse", [v1, v2], ceiling=ceiling,
                           evaluated_at=f"sigma_B = {d1}, tau_C = {d2}",
                           trace=tuple(t1) + tuple(t2))

    if scenario == "mac_ua":
        eps1, eps2 = eps
        a_label, b_label = ch.in_layout.labels
        u_label = [l for l in psi.layout.labels if l != a_label][0]
        v_label = [l for l in psi_b.layout.labels if l != b_label][0]
        for st, l in ((psi, u_label), (psi_b, v_label)):
            _classical_blocks(st, l)
            _check_uniform(st, l)
        omega = apply_on(ch, tensor(psi, psi_b), [a_label, b_label])
        outs = list(ch.out_layout.labels)
        v1, d1, t1 = _min_over_sigma(partial_trace(omega, outs + [u_label]),
                                     [u_label], eps1, sigma_candidates,
                                     optimize, restarts, seed)
        v2, d2, t2 = _min_over_sigma(partial_trace(omega, outs + [v_label]),
                                     [v_label], eps2, sigma_candidates,
                                     optimize, restarts, seed)
        ceiling = math.log2(ch.out_dim) / (1 - eps1 - eps2)
        return _make_bound(scenario, "converse", [v1, v2], ceiling=ceiling,
                           evaluated_at=f"sigma = {d1}, tau = {d2}",
                           trace=tuple(t1) + tuple(t2))

    raise ValueError(f"unknown scenario {scenario!r}")


def achievable_rate(scenario: str, ch: KrausChannel, psi: DensityOp, eps,
                    delta: float, *, psi_b: DensityOp | None = None,
                    tau: DensityOp | None = None,
                    strategy: str = "sequential") -> RateBound:
    """The rate guaranteed achievable at this input state: D_H minus the
    penalty of the matching coding theorem.  Negative values mean the
    delta-penalty exceeds the divergence at these parameters (infeasible)."""

    def pen_quad(e: float) -> float:
        # log(4 eps / delta^2) penalty; at eps = 0 the tighter log(1/delta)
        # variant applies (the c -> 1 fallback of the proofs).
        return math.log2(4 * e / delta ** 2) if e > 0 else math.log2(1 / delta)

    if scenario == "p2p_ea":
        (a_label,) = ch.in_layout.labels
        res = [l for l in psi.layout.labels if l != a_label][0]
        joint = apply_on(ch, psi, [a_label])
        alt = tensor(apply_on(ch, partial_trace(psi, [a_label]), [a_label]),
                     partial_trace(psi, [res]))
        joint = joint.permuted(list(alt.layout.labels))
        val = _dh_value(joint, alt.matrix, eps + delta) - math.log2(1 / delta)
        return _make_bound(scenario, "achievable", [val],
                           evaluated_at="D_H at eps+delta minus log2(1/delta)")

    if scenario == "gp_ea":
        a_label, s_label = ch.in_layout.labels
        res = [l for l in psi.layout.labels if l not in (a_label, s_label)][0]
        _product_check(psi, [[s_label], [res]])
        joint = apply_on(ch, psi, [a_label, s_label])
        alt = tensor(apply_on(ch, partial_trace(psi, [a_label, s_label]),
                              [a_label, s_label]),
                     partial_trace(psi, [res]))
        joint = joint.permuted(list(alt.layout.labels))
        val = _dh_value(joint, alt.matrix, eps) - pen_quad(eps)
        return _make_bound(scenario, "achievable", [val],
                           evaluated_at="D_H at eps minus log2(4 eps/delta^2)")

    if scenario in ("broadcast_ea", "broadcast_ua"):
        eps1, eps2 = eps
        (a_label,) = ch.in_layout.labels
        out_b, out_c = ch.out_layout.labels
        res_b, res_c = [l for l in psi.layout.labels if l != a_label]
        _product_check(psi, [[res_b], [res_c]])
        full = apply_on(ch, psi, [a_label])
        out_marg = apply_on(ch, partial_trace(psi, [a_label]), [a_label])
        vals = []
        for out, res, e in ((out_b, res_b, eps1), (out_c, res_c, eps2)):
            joint = partial_trace(full, [out, res]).permuted([out, res])
            alt = tensor(partial_trace(out_marg, [out]),
                         partial_trace(psi, [res]))
            vals.append(_dh_value(joint, alt.matrix, e) - pen_quad(e))
        return _make_bound(scenario, "achievable", vals,
                           evaluated_at="per-receiver D_H minus log2(4 eps/delta^2)")

    if scenario in ("mac_ea", "mac_ua"):
        eps1, eps2 = eps
        omega, res_a, res_b, sides = _mac_joints(ch, psi, psi_b)
        outs = list(ch.out_layout.labels)
        base = outs + sides
        pen = (math.log2(1 / delta) if strategy == "sequential"
               else None)
        vals = []
        for res, e in ((res_a, eps1), (res_b, eps2)):
            joint = partial_trace(omega, base + [res]).permuted(base + [res])
            alt = tensor(partial_trace(omega, base).permuted(base),
                         partial_trace(omega, [res]))
            v = _dh_value(joint, alt.permuted(list(joint.layout.labels)).matrix, e)
            vals.append(v - (pen if pen is not None else pen_quad(e)))
        return _make_bound(scenario, "achievable", vals,
                           evaluated_at=f"strategy {strategy}")

    if scenario in ("p2p_ua", "gp_ua"):
        in_labels = list(ch.in_layout.labels)
        u_label = [l for l in psi.layout.labels if l not in in_labels][0]
        _classical_blocks(psi, u_label)
        joint = apply_on(ch, psi, in_labels)
        alt = tensor(apply_on(ch, partial_trace(psi, in_labels), in_labels),
                     partial_trace(psi, [u_label]))
        joint = joint.permuted(list(alt.layout.labels))
        val = _dh_value(joint, alt.matrix, eps) - pen_quad(eps)
        return _make_bound(scenario, "achievable", [val],
                           evaluated_at="D_H at eps minus log2(4 eps/delta^2)")

    raise ValueError(f"unknown scenario {scenario!r}")


def identity_channel_corollary(dimA: int, eps: float):
    """Rate ceiling for entanglement-assisted coding over a noiseless channel.

    Returns (log2(|A|^2 / (1 - eps)), witness) where the witness is the pair
    of Schmidt-coefficient vectors (lambda, a) saturating the argument:
    lambda_i = 1/sqrt|A| for the shared state, a_i = sqrt((1-eps)/|A|) for
    the sub-normalized test vector.  The witness identities are verified
    numerically before returning.
    """
    if dimA < 2:
        raise ValueError("dimA must be at least 2")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    ceiling = math.log2(dimA ** 2 / (1 - eps))
    lam = np.full(dimA, 1.0 / math.sqrt(dimA))
    avec = np.full(dimA, math.sqrt((1 - eps) / dimA))
    if abs(float(np.sum(lam ** 2)) - 1.0) > 1e-12:
        raise AssertionError("witness normalization failed")
    if float(np.sum(avec ** 2)) > 1.0 + 1e-12:
        raise AssertionError("witness sub-normalization failed")
    if abs(float(np.sum(avec * lam)) ** 2 - (1 - eps)) > 1e-12:
        raise AssertionError("witness overlap identity failed")
    # <Pi| (I/|A| x psi_B') |Pi> with |Pi> = sum_i a_i |ii> and psi_B' = I/|A|.
    pi_vec = np.zeros(dimA * dimA)
    for i in range(dimA):
        pi_vec[i * dimA + i] = avec[i]
    mixed = np.eye(dimA * dimA) / dimA ** 2
    quad = float(pi_vec @ mixed @ pi_vec)
    if abs(quad - (1 - eps) / dimA ** 2) > 1e-10:
        raise AssertionError("witness quadratic-form identity failed")
    return ceiling, (lam, avec)


def corollary_relaxations(scenario: str, ch: KrausChannel, psi: DensityOp,
                          eps, sigma_candidates=None, optimize: bool = False,
                          *, restarts: int = 4, seed: int = 0) -> RateBound:
    """Converse variants without product constraints, paid by a D_max penalty.

    For the channel-with-state scenario the penalty is
    dmax(psi_SB' || psi_S x psi_B'); for broadcast it is
    dmax(psi_B'C' || psi_B' x psi_C'), charged to both receivers.  When the
    relevant marginal is product the penalty vanishes and the value agrees
    with :func:`converse_value`.
    """
    if scenario == "gp":
        a_label, s_label = ch.in_layout.labels
        res = [l for l in psi.layout.labels if l not in (a_label, s_label)][0]
        marg = partial_trace(psi, [s_label, res]).permuted([s_label, res])
        prod = tensor(partial_trace(psi, [s_label]), partial_trace(psi, [res]))
        penalty = max(dmax(marg, prod.matrix), 0.0)
        joint = apply_on(ch, psi, [a_label, s_label])
        val, desc, trace = _min_over_sigma(joint, [res], eps, sigma_candidates,
                                           optimize, restarts, seed)
        return _make_bound("gp_relaxed", "converse", [val - penalty],
                           evaluated_at=f"sigma = {desc}, dmax penalty = {penalty:.6f}",
                           trace=trace)

    if scenario == "broadcast":
        eps1, eps2 = eps
        (a_label,) = ch.in_layout.labels
        out_b, out_c = ch.out_layout.labels
        res_b, res_c = [l for l in psi.layout.labels if l != a_label]
        marg = partial_trace(psi, [res_b, res_c]).permuted([res_b, res_c])
        prod = tensor(partial_trace(psi, [res_b]), partial_trace(psi, [res_c]))
        penalty = max(dmax(marg, prod.matrix), 0.0)
        full = apply_on(ch, psi, [a_label])
        v1, d1, t1 = _min_over_sigma(partial_trace(full, [out_b, res_b]),
                                     [res_b], eps1, sigma_candidates,
                                     optimize, restarts, seed)
        v2, d2, t2 = _min_over_sigma(partial_trace(full, [out_c, res_c]),
                                     [res_c], eps2, sigma_candidates,
                                     optimize, restarts, seed)
        return _make_bound("broadcast_relaxed", "converse",
                           [v1 - penalty, v2 - penalty],
                           evaluated_at=f"dmax penalty = {penalty:.6f}",
                           trace=tuple(t1) + tuple(t2))

    raise ValueError(f"unknown scenario {scenario!r}")


def optimize_input_state(objective: Callable[[Ket], float], dims,
                         restarts: int = 4, seed: int = 0):
    """Best-effort local maximization of an objective over pure input states.

    Derivative-free simplex descent on real-imaginary coordinates of the
    amplitude vector (normalized inside the objective), with seeded random
    restarts.  Returns (best Ket, best value, trace of per-restart values);
    global optimality is not claimed.
    """
    from scipy.optimize import minimize

    layout = dims if isinstance(dims, SystemLayout) else SystemLayout(
        dims if not np.isscalar(dims) else [("A", int(dims))])
    d = layout.dim
    rng = np.random.default_rng(seed)

    def unpack(x: np.ndarray) -> Ket | None:
        amp = x[:d] + 1j * x[d:]
        nrm = float(np.linalg.norm(amp))
        if nrm < 1e-12:
            return None
        return Ket(amp / nrm, layout)

    def neg_objective(x: np.ndarray) -> float:
        ket = unpack(x)
        if ket is None:
            return 1e6
        return -float(objective(ket))

    best_val = -math.inf
    best_ket = None
    trace = []
    for k in range(max(restarts, 1)):
        x0 = rng.standard_normal(2 * d)
        res = minimize(neg_objective, x0, method="Nelder-Mead",
                       options={"maxiter": 4000, "xatol": 1e-10, "fatol": 1e-12})
        val = -float(res.fun)
        trace.append((k, val))
        if val > best_val:
            best_val = val
            best_ket = unpack(res.x)
    return best_ket, best_val, trace
