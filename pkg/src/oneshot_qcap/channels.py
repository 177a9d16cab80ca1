"""CPTP maps as Kraus families, a small channel zoo, and Neumark dilation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    DensityOp,
    HermOp,
    Ket,
    LayoutError,
    SystemLayout,
    _as_layout,
    _permute_matrix,
    herm_eig,
    max_entangled_ket,
)

__all__ = [
    "KrausChannel",
    "NeumarkDilation",
    "ChannelReport",
    "apply_channel",
    "apply_on",
    "choi",
    "validate",
    "identity_channel",
    "depolarizing",
    "dephasing",
    "amplitude_damping",
    "erasure",
    "cq_channel",
    "builtin",
    "channel_from_choi",
    "neumark_dilate",
    "binary_test_projector",
]

COMPLETENESS_TOL = 1e-10


@dataclass(frozen=True)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators."""

    kraus: tuple[np.ndarray, ...]
    in_layout: SystemLayout
    out_layout: SystemLayout

    def __init__(self, kraus, in_layout, out_layout):
        in_layout = _as_layout(in_layout)
        out_layout = _as_layout(out_layout)
        ops = tuple(np.asarray(k, dtype=complex) for k in kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = (out_layout.dim, in_layout.dim)
        for k in ops:
            if k.shape != shape:
                raise LayoutError(f"Kraus shape {k.shape} != {shape}")
        total = sum(k.conj().T @ k for k in ops)
        dev = float(np.max(np.abs(total - np.eye(in_layout.dim))))
        if dev > COMPLETENESS_TOL:
            raise ValueError(
                f"Kraus operators are not trace preserving (residual {dev:.3e})")
        frozen = []
        for k in ops:
            k = k.copy()
            k.setflags(write=False)
            frozen.append(k)
        object.__setattr__(self, "kraus", tuple(frozen))
        object.__setattr__(self, "in_layout", in_layout)
        object.__setattr__(self, "out_layout", out_layout)

    @property
    def in_dim(self) -> int:
        return self.in_layout.dim

    @property
    def out_dim(self) -> int:
        return self.out_layout.dim

    def relabeled(self, in_labels: Sequence[str] | None = None,
                  out_labels: Sequence[str] | None = None) -> "KrausChannel":
        """Same map with renamed registers (dims unchanged)."""
        inl = self.in_layout
        outl = self.out_layout
        if in_labels is not None:
            inl = SystemLayout(list(zip(in_labels, inl.dims)))
        if out_labels is not None:
            outl = SystemLayout(list(zip(out_labels, outl.dims)))
        return KrausChannel(self.kraus, inl, outl)


def apply_channel(ch: KrausChannel, rho: DensityOp) -> DensityOp:
    """Apply a channel whose input layout matches the state's layout."""
    if rho.layout.labels != ch.in_layout.labels:
        if sorted(rho.layout.labels) == sorted(ch.in_layout.labels):
            rho = rho.permuted(list(ch.in_layout.labels))
        else:
            raise LayoutError(
                f"state layout {rho.layout.labels} != channel input "
                f"{ch.in_layout.labels}")
    if rho.layout.dims != ch.in_layout.dims:
        raise LayoutError("state dims do not match channel input dims")
    out = sum(k @ rho.matrix @ k.conj().T for k in ch.kraus)
    return DensityOp(out, ch.out_layout, normalized=rho.normalized)


def apply_on(ch: KrausChannel, rho: DensityOp, targets: Iterable[str]) -> DensityOp:
    """Apply a channel to a subset of registers, identity on the rest.

    ``targets`` names the registers fed to the channel, in the channel's own
    input order.  Output layout is the channel's output registers followed by
    the untouched spectators in their original order.
    """
    targets = list(targets)
    if sorted(targets) != sorted(ch.in_layout.labels):
        # Allow positional targeting: map channel inputs onto the named
        # registers in the given order.
        if len(targets) != len(ch.in_layout.labels):
            raise LayoutError("targets must match the channel's input registers")
        ch = ch.relabeled(in_labels=targets)
    for lbl in targets:
        if rho.layout.dim_of(lbl) != ch.in_layout.dim_of(lbl):
            raise LayoutError(f"register {lbl!r} dim mismatch with channel input")
    spectators = [(l, d) for l, d in rho.layout.registers
                  if l not in set(ch.in_layout.labels)]
    order = list(ch.in_layout.labels) + [l for l, _ in spectators]
    rho_p = rho.permuted(order)
    d_spec = int(np.prod([d for _, d in spectators], dtype=np.int64)) if spectators else 1
    eye = np.eye(d_spec)
    out = sum(np.kron(k, eye) @ rho_p.matrix @ np.kron(k, eye).conj().T
              for k in ch.kraus)
    out_layout = ch.out_layout.concat(SystemLayout(spectators))
    return DensityOp(out, out_layout, normalized=rho.normalized)


def choi(ch: KrausChannel) -> DensityOp:
    """Normalized Choi state (id x N)(|Phi><Phi|) on registers (in, out)."""
    d = ch.in_dim
    phi = max_entangled_ket(d, "choi_in", "choi_mid")
    mat = np.zeros((d * ch.out_dim,) * 2, dtype=complex)
    rho = np.outer(phi.amplitudes, phi.amplitudes.conj())
    for k in ch.kraus:
        big = np.kron(np.eye(d), k)
        mat += big @ rho @ big.conj().T
    layout = SystemLayout([("choi_in", d), ("choi_out", ch.out_dim)])
    return DensityOp(mat, layout)


@dataclass(frozen=True)
class ChannelReport:
    """Diagnostics from :func:`validate`."""

    is_cptp: bool
    completeness_residual: float
    choi_min_eigenvalue: float
    violations: tuple[str, ...]


def validate(kraus: Sequence[np.ndarray], in_dim: int, out_dim: int) -> ChannelReport:
    """Check Kraus data for complete positivity and trace preservation."""
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    violations = []
    completeness = float("nan")
    choi_min = float("nan")
    if not ops:
        violations.append("no Kraus operators")
    else:
        bad_shape = [k.shape for k in ops if k.shape != (out_dim, in_dim)]
        if bad_shape:
            violations.append(f"Kraus shapes {bad_shape} != ({out_dim}, {in_dim})")
        else:
            total = sum(k.conj().T @ k for k in ops)
            completeness = float(np.max(np.abs(total - np.eye(in_dim))))
            if completeness > COMPLETENESS_TOL:
                violations.append(
                    f"trace preservation violated (residual {completeness:.3e})")
            cmat = np.zeros((in_dim * out_dim,) * 2, dtype=complex)
            for k in ops:
                vec = k.reshape(-1, order="F")  # column-stacked |K>>
                cmat += np.outer(vec, vec.conj())
            choi_min = float(np.linalg.eigvalsh((cmat + cmat.conj().T) / 2)[0])
            if choi_min < -COMPLETENESS_TOL:
                violations.append(f"Choi operator not PSD (min eig {choi_min:.3e})")
    return ChannelReport(
        is_cptp=not violations,
        completeness_residual=completeness,
        choi_min_eigenvalue=choi_min,
        violations=tuple(violations),
    )


def channel_from_choi(choi_mat: np.ndarray, in_layout, out_layout) -> KrausChannel:
    """Kraus operators from an (unnormalized, trace = d_in) Choi matrix."""
    in_layout = _as_layout(in_layout)
    out_layout = _as_layout(out_layout)
    d_in, d_out = in_layout.dim, out_layout.dim
    w, v = np.linalg.eigh((choi_mat + choi_mat.conj().T) / 2)
    kraus = []
    for i in range(len(w)):
        if w[i] > 1e-12:
            vec = v[:, i] * np.sqrt(w[i])
            kraus.append(vec.reshape(d_in, d_out).T)  # Choi index order (in, out)
    return KrausChannel(kraus, in_layout, out_layout)


def identity_channel(dim: int, in_label: str = "A", out_label: str = "B") -> KrausChannel:
    return KrausChannel([np.eye(dim)], [(in_label, dim)], [(out_label, dim)])


def depolarizing(p: float, dim: int = 2, in_label: str = "A",
                 out_label: str = "B") -> KrausChannel:
    """rho -> (1-p) rho + p I/d."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing parameter must be in [0, 1]")
    d = dim
    # Choi of the map, unnormalized (trace d).
    phi = np.zeros((d * d,) * 2, dtype=complex)
    for i in range(d):
        for j in range(d):
            phi[i * d + i, j * d + j] = 1.0
    cmat = (1 - p) * phi + p * np.eye(d * d) / d
    return channel_from_choi(cmat, [(in_label, d)], [(out_label, d)])


def dephasing(p: float, in_label: str = "A", out_label: str = "B") -> KrausChannel:
    """Qubit phase flip with Kraus {sqrt(1-p) I, sqrt(p) Z}."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("dephasing parameter must be in [0, 1]")
    z = np.diag([1.0, -1.0])
    kraus = [np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * z]
    kraus = [k for k in kraus if np.max(np.abs(k)) > 0]
    return KrausChannel(kraus, [(in_label, 2)], [(out_label, 2)])


def amplitude_damping(gamma: float, in_label: str = "A",
                      out_label: str = "B") -> KrausChannel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("damping parameter must be in [0, 1]")
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
    return KrausChannel([k0, k1], [(in_label, 2)], [(out_label, 2)])


def erasure(p: float, dim: int = 2, in_label: str = "A",
            out_label: str = "B") -> KrausChannel:
    """With probability p replace the input by an orthogonal erasure flag."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("erasure parameter must be in [0, 1]")
    d = dim
    kraus = []
    keep = np.zeros((d + 1, d))
    keep[:d, :] = np.eye(d)
    if p < 1.0:
        kraus.append(np.sqrt(1 - p) * keep)
    if p > 0.0:
        for i in range(d):
            k = np.zeros((d + 1, d))
            k[d, i] = np.sqrt(p)
            kraus.append(k)
    return KrausChannel(kraus, [(in_label, d)], [(out_label, d + 1)])


def cq_channel(outputs: Sequence[DensityOp], in_label: str = "A",
               out_label: str = "B") -> KrausChannel:
    """Measure the input in the computational basis, emit the mapped state.

    ``outputs[i]`` is the state emitted on basis input |i>.
    """
    if not outputs:
        raise ValueError("cq channel needs at least one output state")
    d_in = len(outputs)
    d_out = outputs[0].layout.dim
    kraus = []
    for i, out in enumerate(outputs):
        if out.layout.dim != d_out:
            raise LayoutError("all cq output states must share one dimension")
        w, v = herm_eig(HermOp(out.matrix, out.layout))
        bra = np.zeros((1, d_in))
        bra[0, i] = 1.0
        for j in range(len(w)):
            if w[j] > 1e-14:
                kraus.append(np.sqrt(w[j]) * np.outer(v[:, j], bra))
    return KrausChannel(kraus, [(in_label, d_in)], [(out_label, d_out)])


def builtin(name: str, dims: int = 2, *, p: float | None = None,
            gamma: float | None = None,
            outputs: Sequence[DensityOp] | None = None,
            in_label: str = "A", out_label: str = "B") -> KrausChannel:
    """Channel zoo dispatch by name."""
    if name == "identity":
        return identity_channel(dims, in_label, out_label)
    if name == "depolarizing":
        return depolarizing(0.0 if p is None else p, dims, in_label, out_label)
    if name == "dephasing":
        return dephasing(0.0 if p is None else p, in_label, out_label)
    if name == "amplitude_damping":
        return amplitude_damping(0.0 if gamma is None else gamma, in_label, out_label)
    if name == "erasure":
        return erasure(0.0 if p is None else p, dims, in_label, out_label)
    if name == "cq":
        if outputs is None:
            raise ValueError("cq channel needs its output states")
        return cq_channel(outputs, in_label, out_label)
    raise ValueError(f"unknown builtin channel {name!r}")


@dataclass(frozen=True)
class NeumarkDilation:
    """Unitary realization of a POVM on system (x) pointer."""

    unitary: np.ndarray
    system_dim: int
    pointer_dim: int

    def outcome_projector(self, i: int) -> np.ndarray:
        """U^dag (I (x) |i><i|) U, a projector on system (x) pointer."""
        sel = np.zeros((self.pointer_dim, self.pointer_dim))
        sel[i, i] = 1.0
        big = np.kron(np.eye(self.system_dim), sel)
        return self.unitary.conj().T @ big @ self.unitary

    def outcome_probabilities(self, rho: np.ndarray) -> np.ndarray:
        """Pointer statistics on input rho (x) |0><0|."""
        d, k = self.system_dim, self.pointer_dim
        init = np.zeros((d * k,) * 2, dtype=complex)
        init.reshape(d, k, d, k)[:, 0, :, 0] = rho
        evolved = self.unitary @ init @ self.unitary.conj().T
        probs = np.einsum("ipiq->pq", evolved.reshape(d, k, d, k)).diagonal()
        return np.real(probs)


def neumark_dilate(povm: Sequence[HermOp | np.ndarray]) -> NeumarkDilation:
    """Dilate a POVM to a projective measurement on system (x) pointer.

    The isometry stacking the square roots of the POVM elements is completed
    to a unitary; pointer outcome statistics on input rho (x) |0><0| then
    reproduce Tr(M_i rho) exactly.
    """
    mats = [m.matrix if isinstance(m, HermOp) else np.asarray(m, dtype=complex)
            for m in povm]
    if not mats:
        raise ValueError("empty POVM")
    d = mats[0].shape[0]
    total = np.zeros((d, d), dtype=complex)
    for m in mats:
        if m.shape != (d, d):
            raise ValueError("POVM elements must share one dimension")
        if float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0]) < -COMPLETENESS_TOL:
            raise ValueError("POVM element is not PSD")
        total += m
    if float(np.max(np.abs(total - np.eye(d)))) > 1e-9:
        raise ValueError("POVM elements do not sum to the identity")
    k = len(mats)
    # Isometry V: |s>|0> -> sum_i sqrt(M_i)|s>|i>, written in the |s>|p> basis.
    v_iso = np.zeros((d * k, d), dtype=complex)
    for i, m in enumerate(mats):
        w, vecs = np.linalg.eigh((m + m.conj().T) / 2)
        root = (vecs * np.sqrt(np.clip(w, 0.0, None))) @ vecs.conj().T
        v_iso.reshape(d, k, d)[:, i, :] = root
    unitary = _complete_to_unitary(v_iso, pointer_dim=k, system_dim=d)
    return NeumarkDilation(unitary=unitary, system_dim=d, pointer_dim=k)


def _complete_to_unitary(v_iso: np.ndarray, pointer_dim: int, system_dim: int) -> np.ndarray:
    """Unitary whose pointer-|0> column block equals the given isometry."""
    n = system_dim * pointer_dim
    cols = np.zeros((n, n), dtype=complex)
    # Column (s, p=0) carries the isometry; remaining columns get completed.
    zero_cols = [s * pointer_dim for s in range(system_dim)]
    cols[:, zero_cols] = v_iso
    other = [c for c in range(n) if c not in zero_cols]
    q, _ = np.linalg.qr(np.concatenate([v_iso, np.eye(n)], axis=1))
    fill = q[:, system_dim:n]
    cols[:, other] = fill[:, : len(other)]
    u = cols
    if float(np.max(np.abs(u.conj().T @ u - np.eye(n)))) > 1e-9:
        raise RuntimeError("unitary completion failed")
    return u


def binary_test_projector(test: HermOp | np.ndarray) -> np.ndarray:
    """Neumark projector on system (x) qubit for the binary POVM {T, I-T}.

    Tr(P (rho (x) |0><0|)) = Tr(T rho), and P is idempotent.
    """
    t = test.matrix if isinstance(test, HermOp) else np.asarray(test, dtype=complex)
    d = t.shape[0]
    w, v = np.linalg.eigh((t + t.conj().T) / 2)
    w = np.clip(w, 0.0, 1.0)
    root = (v * np.sqrt(w * (1.0 - w))) @ v.conj().T
    comp = (v * (1.0 - w)) @ v.conj().T
    tt = (v * w) @ v.conj().T
    proj = np.zeros((2 * d, 2 * d), dtype=complex)
    view = proj.reshape(d, 2, d, 2)
    view[:, 0, :, 0] = tt
    view[:, 0, :, 1] = root
    view[:, 1, :, 0] = root
    view[:, 1, :, 1] = comp
    return proj
