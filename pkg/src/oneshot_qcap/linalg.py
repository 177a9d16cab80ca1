"""Register-aware complex linear algebra for finite-dimensional quantum systems.

States and operators carry a :class:`SystemLayout` naming their tensor factors,
and every subsystem operation (partial trace, embedding, channel application)
addresses registers by label.  All objects are immutable after construction and
all functions are pure, so values may be shared freely across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DEFAULT_DIM_CAP",
    "DimensionCapError",
    "LayoutError",
    "SystemLayout",
    "Ket",
    "DensityOp",
    "HermOp",
    "tensor",
    "partial_trace",
    "herm_eig",
    "fidelity",
    "purified_distance",
    "purify",
    "schmidt_decompose",
    "embed",
    "permute_registers",
    "sample",
    "basis_ket",
    "bell_ket",
    "max_entangled_ket",
    "maximally_mixed",
]

DEFAULT_DIM_CAP = 4096

HERMITICITY_TOL = 1e-12
EIG_CLIP_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-12
RANK_TOL = 1e-10


class LayoutError(ValueError):
    """Register labels or dimensions do not line up."""


class DimensionCapError(ValueError):
    """Total Hilbert-space dimension exceeds the configured cap."""


def dimension_cap() -> int:
    """Current total-dimension cap (override with ONESHOT_QCAP_DIM_CAP)."""
    raw = os.environ.get("ONESHOT_QCAP_DIM_CAP")
    return int(raw) if raw else DEFAULT_DIM_CAP


@dataclass(frozen=True)
class SystemLayout:
    """Ordered list of named registers with dimensions."""

    registers: tuple[tuple[str, int], ...]

    def __init__(self, registers: Iterable[tuple[str, int]]):
        regs = tuple((str(lbl), int(dim)) for lbl, dim in registers)
        labels = [lbl for lbl, _ in regs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate register labels in {labels}")
        for lbl, dim in regs:
            if dim < 1:
                raise LayoutError(f"register {lbl!r} has dimension {dim} < 1")
        total = int(np.prod([d for _, d in regs], dtype=object)) if regs else 1
        cap = dimension_cap()
        if total > cap:
            raise DimensionCapError(
                f"total dimension {total} exceeds cap {cap}; "
                "set ONESHOT_QCAP_DIM_CAP to raise the limit"
            )
        object.__setattr__(self, "registers", regs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.registers else 1

    def dim_of(self, label: str) -> int:
        for lbl, d in self.registers:
            if lbl == label:
                return d
        raise LayoutError(f"unknown register {label!r} in layout {self.labels}")

    def index_of(self, label: str) -> int:
        for i, (lbl, _) in enumerate(self.registers):
            if lbl == label:
                return i
        raise LayoutError(f"unknown register {label!r} in layout {self.labels}")

    def has(self, label: str) -> bool:
        return any(lbl == label for lbl, _ in self.registers)

    def restrict(self, keep: Sequence[str]) -> "SystemLayout":
        keep_set = set(keep)
        unknown = keep_set - set(self.labels)
        if unknown:
            raise LayoutError(f"unknown registers {sorted(unknown)}")
        return SystemLayout([(l, d) for l, d in self.registers if l in keep_set])

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        overlap = set(self.labels) & set(other.labels)
        if overlap:
            raise LayoutError(f"register labels collide: {sorted(overlap)}")
        return SystemLayout(self.registers + other.registers)

    def __repr__(self) -> str:
        inner = ", ".join(f"{l}:{d}" for l, d in self.registers)
        return f"SystemLayout[{inner}]"


def _as_layout(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    return SystemLayout(layout)


def _permute_vector(vec: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    return vec.reshape(dims).transpose(perm).reshape(-1)


def _permute_matrix(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    n = len(dims)
    full = mat.reshape(tuple(dims) * 2)
    axes = list(perm) + [n + p for p in perm]
    d = int(np.prod(dims, dtype=np.int64))
    return full.transpose(axes).reshape(d, d)


@dataclass(frozen=True)
class Ket:
    """Unit vector on a labeled tensor-product space."""

    amplitudes: np.ndarray
    layout: SystemLayout

    def __init__(self, amplitudes, layout):
        layout = _as_layout(layout)
        amp = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amp.shape[0] != layout.dim:
            raise LayoutError(
                f"vector length {amp.shape[0]} != layout dimension {layout.dim}"
            )
        nrm = float(np.linalg.norm(amp))
        if abs(nrm - 1.0) > 1e-6:
            raise ValueError(f"ket norm {nrm} is not 1")
        if abs(nrm - 1.0) > NORM_TOL:
            amp = amp / nrm
        amp = amp.copy()
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "layout", layout)

    def density(self, normalized: bool = True) -> "DensityOp":
        return DensityOp(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout,
                         normalized=normalized)

    def permuted(self, order: Sequence[str]) -> "Ket":
        perm = [self.layout.index_of(l) for l in order]
        if sorted(order) != sorted(self.layout.labels):
            raise LayoutError("permutation must use exactly the layout's labels")
        amp = _permute_vector(self.amplitudes, self.layout.dims, perm)
        return Ket(amp, SystemLayout([self.layout.registers[p] for p in perm]))


def _check_hermitian(mat: np.ndarray, what: str) -> np.ndarray:
    dev = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
    scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 0.0)
    if dev > 1e-8 * scale:
        raise ValueError(f"{what} is not Hermitian (max deviation {dev:.3e})")
    return (mat + mat.conj().T) / 2.0


@dataclass(frozen=True)
class HermOp:
    """Hermitian operator attached to a layout."""

    matrix: np.ndarray
    layout: SystemLayout

    def __init__(self, matrix, layout):
        layout = _as_layout(layout)
        mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (layout.dim, layout.dim):
            raise LayoutError(f"matrix shape {mat.shape} != ({layout.dim}, {layout.dim})")
        mat = _check_hermitian(mat, "operator")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "layout", layout)

    def permuted(self, order: Sequence[str]) -> "HermOp":
        if sorted(order) != sorted(self.layout.labels):
            raise LayoutError("permutation must use exactly the layout's labels")
        perm = [self.layout.index_of(l) for l in order]
        mat = _permute_matrix(self.matrix, self.layout.dims, perm)
        return HermOp(mat, SystemLayout([self.layout.registers[p] for p in perm]))


@dataclass(frozen=True)
class DensityOp:
    """Positive semi-definite operator with unit (or sub-unit) trace."""

    matrix: np.ndarray
    layout: SystemLayout
    normalized: bool = True

    def __init__(self, matrix, layout, normalized: bool = True):
        layout = _as_layout(layout)
        mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (layout.dim, layout.dim):
            raise LayoutError(f"matrix shape {mat.shape} != ({layout.dim}, {layout.dim})")
        mat = _check_hermitian(mat, "density operator")
        evals = np.linalg.eigvalsh(mat)
        lo = float(evals[0]) if evals.size else 0.0
        if lo < -EIG_CLIP_TOL:
            raise ValueError(f"density operator has eigenvalue {lo:.3e} < -{EIG_CLIP_TOL}")
        if lo < 0.0:
            # Roundoff-scale negative part: clip it away.
            w, v = np.linalg.eigh(mat)
            w = np.clip(w, 0.0, None)
            mat = (v * w) @ v.conj().T
            mat = (mat + mat.conj().T) / 2.0
        tr = float(np.real(np.trace(mat)))
        if normalized:
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"normalized density operator has trace {tr}")
        elif tr > 1.0 + TRACE_TOL:
            raise ValueError(f"sub-normalized density operator has trace {tr} > 1")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "normalized", bool(normalized))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def permuted(self, order: Sequence[str]) -> "DensityOp":
        if sorted(order) != sorted(self.layout.labels):
            raise LayoutError("permutation must use exactly the layout's labels")
        perm = [self.layout.index_of(l) for l in order]
        mat = _permute_matrix(self.matrix, self.layout.dims, perm)
        return DensityOp(mat, SystemLayout([self.layout.registers[p] for p in perm]),
                         normalized=self.normalized)


def tensor(a, b):
    """Kronecker product of two same-kind objects with disjoint register labels."""
    if isinstance(a, Ket) and isinstance(b, Ket):
        return Ket(np.kron(a.amplitudes, b.amplitudes), a.layout.concat(b.layout))
    if isinstance(a, DensityOp) and isinstance(b, DensityOp):
        return DensityOp(np.kron(a.matrix, b.matrix), a.layout.concat(b.layout),
                         normalized=a.normalized and b.normalized)
    if isinstance(a, HermOp) and isinstance(b, HermOp):
        return HermOp(np.kron(a.matrix, b.matrix), a.layout.concat(b.layout))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def partial_trace(op: DensityOp, keep: Iterable[str]) -> DensityOp:
    """Trace out every register not in ``keep``, preserving register order."""
    keep_set = set(keep)
    unknown = keep_set - set(op.layout.labels)
    if unknown:
        raise LayoutError(f"unknown registers {sorted(unknown)}")
    dims = op.layout.dims
    n = len(dims)
    keep_idx = [i for i, (l, _) in enumerate(op.layout.registers) if l in keep_set]
    drop_idx = [i for i in range(n) if i not in keep_idx]
    reordered = _permute_matrix(op.matrix, dims, keep_idx + drop_idx)
    d_keep = int(np.prod([dims[i] for i in keep_idx], dtype=np.int64)) if keep_idx else 1
    d_drop = op.layout.dim // d_keep
    mat = np.einsum("ikjk->ij",
                    reordered.reshape(d_keep, d_drop, d_keep, d_drop))
    new_layout = SystemLayout([op.layout.registers[i] for i in keep_idx])
    return DensityOp(mat, new_layout, normalized=op.normalized)


def herm_eig(H: HermOp | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching unitary eigenvector columns."""
    mat = H.matrix if isinstance(H, HermOp) else _check_hermitian(
        np.asarray(H, dtype=complex), "operator")
    w, v = np.linalg.eigh(mat)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: DensityOp, sigma: DensityOp) -> float:
    """Uhlmann fidelity, the trace norm of sqrt(rho)*sqrt(sigma)."""
    if rho.layout.dims != sigma.layout.dims or rho.layout.labels != sigma.layout.labels:
        raise LayoutError("fidelity requires identical layouts")
    prod = _sqrt_psd(rho.matrix) @ _sqrt_psd(sigma.matrix)
    val = float(np.sum(np.linalg.svd(prod, compute_uv=False)))
    return min(max(val, 0.0), 1.0)


def purified_distance(rho: DensityOp, sigma: DensityOp) -> float:
    """sqrt(1 - F^2); a metric on density operators."""
    f = fidelity(rho, sigma)
    return float(np.sqrt(max(0.0, 1.0 - f * f)))


def purify(rho: DensityOp, env_label: str) -> Ket:
    """Purification with an environment register of dimension rank(rho)."""
    if not rho.normalized:
        raise ValueError("can only purify a normalized state")
    if rho.layout.has(env_label):
        raise LayoutError(f"environment label {env_label!r} already in layout")
    w, v = herm_eig(HermOp(rho.matrix, rho.layout))
    rank = max(1, int(np.sum(w > RANK_TOL)))
    amp = np.zeros(rho.layout.dim * rank, dtype=complex)
    for i in range(rank):
        env = np.zeros(rank)
        env[i] = 1.0
        amp += np.sqrt(max(w[i], 0.0)) * np.kron(v[:, i], env)
    layout = rho.layout.concat(SystemLayout([(env_label, rank)]))
    return Ket(amp, layout)


def schmidt_decompose(psi: Ket, cut: Iterable[str]):
    """Schmidt decomposition across ``cut`` vs the remaining registers.

    Returns (coefficients descending, left basis columns, right basis columns),
    where "left" spans the ``cut`` registers in layout order.
    """
    cut_set = set(cut)
    labels = psi.layout.labels
    if not cut_set or cut_set == set(labels) or not cut_set <= set(labels):
        raise LayoutError("cut must be a nonempty strict subset of the layout's registers")
    left = [l for l in labels if l in cut_set]
    right = [l for l in labels if l not in cut_set]
    reordered = psi.permuted(left + right)
    d_left = int(np.prod([psi.layout.dim_of(l) for l in left], dtype=np.int64))
    d_right = int(np.prod([psi.layout.dim_of(l) for l in right], dtype=np.int64))
    mat = reordered.amplitudes.reshape(d_left, d_right)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    return s, u, vh.conj().T


def embed(op: HermOp, target: SystemLayout) -> HermOp:
    """Extend ``op`` by identity onto the registers of ``target``.

    The result acts like ``op`` on the shared registers (in whatever order the
    target lists them) and as the identity elsewhere.
    """
    target = _as_layout(target)
    for lbl, d in op.layout.registers:
        if not target.has(lbl):
            raise LayoutError(f"target layout lacks register {lbl!r}")
        if target.dim_of(lbl) != d:
            raise LayoutError(
                f"register {lbl!r}: dim {d} != target dim {target.dim_of(lbl)}")
    missing = [(l, d) for l, d in target.registers if not op.layout.has(l)]
    d_missing = int(np.prod([d for _, d in missing], dtype=np.int64)) if missing else 1
    big = np.kron(op.matrix, np.eye(d_missing))
    interim = list(op.layout.registers) + missing
    interim_labels = [l for l, _ in interim]
    perm = [interim_labels.index(l) for l in target.labels]
    mat = _permute_matrix(big, [d for _, d in interim], perm)
    return HermOp(mat, target)


def permute_registers(obj, order: Sequence[str]):
    """Reorder the registers of a Ket, DensityOp, or HermOp."""
    return obj.permuted(list(order))


def basis_ket(index: int, layout) -> Ket:
    layout = _as_layout(layout)
    amp = np.zeros(layout.dim, dtype=complex)
    amp[index] = 1.0
    return Ket(amp, layout)


def max_entangled_ket(dim: int, label_a: str, label_b: str) -> Ket:
    """Maximally entangled state sum_i |ii> / sqrt(dim)."""
    amp = np.zeros(dim * dim, dtype=complex)
    for i in range(dim):
        amp[i * dim + i] = 1.0 / np.sqrt(dim)
    return Ket(amp, SystemLayout([(label_a, dim), (label_b, dim)]))


def bell_ket(label_a: str = "A", label_b: str = "B") -> Ket:
    return max_entangled_ket(2, label_a, label_b)


def maximally_mixed(layout) -> DensityOp:
    layout = _as_layout(layout)
    return DensityOp(np.eye(layout.dim) / layout.dim, layout)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def _random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(_ginibre(rng, dim, dim))
    # Fix the phase of each column so the draw is a deterministic function of
    # the Ginibre sample (Haar-distributed either way).
    return q * (np.diag(r) / np.abs(np.diag(r)))


def sample(kind: str, dims, seed=0, *, outcomes: int = 2, rank: int | None = None,
           labels: Sequence[str] | None = None):
    """Deterministic seeded random test objects.

    kind: one of {"density", "pure", "projector", "povm", "unitary"}.
    dims: an int or a sequence of per-register dims; labels default to R0, R1, ...
    """
    rng = _rng(seed)
    dims_seq = [int(dims)] if np.isscalar(dims) else [int(d) for d in dims]
    if labels is None:
        labels = [f"R{i}" for i in range(len(dims_seq))]
    layout = SystemLayout(list(zip(labels, dims_seq)))
    d = layout.dim
    if kind == "density":
        g = _ginibre(rng, d, d)
        mat = g @ g.conj().T
        return DensityOp(mat / np.real(np.trace(mat)), layout)
    if kind == "pure":
        v = _ginibre(rng, d, 1).reshape(-1)
        return Ket(v / np.linalg.norm(v), layout)
    if kind == "projector":
        r = rank if rank is not None else max(1, d // 2)
        u = _random_unitary(rng, d)
        mat = u[:, :r] @ u[:, :r].conj().T
        return HermOp(mat, layout)
    if kind == "unitary":
        return _random_unitary(rng, d)
    if kind == "povm":
        if outcomes < 1:
            raise ValueError("POVM needs at least one outcome")
        raw = []
        for _ in range(outcomes):
            g = _ginibre(rng, d, d)
            raw.append(g @ g.conj().T)
        total = np.sum(raw, axis=0)
        w, v = np.linalg.eigh(total)
        inv_sqrt = (v * (1.0 / np.sqrt(np.clip(w, 1e-300, None)))) @ v.conj().T
        return [HermOp(inv_sqrt @ m @ inv_sqrt, layout) for m in raw]
    raise ValueError(f"unknown sample kind {kind!r}")
