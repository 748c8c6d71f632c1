"""Dense density-matrix primitives for small multipartite systems.

States live on an ordered list of wires with per-wire dimensions (qubits by
default, qutrits where needed). Everything is exact dense linear algebra on
complex128 arrays; there is no sampling anywhere. Branch weights are carried
alongside the operator so that postselected runs keep unnormalized branches.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from itertools import product
from math import prod

import numpy as np

DEFAULT_MAX_DIM = 4096
ATOL_UNITARY = 1e-10
ATOL_WEIGHT = 1e-12


class CapacityError(Exception):
    """Raised when a requested global dimension exceeds the configured cap."""


def max_dim() -> int:
    """Global dimension cap; override with the DLOCC_MAX_DIM env variable."""
    raw = os.environ.get("DLOCC_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise CapacityError(f"DLOCC_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 2:
        raise CapacityError(f"DLOCC_MAX_DIM must be >= 2, got {value}")
    return value


@dataclass(frozen=True)
class DensityState:
    """An (optionally unnormalized) density operator on ordered wires.

    ``op`` is a d x d complex matrix with d = prod(dims); ``weight`` is the
    trace of ``op`` as produced by the branch that created it. States are
    immutable; operations return new instances.
    """

    dims: tuple[int, ...]
    op: np.ndarray
    weight: float

    @property
    def dim(self) -> int:
        d = 1
        for k in self.dims:
            d *= k
        return d

    def normalized(self) -> "DensityState":
        if self.weight <= ATOL_WEIGHT:
            raise ValueError("cannot normalize a zero-weight state")
        return DensityState(self.dims, self.op / self.weight, 1.0)


def state_from_op(op: np.ndarray, dims: tuple[int, ...]) -> DensityState:
    """Wrap a matrix as a DensityState, taking the weight from its trace."""
    op = np.asarray(op, dtype=complex)
    d = int(np.prod(dims))
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match dims {dims}")
    return DensityState(tuple(dims), op, float(np.real(np.trace(op))))


def check_state(s: DensityState, atol: float = 1e-9) -> None:
    """Validate Hermiticity, trace/weight agreement and positivity.

    Intended for tests and debugging; the hot paths do not call this.
    """
    if np.abs(s.op - s.op.conj().T).max() > atol:
        raise ValueError("operator is not Hermitian")
    if abs(np.real(np.trace(s.op)) - s.weight) > max(atol, atol * abs(s.weight)):
        raise ValueError("weight does not match trace")
    evals = np.linalg.eigvalsh(s.op)
    if evals.min() < -atol:
        raise ValueError(f"operator is not PSD (min eigenvalue {evals.min():.3e})")


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def basis_state(indices: tuple[int, ...], dims: tuple[int, ...]) -> DensityState:
    """Computational-basis product state |i_1 ... i_n>."""
    v = np.array([1.0], dtype=complex)
    for i, d in zip(indices, dims):
        v = np.kron(v, ket(i, d))
    return DensityState(tuple(dims), np.outer(v, v.conj()), 1.0)


def max_entangled(d: int) -> np.ndarray:
    """The maximally entangled vector (1/sqrt(d)) sum_i |ii> on a d x d pair."""
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1.0
    return v / np.sqrt(d)


def tensor(a: DensityState, b: DensityState) -> DensityState:
    """Tensor product; b's wires are appended after a's."""
    d = a.dim * b.dim
    if d > max_dim():
        raise CapacityError(f"tensor product dimension {d} exceeds cap {max_dim()}")
    return DensityState(a.dims + b.dims, np.kron(a.op, b.op), a.weight * b.weight)


def permute_wires(s: DensityState, order: tuple[int, ...]) -> DensityState:
    """Reorder wires so that new wire i is old wire order[i]."""
    n = len(s.dims)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order} is not a permutation of 0..{n - 1}")
    t = s.op.reshape(s.dims + s.dims)
    axes = tuple(order) + tuple(n + w for w in order)
    t = np.transpose(t, axes)
    dims = tuple(s.dims[w] for w in order)
    return DensityState(dims, t.reshape(s.dim, s.dim), s.weight)


def partial_trace(s: DensityState, keep: tuple[int, ...]) -> DensityState:
    """Trace out every wire not listed in ``keep`` (original order preserved)."""
    n = len(s.dims)
    keep = tuple(keep)
    if any(w < 0 or w >= n for w in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid keep list {keep} for {n} wires")
    drop = [w for w in range(n) if w not in keep]
    t = s.op.reshape(s.dims + s.dims)
    m = n
    for w in sorted(drop, reverse=True):
        t = np.trace(t, axis1=w, axis2=w + m)
        m -= 1
    dims = tuple(s.dims[w] for w in range(n) if w in keep)
    d = int(np.prod(dims)) if dims else 1
    return DensityState(dims, t.reshape(d, d), s.weight)


def is_unitary(u: np.ndarray, atol: float = ATOL_UNITARY) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= atol


def apply_unitary(s: DensityState, u: np.ndarray, wires: tuple[int, ...]) -> DensityState:
    """Apply a unitary acting on the given wires: rho -> U rho U^dag.

    ``u`` is given in the product basis of ``wires`` (in the listed order);
    the embedding into the full system is handled here via tensor reshapes.
    """
    n = len(s.dims)
    wires = tuple(wires)
    if len(set(wires)) != len(wires) or any(w < 0 or w >= n for w in wires):
        raise ValueError(f"invalid wire list {wires}")
    ud = tuple(s.dims[w] for w in wires)
    dsub = prod(ud)
    u = np.asarray(u, dtype=complex)
    if u.shape != (dsub, dsub):
        raise ValueError(f"unitary shape {u.shape} does not match wires {wires}")
    if not is_unitary(u):
        raise ValueError("matrix is not unitary within tolerance")
    k = len(wires)
    ut = u.reshape(ud + ud)
    t = s.op.reshape(s.dims + s.dims)
    # left action: contract u's input axes with the ket-side wire axes
    t = np.tensordot(ut, t, axes=(tuple(range(k, 2 * k)), wires))
    t = np.moveaxis(t, range(k), wires)
    # right action: contract conj(u)'s input axes with the bra-side wire axes
    rwires = tuple(n + w for w in wires)
    t = np.tensordot(t, ut.conj(), axes=(rwires, tuple(range(k, 2 * k))))
    t = np.moveaxis(t, range(2 * n - k, 2 * n), rwires)
    return DensityState(s.dims, t.reshape(s.dim, s.dim), s.weight)


def apply_channel(s: DensityState, kraus: tuple[np.ndarray, ...], wires: tuple[int, ...]) -> DensityState:
    """Apply a Kraus channel on the given wires: rho -> sum_k E_k rho E_k^dag."""
    n = len(s.dims)
    wires = tuple(wires)
    ud = tuple(s.dims[w] for w in wires)
    dsub = int(np.prod(ud))
    acc = None
    comp = np.zeros((dsub, dsub), dtype=complex)
    for e in kraus:
        e = np.asarray(e, dtype=complex)
        if e.shape != (dsub, dsub):
            raise ValueError(f"Kraus operator shape {e.shape} does not match wires {wires}")
        comp += e.conj().T @ e
        k = len(wires)
        et = e.reshape(ud + ud)
        t = s.op.reshape(s.dims + s.dims)
        t = np.tensordot(et, t, axes=(tuple(range(k, 2 * k)), wires))
        t = np.moveaxis(t, range(k), wires)
        rwires = tuple(n + w for w in wires)
        t = np.tensordot(t, et.conj(), axes=(rwires, tuple(range(k, 2 * k))))
        t = np.moveaxis(t, range(2 * n - k, 2 * n), rwires)
        acc = t if acc is None else acc + t
    if np.abs(comp - np.eye(dsub)).max() > ATOL_UNITARY:
        raise ValueError("Kraus set fails the completeness check")
    return DensityState(s.dims, acc.reshape(s.dim, s.dim), s.weight)


def measurement_weights(s: DensityState, wires: tuple[int, ...]) -> dict[tuple[int, ...], float]:
    """Weights of all computational-basis outcomes on ``wires`` (no collapse)."""
    n = len(s.dims)
    diag = np.real(np.diagonal(s.op)).reshape(s.dims)
    sum_axes = tuple(w for w in range(n) if w not in wires)
    marg = diag.sum(axis=sum_axes) if sum_axes else diag
    # axes of marg follow the original wire order restricted to `wires`
    order = sorted(range(len(wires)), key=lambda i: wires[i])
    out: dict[tuple[int, ...], float] = {}
    for outcome in product(*(range(s.dims[w]) for w in wires)):
        idx = [0] * len(wires)
        for pos, i in enumerate(order):
            idx[pos] = outcome[i]
        out[outcome] = float(marg[tuple(idx)])
    return out


def collapse(s: DensityState, wires: tuple[int, ...], outcome: tuple[int, ...]) -> DensityState:
    """Unnormalized branch for one computational outcome on ``wires``.

    The measured wires stay in the state, collapsed to the outcome basis
    state; the branch weight is the outcome probability times ``s.weight``.
    """
    n = len(s.dims)
    t = s.op.reshape(s.dims + s.dims)
    idx: list = [slice(None)] * (2 * n)
    for w, o in zip(wires, outcome):
        idx[w] = o
        idx[n + w] = o
    bt = np.zeros_like(t)
    bt[tuple(idx)] = t[tuple(idx)]
    op = bt.reshape(s.dim, s.dim)
    return DensityState(s.dims, op, float(np.real(np.trace(op))))


def measure_computational(
    s: DensityState, wires: tuple[int, ...]
) -> list[tuple[tuple[int, ...], DensityState]]:
    """Projective computational-basis measurement on ``wires``.

    Returns one (outcome, branch) pair per outcome in lexicographic order.
    Branch operators are unnormalized (weight = outcome probability times the
    incoming weight); measured wires remain in the state, collapsed to the
    outcome basis state. Zero-weight branches are included.
    """
    n = len(s.dims)
    wires = tuple(wires)
    if len(set(wires)) != len(wires) or any(w < 0 or w >= n for w in wires):
        raise ValueError(f"invalid wire list {wires}")
    return [
        (outcome, collapse(s, wires, outcome))
        for outcome in product(*(range(s.dims[w]) for w in wires))
    ]


def fidelity_pure(s: DensityState, target: np.ndarray) -> float:
    """Fidelity <psi|rho|psi> of the weight-normalized state with a pure target."""
    if s.weight <= ATOL_WEIGHT:
        raise ValueError("fidelity of a zero-weight branch is undefined")
    target = np.asarray(target, dtype=complex)
    if target.shape != (s.dim,):
        raise ValueError(f"target dimension {target.shape} does not match state dim {s.dim}")
    nrm = np.linalg.norm(target)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError("target vector is not normalized")
    return float(np.real(target.conj() @ s.op @ target) / s.weight)


def trace_distance(a: DensityState, b: DensityState) -> float:
    """Trace distance (1/2)||a - b||_1 between the weight-normalized states."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch {a.dims} vs {b.dims}")
    diff = a.op / a.weight - b.op / b.weight
    evals = np.linalg.eigvalsh(diff)
    return float(0.5 * np.abs(evals).sum())
