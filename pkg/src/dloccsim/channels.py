"""Single-wire noise channels and the noisy entangled-state families.

Channels are explicit Kraus sets validated for completeness at construction.
State families cover the distillation and discrimination experiments: the
gamma-parameterized S family, isotropic states (qubit and qutrit), Bell pairs
degraded by amplitude damping (one- or two-sided), and noisy "minus" Bell
pairs used as the second discrimination hypothesis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qmath import DensityState, apply_channel, ket, max_entangled

ATOL_COMPLETE = 1e-10

STATE_FAMILIES = (
    "sstate",
    "isotropic",
    "unilocal_gad_bell",
    "bilocal_ad_bell",
    "qutrit_isotropic",
    "noisy_bell_minus",
)

CHANNEL_KINDS = ("erasure", "depolarizing", "amplitude_damping", "gad", "dephasing")


@dataclass(frozen=True)
class KrausChannel:
    """A completely positive trace-preserving map given by Kraus operators."""

    kraus: tuple[np.ndarray, ...]
    dim: int

    def __post_init__(self):
        comp = np.zeros((self.dim, self.dim), dtype=complex)
        for e in self.kraus:
            if e.shape != (self.dim, self.dim):
                raise ValueError(f"Kraus operator shape {e.shape}, expected {(self.dim, self.dim)}")
            comp += e.conj().T @ e
        err = np.abs(comp - np.eye(self.dim)).max()
        if err > ATOL_COMPLETE:
            raise ValueError(f"Kraus completeness violated by {err:.3e}")

    def apply(self, s: DensityState, wires: tuple[int, ...]) -> DensityState:
        return apply_channel(s, self.kraus, wires)

    def apply_matrix(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(rho, dtype=complex))
        for e in self.kraus:
            out += e @ rho @ e.conj().T
        return out


def erasure(gamma: float) -> KrausChannel:
    """Keep the input with probability gamma, otherwise reset to |0><0|.

    Kraus set {sqrt(gamma) I, sqrt(1-gamma) |0><0|, sqrt(1-gamma) |0><1|},
    realizing rho -> gamma rho + (1-gamma) tr(rho) |0><0|.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0,1], got {gamma}")
    k0 = np.sqrt(gamma) * np.eye(2, dtype=complex)
    k1 = np.sqrt(1 - gamma) * np.outer(ket(0, 2), ket(0, 2).conj())
    k2 = np.sqrt(1 - gamma) * np.outer(ket(0, 2), ket(1, 2).conj())
    return KrausChannel((k0, k1, k2), 2)


def depolarizing(p: float, d: int = 2) -> KrausChannel:
    """rho -> p rho + (1-p) I/d, via the Weyl (shift/clock) dilation.

    Any dilation is acceptable; only the induced map is contractual.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0,1], got {p}")
    omega = np.exp(2j * np.pi / d)
    x = np.zeros((d, d), dtype=complex)
    for j in range(d):
        x[(j + 1) % d, j] = 1.0
    z = np.diag([omega**j for j in range(d)])
    ops = []
    for a in range(d):
        for b in range(d):
            w = np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)
            coeff = p + (1 - p) / d**2 if (a, b) == (0, 0) else (1 - p) / d**2
            ops.append(np.sqrt(coeff) * w)
    return KrausChannel(tuple(ops), d)


def amplitude_damping(gamma: float) -> KrausChannel:
    """Decay |1> -> |0> with probability gamma."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0,1], got {gamma}")
    e0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    e1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausChannel((e0, e1), 2)


def generalized_amplitude_damping(gamma: float, q: float) -> KrausChannel:
    """Finite-temperature damping with mixing weight q between decay directions.

    Kraus set (note the sqrt(gamma) on the |1><1| entry of the first operator;
    at q=1 this reduces to amplitude damping with parameter 1-gamma):
        E0 = sqrt(q) diag(1, sqrt(gamma))
        E1 = sqrt(q) sqrt(1-gamma) |0><1|
        E2 = sqrt(1-q) diag(sqrt(gamma), 1)
        E3 = sqrt(1-q) sqrt(1-gamma) |1><0|
    """
    if not 0.0 <= gamma <= 1.0 or not 0.0 <= q <= 1.0:
        raise ValueError(f"gamma and q must lie in [0,1], got {gamma}, {q}")
    e0 = np.sqrt(q) * np.diag([1.0, np.sqrt(gamma)]).astype(complex)
    e1 = np.sqrt(q) * np.array([[0, np.sqrt(1 - gamma)], [0, 0]], dtype=complex)
    e2 = np.sqrt(1 - q) * np.diag([np.sqrt(gamma), 1.0]).astype(complex)
    e3 = np.sqrt(1 - q) * np.array([[0, 0], [np.sqrt(1 - gamma), 0]], dtype=complex)
    return KrausChannel((e0, e1, e2, e3), 2)


def dephasing(p: float) -> KrausChannel:
    """rho -> (1-p) rho + p Z rho Z."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0,1], got {p}")
    z = np.diag([1.0, -1.0]).astype(complex)
    return KrausChannel((np.sqrt(1 - p) * np.eye(2, dtype=complex), np.sqrt(p) * z), 2)


def channel_by_name(kind: str, param: float, q: float | None = None, d: int = 2) -> KrausChannel:
    if kind == "erasure":
        return erasure(param)
    if kind == "depolarizing":
        return depolarizing(param, d)
    if kind == "amplitude_damping":
        return amplitude_damping(param)
    if kind == "gad":
        if q is None:
            raise ValueError("gad channel requires q")
        return generalized_amplitude_damping(param, q)
    if kind == "dephasing":
        return dephasing(param)
    raise ValueError(f"unknown channel kind {kind!r}")


@dataclass(frozen=True)
class NoisyStateSpec:
    """Declarative description of a two-party noisy resource state.

    ``family`` is one of STATE_FAMILIES; gamma/p/q apply where meaningful.
    ``channel`` selects the noise kind for the noisy_bell_minus family.
    """

    family: str
    gamma: float | None = None
    p: float | None = None
    q: float | None = None
    channel: str | None = None

    def __post_init__(self):
        if self.family not in STATE_FAMILIES:
            raise ValueError(f"unknown state family {self.family!r}")

    def pair_dims(self) -> tuple[int, int]:
        return (3, 3) if self.family == "qutrit_isotropic" else (2, 2)


def bell_phi_plus(d: int = 2) -> np.ndarray:
    return max_entangled(d)


def bell_phi_minus() -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[0] = 1 / np.sqrt(2)
    v[3] = -1 / np.sqrt(2)
    return v


def _require(value: float | None, name: str, family: str) -> float:
    if value is None:
        raise ValueError(f"family {family!r} requires parameter {name}")
    return value


def make_state(spec: NoisyStateSpec) -> DensityState:
    """Build the weight-1 two-party state described by ``spec``.

    The S family and both isotropic families come from their explicit
    formulas; the remaining families apply the named channel(s) to an ideal
    Bell pair (first wire = Alice's half).
    """
    f = spec.family
    if f == "sstate":
        g = _require(spec.gamma, "gamma", f)
        phi = bell_phi_plus()
        op = g * np.outer(phi, phi.conj())
        op[0, 0] += 1 - g
        return DensityState((2, 2), op, 1.0)
    if f == "isotropic":
        p = _require(spec.p, "p", f)
        phi = bell_phi_plus()
        op = p * np.outer(phi, phi.conj()) + (1 - p) * np.eye(4, dtype=complex) / 4
        return DensityState((2, 2), op, 1.0)
    if f == "qutrit_isotropic":
        p = _require(spec.p, "p", f)
        phi = bell_phi_plus(3)
        op = p * np.outer(phi, phi.conj()) + (1 - p) * np.eye(9, dtype=complex) / 9
        return DensityState((3, 3), op, 1.0)
    if f == "unilocal_gad_bell":
        g = _require(spec.gamma, "gamma", f)
        q = _require(spec.q, "q", f)
        phi = bell_phi_plus()
        base = DensityState((2, 2), np.outer(phi, phi.conj()), 1.0)
        return generalized_amplitude_damping(g, q).apply(base, (0,))
    if f == "bilocal_ad_bell":
        g = _require(spec.gamma, "gamma", f)
        phi = bell_phi_plus()
        base = DensityState((2, 2), np.outer(phi, phi.conj()), 1.0)
        ch = amplitude_damping(g)
        return ch.apply(ch.apply(base, (0,)), (1,))
    if f == "noisy_bell_minus":
        if spec.channel is None:
            raise ValueError("noisy_bell_minus requires a channel kind")
        param = spec.gamma if spec.gamma is not None else spec.p
        param = _require(param, "gamma or p", f)
        phi = bell_phi_minus()
        base = DensityState((2, 2), np.outer(phi, phi.conj()), 1.0)
        ch = channel_by_name(spec.channel, param, spec.q)
        return ch.apply(ch.apply(base, (0,)), (1,))
    raise ValueError(f"unknown state family {f!r}")
