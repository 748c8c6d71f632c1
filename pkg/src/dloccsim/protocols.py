"""Reference protocols and closed-form fidelity recurrences.

Fixed protocols (DEJMPS and the learned erasure-family circuit with its
analytic angles) are built as DynamicProtocol values; trainable templates
(two-wire rotation/CNOT blocks, the four-pair isotropic window, the qutrit
window, the discrimination chain) leave their rotation angles as parameter
slots. The oracle_* functions evaluate the matching closed-form recurrences
so simulation and algebra can be cross-checked independently.
"""

from __future__ import annotations

import numpy as np

from .channels import NoisyStateSpec
from .circuits import Gate, ParamCircuit, csum, ry_cnot_ladder
from .dlocc import BranchPolicy, CONDITION, DynamicProtocol, RoundSpec, postselect
from .qmath import DensityState, max_entangled

# ---------------------------------------------------------------------------
# closed-form oracles


def dejmps_fidelity_step(fj: float, fk: float) -> float:
    """Output fidelity of one DEJMPS round on rank-2 inputs with fidelities fj, fk."""
    den = 1.0 - fj - fk + 2.0 * fj * fk
    if den <= 0.0:
        raise ValueError(f"degenerate acceptance probability for fj={fj}, fk={fk}")
    return fj * fk / den


def oracle_dynamic_dejmps(n: int, gamma: float) -> float:
    """Fidelity recurrence of dynamic DEJMPS on erasure-family states.

    Evaluated exactly as the piecewise three-case cycle prescribes, with no
    clamping: the n = 3k case can leave [0,1] for gamma < 1, and callers are
    expected to range-check before comparing against simulations.
    """
    if n < 2:
        raise ValueError(f"dynamic DEJMPS needs n >= 2 copies, got {n}")
    f1 = (1.0 + gamma) / 2.0
    f = f1
    for m in range(2, n + 1):
        if m % 3 == 2:
            f = f1 * f / (1.0 - f1 + (2.0 * f1 - 1.0) * f)
        elif m % 3 == 0:
            f = f1 * f / (f + f1 - 1.0)
        else:
            f = f / (2.0 * f - 1.0)
    return f


def oracle_learned_s(n: int, gamma: float) -> float:
    """Fidelity of the learned dynamic protocol on n erasure-family copies."""
    if n < 2:
        raise ValueError(f"the learned protocol needs n >= 2 copies, got {n}")
    f1 = (1.0 + gamma) / 2.0
    f = 0.5 * (1.0 + np.sqrt(gamma * (2.0 - gamma)))
    for _ in range(3, n + 1):
        f = f1 * f / (1.0 - f1 + (2.0 * f1 - 1.0) * f)
    return float(f)


def eta_update(aj: float, gamma_star: float) -> tuple[float, float]:
    """One learned round on (intermediate state a_j) x (fresh copy gamma_star).

    Returns (b, f) where b parameterizes the output within the same
    off-diagonal family and f = 1 + b is its fidelity.
    """
    den = 1.0 + gamma_star + 2.0 * aj * gamma_star
    if abs(den) < 1e-15:
        raise ValueError(f"vanishing branch weight for a={aj}, gamma={gamma_star}")
    b = aj * (1.0 - gamma_star) / den
    f = (1.0 + aj) * (1.0 + gamma_star) / den
    return b, f


def eta_state(a: float) -> DensityState:
    """Intermediate-family state: the ideal Bell projector plus a on the corners."""
    phi = max_entangled(2)
    op = np.outer(phi, phi.conj())
    op[0, 3] += a
    op[3, 0] += a
    return DensityState((2, 2), op, float(np.real(np.trace(op))))


def oracle_iso_4to1(fj: float, fk: float) -> float:
    """Fidelity map of the reference 4-to-1 isotropic block on inputs (fj, fk)."""
    den = 3.0 + fj * (1.0 - 4.0 * fk) ** 2 - 3.0 * fk
    if den <= 0.0:
        raise ValueError(f"degenerate denominator for fj={fj}, fk={fk}")
    num = 1.0 - (2.0 + 3.0 * fj) * fk + (1.0 + 12.0 * fj) * fk * fk
    return num / den


def iso_input_fidelity(p):
    """Overlap of the isotropic pair with the ideal Bell state.

    Written with integer literals so exact numeric types (Fraction, Decimal)
    pass through without rounding; floats behave as usual.
    """
    return (1 + 3 * p) / 4


def oracle_iso_iterative(i: int, p: float) -> float:
    """Fidelity after i iterations of the static pairwise scheme (4^i copies)."""
    if i < 1:
        raise ValueError(f"iteration count must be >= 1, got {i}")
    f = iso_input_fidelity(p)
    for _ in range(i):
        f = (1.0 - 4.0 * f + 6.0 * f * f) / (3.0 - 8.0 * f + 8.0 * f * f)
    return f


def oracle_iso_dynamic(i: int, p: float) -> float:
    """Fidelity after i dynamic rounds feeding fresh copies (3i+1 copies)."""
    if i < 1:
        raise ValueError(f"iteration count must be >= 1, got {i}")
    f = (1.0 - 2.0 * p + 9.0 * p * p) / (4.0 - 8.0 * p + 12.0 * p * p)
    f0 = iso_input_fidelity(p)
    for _ in range(2, i + 1):
        f = oracle_iso_4to1(f, f0)
    return f


def copies_consumed(method: str, i: int) -> int:
    """Source copies consumed by i rounds of the named isotropic scheme."""
    if i < 1:
        raise ValueError(f"iteration count must be >= 1, got {i}")
    if method == "iterative":
        return 4**i
    if method == "dynamic":
        return 3 * i + 1
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# fixed reference protocols


def dejmps_round() -> tuple[ParamCircuit, ParamCircuit, BranchPolicy]:
    """DEJMPS purification round on a two-pair window.

    Alice rotates both wires by RX(pi/2), Bob by RX(-pi/2); each party then
    applies CNOT from the kept wire onto the measured wire; the measured
    pair is accepted when the outcomes agree.
    """
    alice = ParamCircuit(
        2,
        (
            Gate("rx", (0,), angle=np.pi / 2),
            Gate("rx", (1,), angle=np.pi / 2),
            Gate("cnot", (0, 1)),
        ),
        0,
    )
    bob = ParamCircuit(
        2,
        (
            Gate("rx", (0,), angle=-np.pi / 2),
            Gate("rx", (1,), angle=-np.pi / 2),
            Gate("cnot", (0, 1)),
        ),
        0,
    )
    return alice, bob, postselect((0, 0), (1, 1))


def build_dejmps_protocol(source: NoisyStateSpec) -> DynamicProtocol:
    """One DEJMPS round consuming two copies of ``source``."""
    alice, bob, policy = dejmps_round()
    rd = RoundSpec(alice, bob, (1,), (1,), policy, None)
    return DynamicProtocol("dejmps", (2, 2), (2, 2), source, 2, (rd,))


def s_learned_round(theta: float) -> tuple[ParamCircuit, ParamCircuit]:
    """Local blocks of the learned erasure-family round at a fixed angle.

    Alice: CNOT (measured wire controls the kept wire), then RY(theta) on
    the measured wire. Bob: the same CNOT, a CNOT back, then RY(theta) on
    the measured wire.
    """
    alice = ParamCircuit(
        2,
        (Gate("cnot", (1, 0)), Gate("ry", (1,), angle=theta)),
        0,
    )
    bob = ParamCircuit(
        2,
        (Gate("cnot", (1, 0)), Gate("cnot", (0, 1)), Gate("ry", (1,), angle=theta)),
        0,
    )
    return alice, bob


def build_s_learned_protocol(n: int, gamma: float) -> DynamicProtocol:
    """Learned dynamic protocol distilling n erasure-family copies to one.

    The first round pairs two fresh copies with angle arccos(1-gamma)+pi;
    each later round feeds one fresh copy to the running output with angle
    -pi/2. Every round postselects both measured wires on 0.
    """
    if n < 2:
        raise ValueError(f"the learned protocol needs n >= 2 copies, got {n}")
    source = NoisyStateSpec("sstate", gamma=gamma)
    rounds = []
    for r in range(n - 1):
        theta = float(np.arccos(1.0 - gamma) + np.pi) if r == 0 else -np.pi / 2
        alice, bob = s_learned_round(theta)
        refresh = source if r < n - 2 else None
        rounds.append(RoundSpec(alice, bob, (1,), (1,), postselect((0, 0)), refresh))
    return DynamicProtocol(f"learned-s-{n}", (2, 2), (2, 2), source, 2, tuple(rounds))


# ---------------------------------------------------------------------------
# trainable protocol templates


def two_wire_ry_block(start_slot: int = 0) -> ParamCircuit:
    """RY rows separated by a CNOT in each orientation: 6 slots.

    A single CNOT orientation cannot reach the best postselected round on
    every input family (RY rotations alone cannot reorient the control),
    so the block carries one CNOT each way.
    """
    s = start_slot
    gates = (
        Gate("ry", (0,), param_slot=s),
        Gate("ry", (1,), param_slot=s + 1),
        Gate("cnot", (0, 1)),
        Gate("ry", (0,), param_slot=s + 2),
        Gate("ry", (1,), param_slot=s + 3),
        Gate("cnot", (1, 0)),
        Gate("ry", (0,), param_slot=s + 4),
        Gate("ry", (1,), param_slot=s + 5),
    )
    return ParamCircuit(2, gates, s + 6)


def build_gad_ansatz_protocol(
    n_copies: int, source: NoisyStateSpec | None = None
) -> DynamicProtocol:
    """Trainable two-pair distillation chain for damped Bell inputs.

    Each round applies a 6-parameter RY/CNOT block per party, measures
    the second pair, postselects on (0,0) and (except in the final round)
    injects a fresh copy of ``source``.
    """
    if n_copies < 2:
        raise ValueError(f"need at least 2 copies, got {n_copies}")
    if source is None:
        source = NoisyStateSpec("unilocal_gad_bell", gamma=0.3, q=1.0)
    block = two_wire_ry_block()
    rounds = []
    for r in range(n_copies - 1):
        refresh = source if r < n_copies - 2 else None
        rounds.append(RoundSpec(block, block, (1,), (1,), postselect((0, 0)), refresh))
    return DynamicProtocol(
        f"trained-2pair-{n_copies}", (2, 2), (2, 2), source, 2, tuple(rounds)
    )


def build_iso_dynamic_protocol(
    n_copies: int, p: float, insert_layers: int = 1, final_layers: int = 3
) -> DynamicProtocol:
    """Trainable four-pair window distilling n isotropic copies to one.

    Non-final rounds measure the last pair, postselect (0,0), and refresh
    it with a fresh copy (a 4-in-3-out step); the final round measures the
    last three pairs and postselects them all on zero, leaving one output
    pair. Consumes 4 + (rounds - 1) = n copies.
    """
    if n_copies < 4:
        raise ValueError(f"the four-pair window needs n >= 4 copies, got {n_copies}")
    source = NoisyStateSpec("isotropic", p=p)
    ins_block = ry_cnot_ladder(4, insert_layers)
    fin_block = ry_cnot_ladder(4, final_layers)
    rounds = []
    for _ in range(n_copies - 4):
        rounds.append(
            RoundSpec(ins_block, ins_block, (3,), (3,), postselect((0, 0)), source)
        )
    rounds.append(
        RoundSpec(fin_block, fin_block, (1, 2, 3), (1, 2, 3), postselect((0,) * 6), None)
    )
    return DynamicProtocol(
        f"trained-iso-{n_copies}", (2,) * 4, (2,) * 4, source, 4, tuple(rounds)
    )


def qutrit_block() -> ParamCircuit:
    """Givens layer on each qutrit, a controlled-sum, then a second layer.

    Each layer parameterizes the three rotation planes of each wire, so the
    block carries 12 slots.
    """
    gates: list[Gate] = []
    slot = 0
    for w in (0, 1):
        for plane in ((0, 1), (0, 2), (1, 2)):
            gates.append(Gate("qunitary", (w,), param_slot=slot, plane=plane))
            slot += 1
    gates.append(Gate("qunitary", (0, 1), matrix=csum(3)))
    for w in (0, 1):
        for plane in ((0, 1), (0, 2), (1, 2)):
            gates.append(Gate("qunitary", (w,), param_slot=slot, plane=plane))
            slot += 1
    return ParamCircuit(2, tuple(gates), slot, wire_dims=(3, 3))


def build_qutrit_protocol(n_copies: int, p: float) -> DynamicProtocol:
    """Trainable 2-in-1-out chain on qutrit isotropic copies."""
    if n_copies < 2:
        raise ValueError(f"need at least 2 copies, got {n_copies}")
    source = NoisyStateSpec("qutrit_isotropic", p=p)
    block = qutrit_block()
    rounds = []
    for r in range(n_copies - 1):
        refresh = source if r < n_copies - 2 else None
        rounds.append(RoundSpec(block, block, (1,), (1,), postselect((0, 0)), refresh))
    return DynamicProtocol(
        f"trained-qutrit-{n_copies}", (3, 3), (3, 3), source, 2, tuple(rounds)
    )


# ---------------------------------------------------------------------------
# discrimination protocol


def _alice_meas_block() -> ParamCircuit:
    gates = (Gate("rz", (0,), param_slot=0), Gate("ry", (0,), param_slot=1))
    return ParamCircuit(1, gates, 2)


def _bob_verdict_block() -> ParamCircuit:
    """Rotations on the copy wire and verdict wire around a CNOT: 6 slots."""
    gates = (
        Gate("rz", (0,), param_slot=0),
        Gate("ry", (0,), param_slot=1),
        Gate("rz", (1,), param_slot=2),
        Gate("ry", (1,), param_slot=3),
        Gate("cnot", (0, 1)),
        Gate("rz", (1,), param_slot=4),
        Gate("ry", (1,), param_slot=5),
    )
    return ParamCircuit(2, gates, 6)


def build_discrimination_protocol(
    n_copies: int, source: NoisyStateSpec | None = None
) -> DynamicProtocol:
    """Adaptive discrimination chain: Alice one wire, Bob copy + verdict wires.

    Each round Alice measures her half of the current copy; Bob, seeing her
    outcome, routes information from his half into the verdict wire. The
    first n-1 rounds measure Bob's copy wire and refresh the pair; the last
    round measures the verdict wire itself.
    """
    if n_copies < 1:
        raise ValueError(f"need at least 1 copy, got {n_copies}")
    if source is None:
        source = NoisyStateSpec("noisy_bell_minus", p=0.0, channel="dephasing")
    alice = _alice_meas_block()
    bob = _bob_verdict_block()
    policy = BranchPolicy(CONDITION)
    rounds = []
    for _ in range(n_copies - 1):
        rounds.append(RoundSpec(alice, bob, (0,), (0,), policy, source))
    rounds.append(RoundSpec(alice, bob, (0,), (1,), policy, None))
    return DynamicProtocol(
        f"discriminate-{n_copies}", (2,), (2, 2), source, 1, tuple(rounds), verdict_wire=1
    )


def discrimination_key_reduce(round_index: int, party: str, history: str) -> str:
    """Tie parameters: Alice per round, Bob per (round, her fresh outcome)."""
    if party == "a":
        return ""
    return history.rsplit(";", 1)[-1] if history else ""
