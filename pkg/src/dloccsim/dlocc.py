"""Dynamic LOCC protocol engine.

A protocol is a sequence of rounds on a fixed window of wires, global order
[Alice block | Bob block]. Each round applies Alice's local circuit, measures
some of her wires, applies Bob's circuit (whose parameters may depend on
Alice's fresh outcomes), measures some of his wires, then either postselects
on accepted patterns or branches on all outcomes. A round may finish by
discarding the measured wires and injecting a fresh noisy copy in their
place, which is what makes the protocol dynamic.

Branch evolution is exact: every measurement outcome is enumerated with its
unnormalized weight, rejected branches are recorded but not evolved, and the
whole run is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .channels import NoisyStateSpec, make_state
from .circuits import ParamCircuit, circuit_unitary, parse_circuit, serialize_circuit
from .qmath import (
    CapacityError,
    DensityState,
    apply_unitary,
    basis_state,
    collapse,
    max_dim,
    measure_computational,
    measurement_weights,
    partial_trace,
    permute_wires,
    tensor,
)

POSTSELECT = "postselect"
CONDITION = "condition"
ALICE = "a"
BOB = "b"


@dataclass(frozen=True)
class BranchPolicy:
    """How a round treats measurement branches.

    postselect: keep only branches whose combined outcome (Alice bits then
    Bob bits) matches one of ``accept``; accepted branches are summed/mixed.
    condition: keep every branch, with downstream parameters keyed by the
    outcome history.
    """

    mode: str
    accept: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.mode not in (POSTSELECT, CONDITION):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if self.mode == POSTSELECT and not self.accept:
            raise ValueError("postselect policy needs at least one accepted pattern")
        if self.mode == CONDITION and self.accept:
            raise ValueError("condition policy takes no accept patterns")


def postselect(*patterns: tuple[int, ...]) -> BranchPolicy:
    return BranchPolicy(POSTSELECT, tuple(patterns))


def condition_on_outcomes() -> BranchPolicy:
    return BranchPolicy(CONDITION)


@dataclass(frozen=True)
class RoundSpec:
    """One communication round. Wire indices are party-local."""

    alice_circuit: ParamCircuit | None
    bob_circuit: ParamCircuit | None
    measure_alice: tuple[int, ...]
    measure_bob: tuple[int, ...]
    policy: BranchPolicy
    refresh: NoisyStateSpec | None = None


@dataclass(frozen=True)
class DynamicProtocol:
    """A window of wires plus an ordered list of rounds.

    The initial state holds ``initial_copies`` copies of ``source`` on wire
    pairs (A_i, B_i); remaining wires start in |0>. ``verdict_wire`` (a local
    Bob index) marks which final-round outcome carries a discrimination
    verdict, if any.
    """

    name: str
    alice_dims: tuple[int, ...]
    bob_dims: tuple[int, ...]
    source: NoisyStateSpec
    initial_copies: int
    rounds: tuple[RoundSpec, ...]
    verdict_wire: int | None = None

    def __post_init__(self):
        n_a, n_b = len(self.alice_dims), len(self.bob_dims)
        if not 1 <= self.initial_copies <= min(n_a, n_b):
            raise ValueError(f"initial_copies {self.initial_copies} does not fit the window")
        for r, rd in enumerate(self.rounds):
            for circ, dims, party in (
                (rd.alice_circuit, self.alice_dims, "alice"),
                (rd.bob_circuit, self.bob_dims, "bob"),
            ):
                if circ is not None and circ.dims != dims:
                    raise ValueError(f"round {r} {party} circuit dims {circ.dims} != block {dims}")
            for w in rd.measure_alice:
                if not 0 <= w < n_a:
                    raise ValueError(f"round {r} measures invalid alice wire {w}")
            for w in rd.measure_bob:
                if not 0 <= w < n_b:
                    raise ValueError(f"round {r} measures invalid bob wire {w}")
            n_meas = len(rd.measure_alice) + len(rd.measure_bob)
            if rd.policy.mode == POSTSELECT:
                for pat in rd.policy.accept:
                    if len(pat) != n_meas:
                        raise ValueError(f"round {r} accept pattern {pat} != {n_meas} measured wires")
            if rd.refresh is not None:
                if len(rd.measure_alice) != 1 or len(rd.measure_bob) != 1:
                    raise ValueError(f"round {r}: refresh requires one measured wire per party")
                da, db = rd.refresh.pair_dims()
                if self.alice_dims[rd.measure_alice[0]] != da or self.bob_dims[rd.measure_bob[0]] != db:
                    raise ValueError(f"round {r}: refresh state dims do not match measured wires")

    @property
    def n_alice(self) -> int:
        return len(self.alice_dims)

    @property
    def n_bob(self) -> int:
        return len(self.bob_dims)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.alice_dims + self.bob_dims

    @property
    def copies_consumed(self) -> int:
        return self.initial_copies + sum(1 for rd in self.rounds if rd.refresh is not None)


class ParamTable:
    """Parameters addressed by (round index, party, outcome-history key).

    ``reduce`` optionally maps the full visible history string to a coarser
    key so that builders can tie one vector across many histories; every
    reachable (round, party, history) still resolves to an entry.
    """

    def __init__(self, entries=None, reduce=None):
        self._entries: dict[tuple[int, str, str], np.ndarray] = {}
        if entries:
            for k, v in entries.items():
                self._entries[k] = np.asarray(v, dtype=float)
        self.reduce = reduce

    def key_for(self, round_index: int, party: str, history: str) -> str:
        if self.reduce is None:
            return history
        return self.reduce(round_index, party, history)

    def get(self, round_index: int, party: str, history: str) -> np.ndarray:
        key = self.key_for(round_index, party, history)
        try:
            return self._entries[(round_index, party, key)]
        except KeyError:
            raise KeyError(
                f"no parameters for round {round_index}, party {party!r}, key {key!r}"
            ) from None

    def set(self, round_index: int, party: str, key: str, values) -> None:
        self._entries[(round_index, party, key)] = np.asarray(values, dtype=float)

    def keys(self):
        return self._entries.keys()

    def items(self):
        return self._entries.items()

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self._entries.values())

    def vector(self) -> np.ndarray:
        if not self._entries:
            return np.zeros(0)
        return np.concatenate([v for v in self._entries.values()])

    def with_vector(self, vec: np.ndarray) -> "ParamTable":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {vec.shape}")
        out = ParamTable(reduce=self.reduce)
        pos = 0
        for k, v in self._entries.items():
            out._entries[k] = vec[pos : pos + v.size].copy()
            pos += v.size
        return out

    def copy(self) -> "ParamTable":
        return self.with_vector(self.vector())


EMPTY_PARAMS = ParamTable()


@dataclass(frozen=True)
class BranchRecord:
    round_index: int
    history: str
    a_out: tuple[int, ...]
    b_out: tuple[int, ...]
    weight: float
    accepted: bool


@dataclass(frozen=True)
class RunOutcome:
    """Result of executing a protocol.

    ``success_probability`` sums the accepted leaf weights;
    ``conditional_state`` is the normalized mixture of accepted leaves on
    ``output_wires`` (None when nothing was accepted). ``records`` lists
    every branch of every round with its unnormalized weight.
    """

    success_probability: float
    conditional_state: DensityState | None
    records: tuple[BranchRecord, ...]
    output_wires: tuple[int, ...]


def _outcome_token(a_out: tuple[int, ...], b_out: tuple[int, ...]) -> str:
    return "A" + "".join(map(str, a_out)) + "B" + "".join(map(str, b_out))


def _extend(history: str, token: str) -> str:
    return token if not history else history + ";" + token


def build_initial_state(p: DynamicProtocol, source_state: DensityState | None = None) -> DensityState:
    """Copies of the source on pairs (A_i, B_i), |0> on the remaining wires."""
    copy = source_state if source_state is not None else make_state(p.source)
    if copy.dims != (p.alice_dims[0], p.bob_dims[0]):
        raise ValueError(f"source dims {copy.dims} do not match the first wire pair")
    total = int(np.prod(p.dims))
    if total > max_dim():
        raise CapacityError(f"protocol window dimension {total} exceeds cap {max_dim()}")
    c = p.initial_copies
    state = copy
    for _ in range(c - 1):
        state = tensor(state, copy)
    anc_dims = tuple(p.alice_dims[c:]) + tuple(p.bob_dims[c:])
    if anc_dims:
        state = tensor(state, basis_state((0,) * len(anc_dims), anc_dims))
    # current order: A0 B0 A1 B1 ... A_{c-1} B_{c-1}, then leftover A block, B block
    pos: dict[tuple[str, int], int] = {}
    for i in range(c):
        pos[("A", i)] = 2 * i
        pos[("B", i)] = 2 * i + 1
    nxt = 2 * c
    for i in range(c, p.n_alice):
        pos[("A", i)] = nxt
        nxt += 1
    for i in range(c, p.n_bob):
        pos[("B", i)] = nxt
        nxt += 1
    order = tuple(pos[("A", i)] for i in range(p.n_alice)) + tuple(
        pos[("B", i)] for i in range(p.n_bob)
    )
    return permute_wires(state, order)


def _apply_party_circuit(
    state: DensityState,
    circ: ParamCircuit | None,
    params: ParamTable,
    round_index: int,
    party: str,
    history: str,
    wire_offset: int,
) -> DensityState:
    if circ is None or not circ.gates:
        return state
    vec = params.get(round_index, party, history) if circ.n_params > 0 else None
    u = circuit_unitary(circ, vec)
    wires = tuple(range(wire_offset, wire_offset + circ.n_wires))
    return apply_unitary(state, u, wires)


def _refresh(
    state: DensityState,
    measured: tuple[int, ...],
    fresh: DensityState,
) -> DensityState:
    n = len(state.dims)
    keep = tuple(w for w in range(n) if w not in measured)
    traced = partial_trace(state, keep)
    combined = tensor(traced, fresh)
    rank = {w: i for i, w in enumerate(keep)}
    m = len(keep)
    order = []
    for w in range(n):
        if w == measured[0]:
            order.append(m)
        elif w == measured[1]:
            order.append(m + 1)
        else:
            order.append(rank[w])
    return permute_wires(combined, tuple(order))


@dataclass
class _Branch:
    key_history: str
    lineage: str
    state: DensityState


def execute(
    p: DynamicProtocol,
    params: ParamTable | None = None,
    *,
    source_override: DensityState | None = None,
    initial_override: DensityState | None = None,
) -> RunOutcome:
    """Run the protocol exactly, enumerating every measurement branch.

    ``source_override`` replaces the protocol's source state for the initial
    copies and for every refresh (used by discrimination, where the source is
    the unknown hypothesis). ``initial_override`` replaces the whole initial
    window state.
    """
    params = params if params is not None else EMPTY_PARAMS
    fresh = source_override if source_override is not None else None
    if initial_override is not None:
        if initial_override.dims != p.dims:
            raise ValueError(f"initial state dims {initial_override.dims} != window {p.dims}")
        state0 = initial_override
    else:
        state0 = build_initial_state(p, fresh)
    needs_fresh = any(rd.refresh is not None for rd in p.rounds)
    fresh_cache: dict[NoisyStateSpec, DensityState] = {}
    if needs_fresh:
        for rd in p.rounds:
            if rd.refresh is not None and rd.refresh not in fresh_cache:
                fresh_cache[rd.refresh] = fresh if fresh is not None else make_state(rd.refresh)

    branches = [_Branch("", "", state0)]
    records: list[BranchRecord] = []
    collapsed: set[int] = set()
    n_a = p.n_alice

    for r, rd in enumerate(p.rounds):
        a_wires = tuple(w for w in rd.measure_alice)
        b_wires = tuple(n_a + w for w in rd.measure_bob)
        collapsed.update(a_wires)
        collapsed.update(b_wires)
        kept: list[tuple[str, str, DensityState]] = []
        for br in branches:
            st = _apply_party_circuit(br.state, rd.alice_circuit, params, r, ALICE, br.key_history, 0)
            if rd.policy.mode == POSTSELECT:
                # Bob cannot adapt to this round's outcomes (the round only
                # filters), so both circuits commute past the measurements:
                # apply both, then weigh every joint outcome in one pass and
                # collapse only the accepted patterns.
                st = _apply_party_circuit(st, rd.bob_circuit, params, r, BOB, br.key_history, n_a)
                wtab = measurement_weights(st, a_wires + b_wires)
                n_al = len(a_wires)
                for outcome in product(*(range(p.dims[w]) for w in a_wires + b_wires)):
                    a_out, b_out = outcome[:n_al], outcome[n_al:]
                    token = _outcome_token(a_out, b_out)
                    accepted = outcome in rd.policy.accept
                    records.append(
                        BranchRecord(r, _extend(br.lineage, token), a_out, b_out, wtab[outcome], accepted)
                    )
                    if accepted and wtab[outcome] > 0.0:
                        kept.append(
                            (
                                br.key_history,
                                _extend(br.lineage, token),
                                collapse(st, a_wires + b_wires, outcome),
                            )
                        )
                continue
            # condition mode: branch on Alice's outcomes first so Bob's
            # circuit can depend on them
            if a_wires:
                a_branches = measure_computational(st, a_wires)
            else:
                a_branches = [((), st)]
            for a_out, st_a in a_branches:
                bob_key = br.key_history if not a_wires else _extend(br.key_history, "A" + "".join(map(str, a_out)))
                if st_a.weight <= 0.0 and (a_wires or b_wires):
                    # dead branch: record every downstream outcome at weight 0
                    for b_out in product(*(range(p.dims[w]) for w in b_wires)):
                        token = _outcome_token(a_out, b_out)
                        records.append(
                            BranchRecord(r, _extend(br.lineage, token), a_out, b_out, 0.0, True)
                        )
                    continue
                st_b = _apply_party_circuit(st_a, rd.bob_circuit, params, r, BOB, bob_key, n_a)
                if b_wires:
                    b_branches = measure_computational(st_b, b_wires)
                else:
                    b_branches = [((), st_b)]
                for b_out, st_ab in b_branches:
                    token = _outcome_token(a_out, b_out)
                    lineage = _extend(br.lineage, token)
                    records.append(BranchRecord(r, lineage, a_out, b_out, st_ab.weight, True))
                    if st_ab.weight > 0.0:
                        kept.append((_extend(br.key_history, token), lineage, st_ab))

        measured = a_wires + b_wires
        if rd.refresh is not None:
            fr = fresh_cache[rd.refresh]
            kept = [(k, lin, _refresh(st, measured, fr)) for k, lin, st in kept]
            collapsed.difference_update(measured)

        if rd.policy.mode == POSTSELECT:
            # accepted branches are indistinguishable downstream: mix them
            groups: dict[str, list[tuple[str, DensityState]]] = {}
            for k, lin, st in kept:
                groups.setdefault(k, []).append((lin, st))
            branches = []
            for k in sorted(groups):
                members = groups[k]
                if len(members) == 1:
                    lin, st = members[0]
                    branches.append(_Branch(k, lin, st))
                else:
                    op = members[0][1].op.copy()
                    w = members[0][1].weight
                    for _, st in members[1:]:
                        op = op + st.op
                        w += st.weight
                    lin0 = members[0][0]
                    prefix = lin0.rsplit(";", 1)[0] if ";" in lin0 else ""
                    branches.append(_Branch(k, _extend(prefix, "*"), DensityState(st.dims, op, w)))
        else:
            branches = [_Branch(k, lin, st) for k, lin, st in kept]

        if not branches:
            return RunOutcome(0.0, None, tuple(records), ())

    out_wires = tuple(w for w in range(len(p.dims)) if w not in collapsed)
    total_w = sum(br.state.weight for br in branches)
    if total_w <= 0.0:
        return RunOutcome(0.0, None, tuple(records), out_wires)
    acc_op = None
    for br in branches:
        reduced = partial_trace(br.state, out_wires)
        acc_op = reduced.op if acc_op is None else acc_op + reduced.op
    out_dims = tuple(p.dims[w] for w in out_wires)
    cond = DensityState(out_dims, acc_op / total_w, 1.0)
    return RunOutcome(float(total_w), cond, tuple(records), out_wires)


@dataclass(frozen=True)
class DiscriminationResult:
    success: float
    p_correct: tuple[float, float]
    priors: tuple[float, float]


def _verdict_distribution(p: DynamicProtocol, outcome: RunOutcome) -> np.ndarray:
    last = len(p.rounds) - 1
    final = p.rounds[last]
    wire = p.verdict_wire if p.verdict_wire is not None else final.measure_bob[-1]
    if wire not in final.measure_bob:
        raise ValueError("the verdict wire is not measured in the final round")
    pos = final.measure_bob.index(wire)
    d = p.bob_dims[wire]
    dist = np.zeros(d)
    for rec in outcome.records:
        if rec.round_index == last and rec.accepted:
            dist[rec.b_out[pos]] += rec.weight
    return dist


def execute_discrimination(
    p: DynamicProtocol,
    params: ParamTable | None,
    state0: DensityState | NoisyStateSpec,
    state1: DensityState | NoisyStateSpec,
    priors: tuple[float, float] = (0.5, 0.5),
) -> DiscriminationResult:
    """Average success probability of guessing which hypothesis was supplied.

    The protocol must branch on outcomes (no postselection) and measure its
    verdict wire in the final round; verdict value j means "hypothesis j".
    """
    if abs(priors[0] + priors[1] - 1.0) > 1e-12 or min(priors) < 0:
        raise ValueError(f"priors must be a distribution, got {priors}")
    for rd in p.rounds:
        if rd.policy.mode != CONDITION:
            raise ValueError("discrimination protocols must condition on outcomes")
    if isinstance(state0, NoisyStateSpec):
        state0 = make_state(state0)
    if isinstance(state1, NoisyStateSpec):
        state1 = make_state(state1)
    out0 = execute(p, params, source_override=state0)
    out1 = execute(p, params, source_override=state1)
    d0 = _verdict_distribution(p, out0)
    d1 = _verdict_distribution(p, out1)
    p0 = float(d0[0])
    p1 = float(d1[1:].sum())
    return DiscriminationResult(priors[0] * p0 + priors[1] * p1, (p0, p1), tuple(priors))


def init_param_table(p: DynamicProtocol, reduce=None, fill: float = 0.0) -> ParamTable:
    """A complete ParamTable for ``p`` with every entry set to ``fill``.

    Creates one vector per (round, party, key) that execute can look up:
    Alice's keys are the histories entering the round; Bob's additionally
    carry Alice's same-round outcomes when the round conditions on them.
    """
    table = ParamTable(reduce=reduce)
    for r, rd in enumerate(p.rounds):
        hists = reachable_histories(p, r)
        if rd.alice_circuit is not None and rd.alice_circuit.n_params > 0:
            for h in hists:
                key = table.key_for(r, ALICE, h)
                if (r, ALICE, key) not in table.keys():
                    table.set(r, ALICE, key, np.full(rd.alice_circuit.n_params, fill))
        if rd.bob_circuit is not None and rd.bob_circuit.n_params > 0:
            if rd.policy.mode == CONDITION and rd.measure_alice:
                tokens = [
                    "A" + "".join(map(str, a))
                    for a in product(*(range(p.alice_dims[w]) for w in rd.measure_alice))
                ]
                bob_hists = [_extend(h, t) for h in hists for t in tokens]
            else:
                bob_hists = hists
            for h in bob_hists:
                key = table.key_for(r, BOB, h)
                if (r, BOB, key) not in table.keys():
                    table.set(r, BOB, key, np.full(rd.bob_circuit.n_params, fill))
    return table


def reachable_histories(p: DynamicProtocol, max_rounds: int | None = None) -> list[str]:
    """Outcome-history keys reachable after the first ``max_rounds`` rounds."""
    n = len(p.rounds) if max_rounds is None else min(max_rounds, len(p.rounds))
    keys = [""]
    for r in range(n):
        rd = p.rounds[r]
        if rd.policy.mode == POSTSELECT:
            continue
        a_ranges = [range(p.alice_dims[w]) for w in rd.measure_alice]
        b_ranges = [range(p.bob_dims[w]) for w in rd.measure_bob]
        tokens = [
            _outcome_token(a, b)
            for a in product(*a_ranges)
            for b in product(*b_ranges)
        ]
        keys = [_extend(k, t) for k in keys for t in tokens]
    return keys


# ---------------------------------------------------------------------------
# protocol serialization


def _spec_to_text(spec: NoisyStateSpec) -> str:
    parts = [f"family={spec.family}"]
    for name in ("gamma", "p", "q"):
        v = getattr(spec, name)
        if v is not None:
            parts.append(f"{name}={v!r}")
    if spec.channel is not None:
        parts.append(f"channel={spec.channel}")
    return " ".join(parts)


def _spec_from_text(text: str) -> NoisyStateSpec:
    kw: dict = {}
    for tok in text.split():
        k, v = tok.split("=", 1)
        kw[k] = v if k in ("family", "channel") else float(v)
    return NoisyStateSpec(**kw)


def protocol_to_text(p: DynamicProtocol) -> str:
    """Structured text form of a protocol; stable under a parse round trip."""
    circuits: list[ParamCircuit] = []

    def ref(c: ParamCircuit | None) -> str:
        if c is None:
            return "-"
        for i, known in enumerate(circuits):
            if known == c:
                return f"c{i}"
        circuits.append(c)
        return f"c{len(circuits) - 1}"

    lines = [
        "[protocol]",
        f"name = {p.name}",
        "alice_dims = " + ",".join(map(str, p.alice_dims)),
        "bob_dims = " + ",".join(map(str, p.bob_dims)),
        f"source = {_spec_to_text(p.source)}",
        f"initial_copies = {p.initial_copies}",
        f"verdict_wire = {'-' if p.verdict_wire is None else p.verdict_wire}",
    ]
    round_blocks = []
    for i, rd in enumerate(p.rounds):
        block = [
            f"[round {i}]",
            f"alice = {ref(rd.alice_circuit)}",
            f"bob = {ref(rd.bob_circuit)}",
            "measure_alice = " + (",".join(map(str, rd.measure_alice)) or "-"),
            "measure_bob = " + (",".join(map(str, rd.measure_bob)) or "-"),
        ]
        if rd.policy.mode == POSTSELECT:
            pats = "|".join("".join(map(str, pat)) for pat in rd.policy.accept)
            block.append(f"policy = postselect {pats}")
        else:
            block.append("policy = condition")
        block.append(f"refresh = {'-' if rd.refresh is None else _spec_to_text(rd.refresh)}")
        round_blocks.append("\n".join(block))
    circuit_blocks = []
    for i, c in enumerate(circuits):
        circuit_blocks.append(f"[circuit c{i}]\n" + serialize_circuit(c).rstrip("\n"))
    return "\n\n".join(["\n".join(lines)] + round_blocks + circuit_blocks) + "\n"


def protocol_from_text(text: str) -> DynamicProtocol:
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    order: list[str] = []
    for raw in text.splitlines():
        ln = raw.strip()
        if not ln or ln.startswith("#"):
            continue
        if ln.startswith("[") and ln.endswith("]"):
            name = ln[1:-1]
            sections[name] = []
            order.append(name)
            current = sections[name]
        else:
            if current is None:
                raise ValueError(f"content outside any section: {ln!r}")
            current.append(ln)

    def kv(lines: list[str]) -> dict[str, str]:
        out = {}
        for ln in lines:
            k, v = ln.split("=", 1)
            out[k.strip()] = v.strip()
        return out

    circuits: dict[str, ParamCircuit] = {}
    for name in order:
        if name.startswith("circuit "):
            circuits[name.split()[1]] = parse_circuit("\n".join(sections[name]))

    head = kv(sections["protocol"])
    rounds = []
    idx = 0
    while f"round {idx}" in sections:
        fields = kv(sections[f"round {idx}"])

        def circ(refname: str) -> ParamCircuit | None:
            return None if refname == "-" else circuits[refname]

        def wires(s: str) -> tuple[int, ...]:
            return () if s == "-" else tuple(int(x) for x in s.split(","))

        pol = fields["policy"].split()
        if pol[0] == "postselect":
            policy = BranchPolicy(POSTSELECT, tuple(tuple(int(ch) for ch in pat) for pat in pol[1].split("|")))
        else:
            policy = BranchPolicy(CONDITION)
        refresh = None if fields["refresh"] == "-" else _spec_from_text(fields["refresh"])
        rounds.append(
            RoundSpec(
                circ(fields["alice"]),
                circ(fields["bob"]),
                wires(fields["measure_alice"]),
                wires(fields["measure_bob"]),
                policy,
                refresh,
            )
        )
        idx += 1
    return DynamicProtocol(
        name=head["name"],
        alice_dims=tuple(int(x) for x in head["alice_dims"].split(",")),
        bob_dims=tuple(int(x) for x in head["bob_dims"].split(",")),
        source=_spec_from_text(head["source"]),
        initial_copies=int(head["initial_copies"]),
        rounds=tuple(rounds),
        verdict_wire=None if head["verdict_wire"] == "-" else int(head["verdict_wire"]),
    )
