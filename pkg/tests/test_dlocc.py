"""Protocol engine: branch evolution, parameter tables, serialization."""

import numpy as np
import pytest

from dloccsim.channels import NoisyStateSpec, make_state
from dloccsim.circuits import Gate, ParamCircuit, ry_cnot_ladder
from dloccsim.dlocc import (
    ALICE,
    BOB,
    BranchPolicy,
    DynamicProtocol,
    ParamTable,
    RoundSpec,
    build_initial_state,
    condition_on_outcomes,
    execute,
    init_param_table,
    postselect,
    protocol_from_text,
    protocol_to_text,
    reachable_histories,
)
from dloccsim.qmath import CapacityError, fidelity_pure, max_entangled, partial_trace

PHI2 = max_entangled(2)
ISO = NoisyStateSpec("isotropic", p=0.7)
BELL = NoisyStateSpec("sstate", gamma=1.0)  # gamma=1 is a clean Bell pair


def ry(wire, slot=None, angle=None):
    return Gate("ry", (wire,), param_slot=slot, angle=angle)


def one_wire_ry():
    return ParamCircuit(1, (ry(0, slot=0),), 1)


class TestValidation:
    def test_policy_modes(self):
        with pytest.raises(ValueError):
            BranchPolicy("maybe")
        with pytest.raises(ValueError):
            BranchPolicy("postselect")
        with pytest.raises(ValueError):
            BranchPolicy("condition", ((0,),))

    def test_copies_must_fit_window(self):
        with pytest.raises(ValueError):
            DynamicProtocol("x", (2,), (2, 2), ISO, 2, ())

    def test_circuit_dims_must_match_block(self):
        rd = RoundSpec(ry_cnot_ladder(3, 0), None, (), (), condition_on_outcomes())
        with pytest.raises(ValueError):
            DynamicProtocol("x", (2, 2), (2, 2), ISO, 1, (rd,))

    def test_measured_wires_in_range(self):
        rd = RoundSpec(None, None, (2,), (), condition_on_outcomes())
        with pytest.raises(ValueError):
            DynamicProtocol("x", (2, 2), (2, 2), ISO, 1, (rd,))

    def test_accept_pattern_length(self):
        rd = RoundSpec(None, None, (0,), (0,), postselect((0, 0, 0)))
        with pytest.raises(ValueError):
            DynamicProtocol("x", (2, 2), (2, 2), ISO, 1, (rd,))

    def test_refresh_needs_one_wire_per_party(self):
        rd = RoundSpec(None, None, (0, 1), (0,), postselect((0, 0, 0)), refresh=ISO)
        with pytest.raises(ValueError):
            DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (rd,))

    def test_refresh_dims_must_match(self):
        qutrit = NoisyStateSpec("qutrit_isotropic", p=0.5)
        rd = RoundSpec(None, None, (0,), (0,), postselect((0, 0)), refresh=qutrit)
        with pytest.raises(ValueError):
            DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (rd,))

    def test_copies_consumed(self):
        rd_plain = RoundSpec(None, None, (0,), (0,), postselect((0, 0)))
        rd_refresh = RoundSpec(None, None, (0,), (0,), postselect((0, 0)), refresh=ISO)
        p = DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (rd_refresh, rd_refresh, rd_plain))
        assert p.copies_consumed == 4


class TestInitialState:
    def test_pairs_and_ancillas(self):
        # asymmetric source so an A/B wire swap cannot go unnoticed
        src = NoisyStateSpec("unilocal_gad_bell", gamma=0.35, q=1.0)
        p = DynamicProtocol("x", (2, 2, 2), (2, 2, 2), src, 2, ())
        s = build_initial_state(p)
        pair = make_state(src)
        for a, b in ((0, 3), (1, 4)):
            marg = partial_trace(s, (a, b))
            assert np.allclose(marg.op, pair.op)
        anc = partial_trace(s, (2, 5))
        expect = np.zeros((4, 4))
        expect[0, 0] = 1.0
        assert np.allclose(anc.op, expect)

    def test_source_override_dims_checked(self):
        p = DynamicProtocol("x", (2,), (2,), ISO, 1, ())
        qutrit = make_state(NoisyStateSpec("qutrit_isotropic", p=0.5))
        with pytest.raises(ValueError):
            build_initial_state(p, qutrit)

    def test_window_capacity(self, monkeypatch):
        monkeypatch.setenv("DLOCC_MAX_DIM", "8")
        p = DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, ())
        with pytest.raises(CapacityError):
            build_initial_state(p)


class TestExecution:
    def test_weights_conserve_probability(self):
        rd = RoundSpec(None, None, (0,), (0,), condition_on_outcomes())
        p = DynamicProtocol("x", (2,), (2,), ISO, 1, (rd,))
        out = execute(p)
        assert np.isclose(sum(r.weight for r in out.records), 1.0)
        assert np.isclose(out.success_probability, 1.0)

    def test_bob_adapts_to_alice_outcome(self):
        # Bell pair: Alice measures, Bob flips only on outcome 1, so Bob's
        # own measurement is then deterministic.
        rd = RoundSpec(None, one_wire_ry(), (0,), (0,), condition_on_outcomes())
        p = DynamicProtocol("x", (2,), (2,), BELL, 1, (rd,))
        table = ParamTable()
        table.set(0, BOB, "A0", [0.0])
        table.set(0, BOB, "A1", [np.pi])
        out = execute(p, table)
        got = {(r.a_out, r.b_out): r.weight for r in out.records}
        assert np.isclose(got[((0,), (0,))], 0.5)
        assert np.isclose(got[((1,), (0,))], 0.5)
        assert np.isclose(got[((0,), (1,))], 0.0)
        assert np.isclose(got[((1,), (1,))], 0.0)

    def test_history_keys_grow_across_rounds(self):
        rd = RoundSpec(None, None, (0,), (0,), condition_on_outcomes())
        rd2 = RoundSpec(None, None, (1,), (1,), condition_on_outcomes())
        p = DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (rd, rd2))
        assert reachable_histories(p, 1) == ["A0B0", "A0B1", "A1B0", "A1B1"]
        assert len(reachable_histories(p)) == 16
        out = execute(p)
        second = {r.history for r in out.records if r.round_index == 1}
        assert "A0B0;A1B1" in second
        assert all(";" in h for h in second)

    def test_postselect_filters_and_merges(self):
        rd = RoundSpec(None, None, (0,), (0,), postselect((0, 0), (1, 1)))
        tail = RoundSpec(None, None, (), (), condition_on_outcomes())
        p = DynamicProtocol("x", (2, 2), (2, 2), BELL, 2, (rd, tail))
        out = execute(p)
        # Bell pair gives 00 and 11 at weight 1/2 each, both accepted
        assert np.isclose(out.success_probability, 1.0)
        assert out.output_wires == (1, 3)
        assert np.isclose(fidelity_pure(out.conditional_state, PHI2), 1.0)
        # merged branches lose their outcome lineage
        assert {r.history for r in out.records if r.round_index == 1} == {"*;AB"}

    def test_postselect_rejection(self):
        rd = RoundSpec(None, None, (0,), (0,), postselect((0, 1)))
        p = DynamicProtocol("x", (2,), (2,), BELL, 1, (rd,))
        out = execute(p)
        assert out.success_probability == 0.0
        assert out.conditional_state is None
        assert sum(r.weight for r in out.records) == pytest.approx(1.0)

    def test_refresh_injects_fresh_copy(self):
        rd = RoundSpec(None, None, (0,), (0,), postselect((0, 0)), refresh=ISO)
        p = DynamicProtocol("x", (2, 2), (2, 2), BELL, 2, (rd,))
        out = execute(p)
        assert np.isclose(out.success_probability, 0.5)
        # the measured pair was replaced, so all four wires are live again
        assert out.output_wires == (0, 1, 2, 3)
        iso_pair = partial_trace(out.conditional_state, (0, 2))
        bell_pair = partial_trace(out.conditional_state, (1, 3))
        assert np.isclose(fidelity_pure(iso_pair, PHI2), (1 + 3 * 0.7) / 4)
        assert np.isclose(fidelity_pure(bell_pair, PHI2), 1.0)

    def test_execute_is_deterministic(self):
        rng = np.random.default_rng(0)
        alice = ry_cnot_ladder(2, 1)
        rd = RoundSpec(alice, alice, (1,), (1,), postselect((0, 0)))
        p = DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (rd,))
        table = init_param_table(p)
        table = table.with_vector(rng.normal(size=table.n_params))
        a = execute(p, table)
        b = execute(p, table)
        assert a.success_probability == b.success_probability
        assert np.array_equal(a.conditional_state.op, b.conditional_state.op)

    def test_missing_parameters_raise(self):
        rd = RoundSpec(one_wire_ry(), None, (0,), (), condition_on_outcomes())
        p = DynamicProtocol("x", (2,), (2,), ISO, 1, (rd,))
        with pytest.raises(KeyError):
            execute(p, ParamTable())


class TestParamTable:
    def test_vector_roundtrip(self):
        t = ParamTable()
        t.set(0, ALICE, "", [1.0, 2.0])
        t.set(0, BOB, "A0", [3.0])
        assert t.n_params == 3
        assert np.allclose(t.vector(), [1.0, 2.0, 3.0])
        t2 = t.with_vector(np.array([4.0, 5.0, 6.0]))
        assert np.allclose(t2.get(0, BOB, "A0"), [6.0])
        assert np.allclose(t.get(0, BOB, "A0"), [3.0])
        with pytest.raises(ValueError):
            t.with_vector(np.zeros(2))

    def test_reduce_ties_histories(self):
        t = ParamTable(reduce=lambda r, party, h: "")
        t.set(0, ALICE, "", [7.0])
        assert np.allclose(t.get(0, ALICE, "A0B1;A1B0"), [7.0])

    def test_init_param_table_counts(self):
        two = ry_cnot_ladder(2, 0)  # 2 slots
        r0 = RoundSpec(two, two, (0,), (), condition_on_outcomes())
        r1 = RoundSpec(two, two, (1,), (1,), condition_on_outcomes())
        p = DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (r0, r1))
        t = init_param_table(p)
        keys = set(t.keys())
        # round 0: one Alice entry, Bob keyed by Alice's fresh outcome
        assert (0, ALICE, "") in keys
        assert (0, BOB, "A0") in keys and (0, BOB, "A1") in keys
        # round 1: histories A0B/A1B, Bob additionally sees this round's bit
        assert (1, ALICE, "A0B") in keys
        assert (1, BOB, "A1B;A0") in keys
        assert t.n_params == 2 * (1 + 2 + 2 + 4)

    def test_init_skips_frozen_circuits(self):
        frozen = ParamCircuit(1, (ry(0, angle=0.3),), 0)
        rd = RoundSpec(frozen, None, (0,), (), condition_on_outcomes())
        p = DynamicProtocol("x", (2,), (2,), ISO, 1, (rd,))
        assert init_param_table(p).n_params == 0


class TestTextFormat:
    def roundtrip(self, p):
        text = protocol_to_text(p)
        back = protocol_from_text(text)
        assert back == p
        assert protocol_to_text(back) == text
        return back

    def test_roundtrip_postselect_refresh(self):
        blk = ry_cnot_ladder(2, 1)
        rd = RoundSpec(blk, blk, (1,), (1,), postselect((0, 0), (1, 1)), refresh=ISO)
        final = RoundSpec(blk, blk, (0, 1), (0, 1), postselect((0, 0, 0, 0)))
        p = DynamicProtocol("two-stage", (2, 2), (2, 2), ISO, 2, (rd, final))
        self.roundtrip(p)

    def test_roundtrip_condition_verdict(self):
        a = one_wire_ry()
        rd = RoundSpec(a, one_wire_ry(), (0,), (0,), condition_on_outcomes())
        p = DynamicProtocol("guess", (2,), (2,), ISO, 1, (rd,), verdict_wire=0)
        back = self.roundtrip(p)
        assert back.verdict_wire == 0

    def test_shared_circuits_deduplicated(self):
        blk = ry_cnot_ladder(2, 1)
        rd = RoundSpec(blk, blk, (1,), (1,), postselect((0, 0)))
        p = DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (rd,))
        text = protocol_to_text(p)
        assert text.count("[circuit") == 1

    def test_execution_agrees_after_roundtrip(self):
        rng = np.random.default_rng(3)
        blk = ry_cnot_ladder(2, 1)
        rd = RoundSpec(blk, blk, (1,), (1,), postselect((0, 0)))
        p = DynamicProtocol("x", (2, 2), (2, 2), ISO, 2, (rd,))
        back = protocol_from_text(protocol_to_text(p))
        t = init_param_table(p)
        t = t.with_vector(rng.normal(size=t.n_params))
        a, b = execute(p, t), execute(back, t)
        assert a.success_probability == b.success_probability
        assert np.array_equal(a.conditional_state.op, b.conditional_state.op)
