"""Loss evaluation, exact gradients, and the multi-restart optimizer."""

import numpy as np
import pytest

from dloccsim.channels import NoisyStateSpec, make_state
from dloccsim.circuits import Gate, ParamCircuit
from dloccsim.dlocc import (
    DynamicProtocol,
    ParamTable,
    RoundSpec,
    condition_on_outcomes,
    init_param_table,
    postselect,
)
from dloccsim.protocols import (
    build_discrimination_protocol,
    build_gad_ansatz_protocol,
    build_qutrit_protocol,
    discrimination_key_reduce,
)
from dloccsim.qmath import max_entangled
from dloccsim.train import (
    FD_STEP,
    LossSpec,
    OptimizerConfig,
    TrainReport,
    ZeroAcceptance,
    evaluate_loss,
    gradient,
    optimize,
    serialize_report,
)

PHI2 = max_entangled(2)
ISO = NoisyStateSpec("isotropic", p=0.7)
BELL_PLUS = NoisyStateSpec("sstate", gamma=1.0)
BELL_MINUS = NoisyStateSpec("noisy_bell_minus", p=0.0, channel="dephasing")


def distill_spec(n_copies=2, source=None):
    proto = build_gad_ansatz_protocol(n_copies, source=source or ISO)
    return LossSpec("infidelity", proto, target=PHI2)


def discriminate_spec(n_copies=1):
    proto = build_discrimination_protocol(n_copies)
    return LossSpec(
        "discrimination", proto, state0=make_state(BELL_PLUS), state1=make_state(BELL_MINUS)
    )


def random_table(proto_or_spec, seed, reduce=None):
    proto = getattr(proto_or_spec, "protocol", proto_or_spec)
    t = init_param_table(proto, reduce=reduce)
    rng = np.random.default_rng(seed)
    return t.with_vector(rng.uniform(0, 2 * np.pi, t.n_params))


def fd_reference(spec, params, h=1e-6):
    x = params.vector()
    g = np.zeros_like(x)
    for i in range(x.size):
        x[i] += h
        lp = evaluate_loss(spec, params.with_vector(x))
        x[i] -= 2 * h
        lm = evaluate_loss(spec, params.with_vector(x))
        x[i] += h
        g[i] = (lp - lm) / (2 * h)
    return g


class TestLoss:
    def test_kind_validation(self):
        proto = build_gad_ansatz_protocol(2)
        with pytest.raises(ValueError):
            LossSpec("fidelity", proto, target=PHI2)
        with pytest.raises(ValueError):
            LossSpec("infidelity", proto)
        with pytest.raises(ValueError):
            LossSpec("discrimination", proto, state0=make_state(BELL_PLUS))

    def test_perfect_copies_give_zero_loss(self):
        spec = distill_spec(source=BELL_PLUS)
        zeros = init_param_table(spec.protocol)
        assert evaluate_loss(spec, zeros) == pytest.approx(0.0, abs=1e-12)

    def test_zero_acceptance_is_worst_case(self):
        # a Bell pair puts exactly zero weight on anticorrelated outcomes, so
        # postselecting (0,1) rejects every branch at the zero-angle point
        alice = ParamCircuit(1, (Gate("ry", (0,), param_slot=0),), 1)
        rd = RoundSpec(alice, None, (0,), (0,), postselect((0, 1)))
        proto = DynamicProtocol("reject-all", (2,), (2,), BELL_PLUS, 1, (rd,))
        spec = LossSpec("infidelity", proto, target=np.array([1.0, 0.0]))
        t = init_param_table(proto)
        assert evaluate_loss(spec, t) == 1.0
        with pytest.raises(ZeroAcceptance):
            evaluate_loss(spec, t, raise_zero=True)
        assert np.array_equal(gradient(spec, t), np.zeros(1))

    def test_discrimination_loss_range(self):
        spec = discriminate_spec()
        t = random_table(spec, 0, reduce=discrimination_key_reduce)
        loss = evaluate_loss(spec, t)
        assert 0.0 <= loss <= 1.0


class TestGradient:
    def test_infidelity_gradient_matches_fd(self):
        spec = distill_spec()
        t = random_table(spec, 1)
        assert np.allclose(gradient(spec, t), fd_reference(spec, t), atol=1e-6)

    def test_discrimination_gradient_matches_fd(self):
        spec = discriminate_spec()
        t = random_table(spec, 2, reduce=discrimination_key_reduce)
        assert np.allclose(gradient(spec, t), fd_reference(spec, t), atol=1e-6)

    def test_qutrit_slots_fall_back_to_fd(self):
        proto = build_qutrit_protocol(2, 0.7)
        spec = LossSpec("infidelity", proto, target=max_entangled(3))
        t = random_table(proto, 3)
        g = gradient(spec, t)
        assert np.allclose(g, fd_reference(spec, t), atol=1e-4)
        # forcing the shift rule on Givens slots must disagree somewhere
        assert not np.allclose(gradient(spec, t, method="shift"), g, atol=1e-3)

    def test_method_validation(self):
        spec = distill_spec()
        with pytest.raises(ValueError):
            gradient(spec, random_table(spec, 4), method="adjoint")

    def test_gradient_is_deterministic(self):
        spec = distill_spec()
        t = random_table(spec, 5)
        assert np.array_equal(gradient(spec, t), gradient(spec, t))


class TestOptimize:
    def cfg(self, **kw):
        base = dict(step_size=0.1, max_iters=60, restarts=2, rng_seed=7)
        base.update(kw)
        return OptimizerConfig(**base)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(method="sgd")
        with pytest.raises(ValueError):
            OptimizerConfig(max_iters=0)
        with pytest.raises(ValueError):
            OptimizerConfig(patience=0)

    def test_trains_single_pair_rotation(self):
        # 1-copy discrimination of orthogonal Bell states is learnable to ~1
        spec = discriminate_spec()
        template = init_param_table(spec.protocol, reduce=discrimination_key_reduce)
        cfg = self.cfg(max_iters=200, restarts=3, target_loss=1e-4, patience=40)
        rep = optimize(spec, cfg, template=template)
        assert rep.best_loss < 1e-3

    def test_determinism_across_runs(self):
        spec = distill_spec()
        a = optimize(spec, self.cfg(max_iters=25))
        b = optimize(spec, self.cfg(max_iters=25))
        assert a.best_loss == b.best_loss
        assert np.array_equal(a.best_params.vector(), b.best_params.vector())
        assert a.loss_trace == b.loss_trace

    def test_warm_start_never_regresses(self):
        spec = distill_spec()
        first = optimize(spec, self.cfg(max_iters=40))
        resumed = optimize(
            spec, self.cfg(max_iters=5, restarts=1, rng_seed=99), inits=[first.best_params]
        )
        assert resumed.best_loss <= first.best_loss + 1e-12

    def test_warm_start_layout_checked(self):
        spec = distill_spec()
        wrong = ParamTable()
        wrong.set(0, "a", "", [0.0])
        with pytest.raises(ValueError):
            optimize(spec, self.cfg(), inits=[wrong])

    def test_target_loss_stops_early(self):
        spec = distill_spec(source=BELL_PLUS)
        rep = optimize(spec, self.cfg(max_iters=500, target_loss=0.5))
        assert rep.best_loss <= 0.5
        assert len(rep.loss_trace) < 500

    def test_patience_stops_on_plateau(self):
        spec = distill_spec()
        rep = optimize(spec, self.cfg(max_iters=500, restarts=1, patience=5))
        assert len(rep.loss_trace) < 500

    def test_zero_param_protocol(self):
        proto = DynamicProtocol(
            "fixed",
            (2,),
            (2,),
            ISO,
            1,
            (RoundSpec(None, None, (0,), (), condition_on_outcomes()),),
        )
        spec = LossSpec("infidelity", proto, target=np.array([1.0, 0.0]))
        rep = optimize(spec, self.cfg())
        assert rep.best_params.n_params == 0
        assert rep.loss_trace == [rep.best_loss]

    def test_serialize_report(self):
        rep = TrainReport(ParamTable(), 0.25, [0.5, 0.25], 1.5, seed=3)
        text = serialize_report(rep)
        assert "best_loss = 0.25" in text
        assert "0,0.5" in text and "1,0.25" in text
        assert "seed = 3" in text
