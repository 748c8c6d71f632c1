"""Higher-level training recipes built on the engine and optimizer.

The four-pair isotropic chain is trained stage by stage: first the final
merge round on four fresh copies, then each inserted feed-forward round
against the frozen tail (with the already-trained prefix cached as a
state), and finally a few retuning passes over the merge round. Every
stage is one optimizer call with the same budget, so the total training
effort is proportional to the number of copies consumed.

Discrimination chains are trained by copy count with warm starts: the
n-copy table is seeded from the (n-1)-copy optimum embedded so that the
extra round initially passes the verdict register through untouched, which
makes the trained success non-decreasing in n by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    NoisyStateSpec,
    bell_phi_minus,
    bell_phi_plus,
    channel_by_name,
    make_state,
)
from .circuits import bind_parameters, ry_cnot_ladder
from .dlocc import (
    ALICE,
    BOB,
    DynamicProtocol,
    ParamTable,
    RoundSpec,
    build_initial_state,
    execute,
    init_param_table,
    postselect,
)
from .protocols import (
    build_discrimination_protocol,
    build_gad_ansatz_protocol,
    build_iso_dynamic_protocol,
    build_qutrit_protocol,
    discrimination_key_reduce,
)
from .qmath import DensityState, fidelity_pure, max_entangled, tensor
from .train import LossSpec, OptimizerConfig, TrainReport, optimize

PHI2 = max_entangled(2)


# ---------------------------------------------------------------------------
# plain (unstaged) distillation training


def train_distillation(
    protocol: DynamicProtocol, cfg: OptimizerConfig, target: np.ndarray | None = None
) -> TrainReport:
    """Train all rounds of a postselected distillation protocol jointly."""
    d = protocol.alice_dims[0]
    spec = LossSpec("infidelity", protocol, target=target if target is not None else max_entangled(d))
    return optimize(spec, cfg)


def train_two_pair_chain(
    source: NoisyStateSpec, n_copies: int, cfg: OptimizerConfig
) -> tuple[float, TrainReport]:
    """Trained fidelity of the two-pair RY/CNOT chain on ``source`` copies."""
    proto = build_gad_ansatz_protocol(n_copies, source)
    rep = train_distillation(proto, cfg)
    return 1.0 - rep.best_loss, rep


def train_qutrit_chain(n_copies: int, p: float, cfg: OptimizerConfig) -> tuple[float, TrainReport]:
    proto = build_qutrit_protocol(n_copies, p)
    rep = train_distillation(proto, cfg, target=max_entangled(3))
    return 1.0 - rep.best_loss, rep


# ---------------------------------------------------------------------------
# staged training of the four-pair isotropic window


def _iso_rounds(p: float, insert_layers: int, final_layers: int) -> tuple[RoundSpec, RoundSpec]:
    source = NoisyStateSpec("isotropic", p=p)
    ins_block = ry_cnot_ladder(4, insert_layers)
    fin_block = ry_cnot_ladder(4, final_layers)
    insert = RoundSpec(ins_block, ins_block, (3,), (3,), postselect((0, 0)), source)
    final = RoundSpec(fin_block, fin_block, (1, 2, 3), (1, 2, 3), postselect((0,) * 6), None)
    return insert, final


def _freeze(rd: RoundSpec, table: ParamTable) -> RoundSpec:
    return RoundSpec(
        bind_parameters(rd.alice_circuit, table.get(0, ALICE, "")),
        bind_parameters(rd.bob_circuit, table.get(0, BOB, "")),
        rd.measure_alice,
        rd.measure_bob,
        rd.policy,
        rd.refresh,
    )


@dataclass
class StagedIsoResult:
    fidelity: float
    success_probability: float
    protocol: DynamicProtocol
    params: ParamTable
    stage_losses: list[float] = field(default_factory=list)
    wall_time: float = 0.0


def train_iso_dynamic_staged(
    n_copies: int,
    p: float,
    seed: int = 0,
    stage_iters: int = 150,
    first_restarts: int = 4,
    insert_layers: int = 1,
    final_layers: int = 3,
    patience: int | None = 40,
) -> StagedIsoResult:
    """Stagewise training of the n-copy four-pair isotropic protocol.

    Runs exactly ``n_copies`` optimizer calls of equal budget: one initial
    fit of the merge round, one per inserted round, and three retuning
    passes of the merge round at the end.
    """
    if n_copies < 4:
        raise ValueError(f"the four-pair window needs n >= 4 copies, got {n_copies}")
    t0 = time.perf_counter()
    source = NoisyStateSpec("isotropic", p=p)
    insert, final = _iso_rounds(p, insert_layers, final_layers)
    window = DynamicProtocol("iso-stage-final", (2,) * 4, (2,) * 4, source, 4, (final,))

    def stage_cfg(idx: int, restarts: int) -> OptimizerConfig:
        return OptimizerConfig(
            max_iters=stage_iters,
            restarts=restarts,
            rng_seed=seed * 1009 + idx,
            patience=patience,
        )

    fresh4 = build_initial_state(window)
    stage_losses: list[float] = []
    spec = LossSpec("infidelity", window, target=PHI2, initial_state=fresh4)
    rep = optimize(spec, stage_cfg(0, first_restarts))
    final_params = rep.best_params
    stage_losses.append(rep.best_loss)

    prefix: DensityState | None = None
    insert_param_list: list[ParamTable] = []
    warm: ParamTable | None = None
    for k in range(n_copies - 4):
        frozen_final = _freeze(final, final_params)
        stage = DynamicProtocol(
            f"iso-stage-insert-{k}", (2,) * 4, (2,) * 4, source, 4, (insert, frozen_final)
        )
        spec = LossSpec(
            "infidelity", stage, target=PHI2,
            initial_state=prefix if prefix is not None else fresh4,
        )
        inits = [warm] if warm is not None else None
        rep = optimize(spec, stage_cfg(1 + k, 1), inits=inits)
        stage_losses.append(rep.best_loss)
        insert_param_list.append(rep.best_params)
        warm = rep.best_params
        # absorb the newly trained round into the cached prefix state
        frozen_insert = _freeze(insert, rep.best_params)
        step = DynamicProtocol("iso-prefix", (2,) * 4, (2,) * 4, source, 4, (frozen_insert,))
        prefix = execute(step, initial_override=prefix).conditional_state

    for j in range(3):
        spec = LossSpec(
            "infidelity", window, target=PHI2,
            initial_state=prefix if prefix is not None else fresh4,
        )
        rep = optimize(spec, stage_cfg(100 + j, 1), inits=[final_params])
        final_params = rep.best_params
        stage_losses.append(rep.best_loss)

    full = build_iso_dynamic_protocol(n_copies, p, insert_layers, final_layers)
    table = init_param_table(full)
    for r, stage_params in enumerate(insert_param_list):
        table.set(r, ALICE, "", stage_params.get(0, ALICE, ""))
        table.set(r, BOB, "", stage_params.get(0, BOB, ""))
    last = len(full.rounds) - 1
    table.set(last, ALICE, "", final_params.get(0, ALICE, ""))
    table.set(last, BOB, "", final_params.get(0, BOB, ""))
    out = execute(full, table)
    fid = fidelity_pure(out.conditional_state, PHI2)
    return StagedIsoResult(
        fid, out.success_probability, full, table, stage_losses, time.perf_counter() - t0
    )


# ---------------------------------------------------------------------------
# discrimination


def noisy_bell_pair(channel_kind: str, param: float, q: float | None = None, minus: bool = False) -> DensityState:
    """A Bell pair with the named channel applied to both halves."""
    phi = bell_phi_minus() if minus else bell_phi_plus()
    base = DensityState((2, 2), np.outer(phi, phi.conj()), 1.0)
    ch = channel_by_name(channel_kind, param, q)
    return ch.apply(ch.apply(base, (0,)), (1,))


def helstrom_bound(state0: DensityState, state1: DensityState, n_copies: int, priors=(0.5, 0.5)) -> float:
    """Optimal global success probability on n copies of each hypothesis."""
    s0, s1 = state0, state1
    for _ in range(n_copies - 1):
        s0 = tensor(s0, state0)
        s1 = tensor(s1, state1)
    d0 = DensityState(s0.dims, priors[0] * s0.op / s0.weight, priors[0])
    d1 = DensityState(s1.dims, priors[1] * s1.op / s1.weight, priors[1])
    diff = d0.op - d1.op
    evals = np.linalg.eigvalsh(diff)
    return float(0.5 * (1.0 + np.abs(evals).sum()))


_PROTECT = np.array([0.0, 0.0, 0.0, -np.pi / 2, 0.0, np.pi / 2])


def _warm_embed(prev: ParamTable, proto: DynamicProtocol) -> ParamTable:
    """Seed an n-copy table from the (n-1)-copy optimum.

    The old final round becomes the last copy round unchanged; the new
    verdict round is initialized so the CNOT is conjugated into a phase on
    the verdict wire, leaving its outcome distribution exactly as before.
    """
    table = init_param_table(proto, reduce=discrimination_key_reduce)
    last = len(proto.rounds) - 1
    for (r, party, key), vec in prev.items():
        table.set(r, party, key, vec)
    for key in ("A0", "A1"):
        table.set(last, BOB, key, _PROTECT)
    return table


@dataclass
class DiscriminationPoint:
    n_copies: int
    success: float
    helstrom: float
    report: TrainReport


def train_discrimination_chain(
    state0: DensityState,
    state1: DensityState,
    copies: tuple[int, ...] = (1, 2, 3),
    seed: int = 0,
    max_iters: int = 300,
    restarts: int = 4,
    priors: tuple[float, float] = (0.5, 0.5),
    patience: int | None = None,
) -> list[DiscriminationPoint]:
    """Trained success by copy count, warm-starting each n from n-1."""
    points: list[DiscriminationPoint] = []
    prev: ParamTable | None = None
    prev_n = 0
    for n in sorted(copies):
        proto = build_discrimination_protocol(n)
        template = init_param_table(proto, reduce=discrimination_key_reduce)
        spec = LossSpec("discrimination", proto, state0=state0, state1=state1, priors=priors)
        inits = []
        if prev is not None and prev_n == n - 1:
            inits.append(_warm_embed(prev, proto))
        cfg = OptimizerConfig(
            max_iters=max_iters,
            restarts=restarts,
            rng_seed=seed * 613 + n,
            target_loss=1e-6,
            patience=patience,
        )
        rep = optimize(spec, cfg, template=template, inits=inits or None)
        points.append(
            DiscriminationPoint(n, 1.0 - rep.best_loss, helstrom_bound(state0, state1, n, priors), rep)
        )
        prev, prev_n = rep.best_params, n
    return points
