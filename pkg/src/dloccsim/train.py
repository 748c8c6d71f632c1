"""Loss evaluation and parameter optimization for dynamic protocols.

Distillation minimizes the infidelity of the postselected output; the
infidelity is a ratio of two branch-weight sums, so its exact gradient is
assembled from parameter-shift evaluations of the numerator and denominator
separately. Discrimination minimizes the average failure probability, which
is linear in the branch weights and shifts directly. Slots bound to
non-rotation gates (the qutrit Givens layers) fall back to central finite
differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channels import NoisyStateSpec
from .circuits import ROTATIONS
from .dlocc import (
    ALICE,
    DynamicProtocol,
    ParamTable,
    execute,
    execute_discrimination,
    init_param_table,
)
from .qmath import DensityState, fidelity_pure

INFIDELITY = "infidelity"
DISCRIMINATION = "discrimination"
FD_STEP = 1e-5


class ZeroAcceptance(Exception):
    """Every branch of a postselected protocol was rejected."""


@dataclass(frozen=True)
class LossSpec:
    """What to minimize for a protocol.

    ``infidelity``: 1 - fidelity of the accepted output with ``target``.
    ``discrimination``: average probability of a wrong verdict between
    ``state0`` and ``state1`` under ``priors``.
    ``initial_state`` optionally replaces the protocol's initial window
    (used when training one stage against a precomputed prefix).
    """

    kind: str
    protocol: DynamicProtocol
    target: np.ndarray | None = None
    state0: DensityState | NoisyStateSpec | None = None
    state1: DensityState | NoisyStateSpec | None = None
    priors: tuple[float, float] = (0.5, 0.5)
    initial_state: DensityState | None = None

    def __post_init__(self):
        if self.kind == INFIDELITY:
            if self.target is None:
                raise ValueError("infidelity loss needs a target vector")
        elif self.kind == DISCRIMINATION:
            if self.state0 is None or self.state1 is None:
                raise ValueError("discrimination loss needs both hypothesis states")
        else:
            raise ValueError(f"unknown loss kind {self.kind!r}")


def _fidelity_parts(spec: LossSpec, params: ParamTable) -> tuple[float, float]:
    """(fidelity * weight, weight) of the accepted output; (0, 0) if none."""
    out = execute(spec.protocol, params, initial_override=spec.initial_state)
    if out.success_probability <= 0.0 or out.conditional_state is None:
        return 0.0, 0.0
    f = fidelity_pure(out.conditional_state, spec.target)
    return f * out.success_probability, out.success_probability


def evaluate_loss(spec: LossSpec, params: ParamTable, raise_zero: bool = False) -> float:
    """Loss value; zero-acceptance yields the worst case 1.0 unless raising."""
    if spec.kind == INFIDELITY:
        num, den = _fidelity_parts(spec, params)
        if den <= 0.0:
            if raise_zero:
                raise ZeroAcceptance(f"protocol {spec.protocol.name} accepted no branch")
            return 1.0
        return 1.0 - num / den
    res = execute_discrimination(spec.protocol, params, spec.state0, spec.state1, spec.priors)
    return 1.0 - res.success


def _shift_mask(protocol: DynamicProtocol, params: ParamTable) -> np.ndarray:
    """True where the two-point parameter-shift rule is exact for a slot."""
    flags = []
    for (r, party, _key), vec in params.items():
        rd = protocol.rounds[r]
        circ = rd.alice_circuit if party == ALICE else rd.bob_circuit
        for slot in range(vec.size):
            users = [g for g in circ.gates if g.param_slot == slot]
            flags.append(len(users) == 1 and users[0].kind in ROTATIONS)
    return np.array(flags, dtype=bool)


def gradient(spec: LossSpec, params: ParamTable, method: str = "auto") -> np.ndarray:
    """Per-slot derivative of the loss, aligned with params.vector().

    ``auto`` uses the parameter-shift rule where exact and finite
    differences elsewhere; ``shift`` and ``fd`` force one rule everywhere
    (``shift`` on non-rotation slots is the caller's mistake).
    """
    if method not in ("auto", "shift", "fd"):
        raise ValueError(f"unknown gradient method {method!r}")
    x = params.vector()
    n = x.size
    if method == "fd":
        mask = np.zeros(n, dtype=bool)
    elif method == "shift":
        mask = np.ones(n, dtype=bool)
    else:
        mask = _shift_mask(spec.protocol, params)
    grad = np.zeros(n)

    if spec.kind == INFIDELITY:
        num0, den0 = _fidelity_parts(spec, params)
        if den0 <= 0.0:
            return grad  # loss is flat at the worst case
        for i in range(n):
            if not mask[i]:
                continue
            x[i] += np.pi / 2
            np_, dp = _fidelity_parts(spec, params.with_vector(x))
            x[i] -= np.pi
            nm, dm = _fidelity_parts(spec, params.with_vector(x))
            x[i] += np.pi / 2
            dnum, dden = (np_ - nm) / 2.0, (dp - dm) / 2.0
            grad[i] = -(dnum * den0 - num0 * dden) / (den0 * den0)
    else:
        for i in range(n):
            if not mask[i]:
                continue
            x[i] += np.pi / 2
            lp = evaluate_loss(spec, params.with_vector(x))
            x[i] -= np.pi
            lm = evaluate_loss(spec, params.with_vector(x))
            x[i] += np.pi / 2
            grad[i] = (lp - lm) / 2.0

    for i in range(n):
        if mask[i]:
            continue
        x[i] += FD_STEP
        lp = evaluate_loss(spec, params.with_vector(x))
        x[i] -= 2 * FD_STEP
        lm = evaluate_loss(spec, params.with_vector(x))
        x[i] += FD_STEP
        grad[i] = (lp - lm) / (2.0 * FD_STEP)
    return grad


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "adam"
    step_size: float = 0.05
    max_iters: int = 500
    grad_tolerance: float = 1e-8
    restarts: int = 8
    rng_seed: int = 0
    target_loss: float | None = None
    patience: int | None = None

    def __post_init__(self):
        if self.method not in ("adam", "fd_descent"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if self.step_size <= 0 or self.max_iters < 1 or self.restarts < 1:
            raise ValueError("step_size > 0, max_iters >= 1, restarts >= 1 required")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 when set")


@dataclass
class TrainReport:
    best_params: ParamTable
    best_loss: float
    loss_trace: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    seed: int = 0


def _descend(spec, template, x0, cfg) -> tuple[np.ndarray, float, list[float]]:
    """One seeded descent; returns (best x, best loss, best-so-far trace)."""
    grad_method = "fd" if cfg.method == "fd_descent" else "auto"
    x = x0.copy()
    best_x, best_loss = x.copy(), evaluate_loss(spec, template.with_vector(x))
    trace = [best_loss]
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2, eps = 0.9, 0.999, 1e-8
    stale = 0
    for it in range(1, cfg.max_iters + 1):
        g = gradient(spec, template.with_vector(x), method=grad_method)
        gnorm = float(np.linalg.norm(g))
        if gnorm < cfg.grad_tolerance:
            break
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**it)
        vh = v / (1 - b2**it)
        x = x - cfg.step_size * mh / (np.sqrt(vh) + eps)
        loss = evaluate_loss(spec, template.with_vector(x))
        if loss < best_loss - 1e-9:
            best_loss, best_x, stale = loss, x.copy(), 0
        else:
            if loss < best_loss:
                best_loss, best_x = loss, x.copy()
            stale += 1
        trace.append(best_loss)
        if cfg.target_loss is not None and best_loss <= cfg.target_loss:
            break
        if cfg.patience is not None and stale >= cfg.patience:
            break
    return best_x, best_loss, trace


def optimize(
    spec: LossSpec,
    cfg: OptimizerConfig,
    template: ParamTable | None = None,
    inits: list[ParamTable] | None = None,
) -> TrainReport:
    """Multi-restart descent; deterministic for a fixed seed.

    ``template`` fixes the parameter layout (defaults to one vector per
    reachable round/party/history). ``inits`` prepends warm starts before
    the random restarts; the returned best includes the warm starts'
    initial losses, so warm-started training never regresses.
    """
    t0 = time.perf_counter()
    if template is None:
        template = init_param_table(spec.protocol)
    n = template.n_params
    if n == 0:
        loss = evaluate_loss(spec, template)
        return TrainReport(template, loss, [loss], time.perf_counter() - t0, cfg.rng_seed)

    starts: list[np.ndarray] = []
    for warm in inits or []:
        if warm.n_params != n:
            raise ValueError(f"warm start has {warm.n_params} params, expected {n}")
        starts.append(warm.vector())
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.rng_seed, r])
        starts.append(rng.uniform(0.0, 2.0 * np.pi, n))

    best = None
    for x0 in starts:
        bx, bl, trace = _descend(spec, template, x0, cfg)
        if best is None or bl < best[1]:
            best = (bx, bl, trace)
        if cfg.target_loss is not None and best[1] <= cfg.target_loss:
            break
    bx, bl, trace = best
    return TrainReport(
        template.with_vector(bx), bl, trace, time.perf_counter() - t0, cfg.rng_seed
    )


def serialize_report(rep: TrainReport) -> str:
    """Key-value header plus the best-so-far loss trace as a CSV block."""
    lines = [
        f"best_loss = {rep.best_loss!r}",
        f"wall_time = {rep.wall_time!r}",
        f"seed = {rep.seed}",
        f"n_params = {rep.best_params.n_params}",
        "trace:",
        "iteration,best_loss",
    ]
    for i, v in enumerate(rep.loss_trace):
        lines.append(f"{i},{v!r}")
    return "\n".join(lines) + "\n"
