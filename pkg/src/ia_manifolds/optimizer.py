"""
Steepest-descent precoder design with a doubling/halving Armijo search.

One sweep visits transmitters ``j = 0 .. K-1`` in order. For each one the
Euclidean gradient is taken at the current precoders (including updates
already made in the same sweep), turned into a descent direction ``Z`` for
the chosen geometry, and the step size ``beta[j]`` is adjusted so that

    f(V) - f(R(V[j] + beta Z))   >= beta/2 <Z, Z>     (sufficient decrease)
    f(V) - f(R(V[j] + 2 beta Z)) <  beta   <Z, Z>     (not too short)

where ``R`` is the retraction. ``beta`` is first doubled while the second
inequality fails, then halved until the first one holds. Step sizes persist
across sweeps unless ``beta_reset`` is set.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .alignment import analyze_receiver, euclidean_gradient, leakage_cost
from .manifolds import ManifoldKind, descent_direction, inner_product, retract
from .numerics import RankDeficient

__all__ = [
    "StepUnderflow",
    "StopRule",
    "OptimizerState",
    "ArmijoRecord",
    "ArmijoStep",
    "OptimizeResult",
    "armijo_adjust",
    "initial_state",
    "iterate_once",
    "optimize",
]

log = logging.getLogger(__name__)

BETA_MAX = 1e6
BETA_MIN = 1e-20
ZERO_DIRECTION_TOL = 1e-14


class StepUnderflow(ArithmeticError):
    """No step size above ``BETA_MIN`` gives sufficient decrease."""


@dataclass(frozen=True)
class StopRule:
    """
    Stopping criteria, checked before every sweep.

    The run stops when the cost drops to `cost_tolerance`, when
    ``cost / initial_cost`` drops to `relative_tolerance`, or after
    `max_iterations` sweeps, whichever happens first.
    """

    max_iterations: int = 1000
    cost_tolerance: float = 1e-10
    relative_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_iterations < 0 or self.cost_tolerance < 0 or self.relative_tolerance < 0:
            raise ValueError("stop criteria must be non-negative")
        if not (
            np.isfinite(self.max_iterations)
            or self.cost_tolerance > 0
            or self.relative_tolerance > 0
        ):
            raise ValueError("at least one stop criterion must be active")

    def check(self, cost, initial_cost, iteration):
        """Name of the criterion that fires, or ``None``."""
        if cost <= self.cost_tolerance:
            return "cost_tolerance"
        if initial_cost > 0 and cost <= self.relative_tolerance * initial_cost:
            return "relative_tolerance"
        if iteration >= self.max_iterations:
            return "max_iterations"
        return None


@dataclass
class OptimizerState:
    precoders: list
    beta: list
    iteration: int
    cost: float
    trace: list = field(default_factory=list)

    @property
    def costs(self):
        return np.array([c for _, c in self.trace])


@dataclass(frozen=True)
class ArmijoRecord:
    """One accepted line search, kept for after-the-fact verification."""

    iteration: int
    transmitter: int
    beta: float
    zz: float
    cost_before: float
    cost_at_beta: float
    cost_at_2beta: float
    capped: bool


class ArmijoStep(NamedTuple):
    beta: float
    precoder: np.ndarray
    cost: float
    record: Optional[ArmijoRecord]


@dataclass(frozen=True)
class OptimizeResult:
    state: OptimizerState
    stop_reason: str

    @property
    def trace(self):
        return self.state.trace


def _replaced(V, j, Vj):
    W = list(V)
    W[j] = Vj
    return W


def armijo_adjust(kind, ch, V, cfg, j, Z, beta, cost=None, iteration=0):
    """
    Adjust the step size for transmitter `j` and take the step.

    Parameters
    ----------
    kind : ManifoldKind
    ch : ChannelSet
    V : list of np.ndarray
        Current precoders.
    cfg : NetworkConfig
    j : int
        Transmitter being updated.
    Z : np.ndarray
        Descent direction for ``V[j]``.
    beta : float
        Starting step size.
    cost : float, optional
        ``leakage_cost(ch, V, cfg)`` if already known.
    iteration : int
        Only used to label the returned record.

    Returns
    -------
    ArmijoStep
        Final step size, new precoder for `j`, cost after the step and an
        :class:`ArmijoRecord`. When the direction is numerically zero the
        inputs are returned unchanged and the record is ``None``.

    Raises
    ------
    StepUnderflow
        If ``beta`` falls below ``1e-20`` while halving.
    """
    kind = ManifoldKind.parse(kind)
    Vj = V[j]
    f0 = leakage_cost(ch, V, cfg) if cost is None else cost
    zz = inner_product(kind, Vj, Z, Z)
    if zz <= ZERO_DIRECTION_TOL * max(1.0, f0):
        return ArmijoStep(beta, Vj, f0, None)

    cache = {}

    def trial(b):
        if b not in cache:
            try:
                Vb = retract(kind, Vj + b * Z)
            except RankDeficient:
                cache[b] = (None, np.inf)
            else:
                cache[b] = (Vb, leakage_cost(ch, _replaced(V, j, Vb), cfg))
        return cache[b]

    capped = False
    while True:
        if 2.0 * beta > BETA_MAX:
            capped = True
            break
        if f0 - trial(2.0 * beta)[1] >= beta * zz:
            beta *= 2.0
        else:
            break

    while True:
        Vb, fb = trial(beta)
        if f0 - fb >= 0.5 * beta * zz:
            break
        beta *= 0.5
        if beta < BETA_MIN:
            raise StepUnderflow(f"transmitter {j}: step size underflow (zz={zz:.3g})")

    f2 = trial(2.0 * beta)[1]
    record = ArmijoRecord(iteration, j, beta, zz, f0, fb, f2, capped)
    return ArmijoStep(beta, Vb, fb, record)


def initial_state(ch, cfg, init):
    V = [np.asarray(v, dtype=np.complex128) for v in init]
    f0 = leakage_cost(ch, V, cfg)
    return OptimizerState(V, [1.0] * cfg.K, 0, f0, [(0, f0)])


def iterate_once(kind, ch, cfg, state, beta_reset=False, armijo_log=None):
    """
    One sweep over all transmitters; returns a new :class:`OptimizerState`.

    A transmitter whose line search underflows keeps its precoder and
    previous step size for this sweep. Precoders that did not move are the
    same objects as in `state`.
    """
    kind = ManifoldKind.parse(kind)
    V = list(state.precoders)
    beta = list(state.beta)
    f = state.cost
    it = state.iteration + 1
    for j in range(cfg.K):
        receivers = [None if k == j else analyze_receiver(ch, V, cfg, k) for k in range(cfg.K)]
        D = euclidean_gradient(ch, V, cfg, j, receivers=receivers)
        Z = descent_direction(kind, V[j], D).Z
        b0 = 1.0 if beta_reset else beta[j]
        try:
            step = armijo_adjust(kind, ch, V, cfg, j, Z, b0, cost=f, iteration=it)
        except StepUnderflow as exc:
            log.debug("sweep %d: skipping transmitter %d (%s)", it, j, exc)
            continue
        if step.record is None:
            continue
        V[j] = step.precoder
        beta[j] = step.beta
        f = step.cost
        if armijo_log is not None:
            armijo_log.append(step.record)
    return OptimizerState(V, beta, it, f, state.trace + [(it, f)])


def optimize(kind, ch, cfg, init, stop=None, beta_reset=False, armijo_log=None, callback=None):
    """
    Run sweeps until a stop criterion fires.

    Parameters
    ----------
    kind : ManifoldKind or str
    ch : ChannelSet
    cfg : NetworkConfig
    init : list of np.ndarray
        Orthonormal starting precoders.
    stop : StopRule, optional
    beta_reset : bool
        Restart every line search from ``beta = 1`` instead of the step
        size found in the previous sweep.
    armijo_log : list, optional
        Receives an :class:`ArmijoRecord` for every accepted step.
    callback : callable, optional
        Called with the state after initialization and after every sweep.

    Returns
    -------
    OptimizeResult
        Final state (its trace includes iteration 0) and the name of the
        criterion that fired. ``"stalled"`` means a full sweep left every
        precoder unchanged.
    """
    kind = ManifoldKind.parse(kind)
    stop = StopRule() if stop is None else stop
    state = initial_state(ch, cfg, init)
    f0 = state.cost
    if callback is not None:
        callback(state)
    while True:
        reason = stop.check(state.cost, f0, state.iteration)
        if reason is not None:
            return OptimizeResult(state, reason)
        new = iterate_once(kind, ch, cfg, state, beta_reset=beta_reset, armijo_log=armijo_log)
        if callback is not None:
            callback(new)
        moved = any(a is not b for a, b in zip(new.precoders, state.precoders))
        state = new
        if not moved:
            reason = stop.check(state.cost, f0, state.iteration)
            return OptimizeResult(state, reason or "stalled")
