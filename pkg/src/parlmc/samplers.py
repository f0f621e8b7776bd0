"""Langevin samplers over the potential, noise, and round-execution layers.

Five kinds share one inner-loop engine, parameterized by the coefficient
rule, the noise family, and whether a velocity is carried:

* ``lmc``     Euler step  theta' = theta - h grad f(theta) + sqrt(2h) z.
* ``rlmc``    randomized midpoint, the engine at R = 1, Q = 2 (vanilla rule).
* ``prlmc``   parallel randomized midpoint: per outer step, Q - 1 refinement
  rounds update R stratified midpoint states
  theta_r = theta - h sum_{j<=r} a_{jr} grad f(theta_j^{prev}) + xi_r
  with a_{jr} = min{1/R, U_r - (j-1)/R}, then one final round gives
  theta' = theta - (h/R) sum_r grad f(theta_r) + xi.
* ``rklmc``   kinetic randomized midpoint, the engine at R = 1, Q = 2
  (kinetic rule); equals the exponential-integrator two-stage scheme written
  with psi(x) = (1 - e^{-x})/x.
* ``prklmc``  parallel kinetic variant: refinement rounds use
  theta_r = theta + a_r v - sum_{j<=r} b_j grad f(theta_j^{prev}) + xi_r with
  a_r = (1 - e^{-gamma h U_r})/gamma, then
  theta' = theta + ((1 - e^{-gamma h})/gamma) v
           - sum_r (h/R)(1 - e^{-gamma h (1-U_r)}) grad f(theta_r) + xi
  and v' = e^{-gamma h} v - gamma sum_r (h/R) e^{-gamma h (1-U_r)} grad f(theta_r)
           + gamma xi_bar.

Each engine outer step costs exactly Q gradient rounds of width R: gradients
are computed once per refinement round and reused across the prefix sums
(without this caching the refinement would cost O(R^2) evaluations), and the
final update evaluates the fresh round-(Q-1) states.

States are vectorized: theta has shape (p,) for one chain or (C, p) for an
ensemble advancing in lockstep.  All randomness is keyed by (seed, iteration,
role), so trajectories are bitwise independent of the parallel schedule.
Step functions accept a `noise` override so tests can force zero or fixed
noise; the `run` driver never overrides.
"""

from __future__ import annotations

import csv
import io
import json
import warnings as _warnings
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from . import noise as noise_mod
from .errors import ConfigurationError, DivergenceError
from .parallel import RoundPlan, execute_round, weighted_prefix_combine
from .potentials import Potential
from .tuning import check_preconditions

VANILLA_KINDS = ("lmc", "rlmc", "prlmc")
KINETIC_KINDS = ("rklmc", "prklmc")
KINDS = VANILLA_KINDS + KINETIC_KINDS

# Abort threshold: ||theta|| > this multiple of (1 + ||theta_0||) diverges.
DIVERGENCE_FACTOR = 1e8


class PreconditionWarning(UserWarning):
    """A theorem stability precondition fails for the supplied parameters."""


@dataclass
class SamplerConfig:
    """Step size h, width R, refinement depth Q, length n, friction gamma."""

    h: float
    n: int
    R: int = 1
    Q: int = 1
    gamma: float | None = None
    seed: int = 0
    parallel_width: int | None = None
    theta0: np.ndarray | None = None
    v0: np.ndarray | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigurationError(f"step size must be positive, got {self.h}")
        if self.n < 0:
            raise ConfigurationError(f"iteration count must be >= 0, got {self.n}")
        if int(self.R) < 1:
            raise ConfigurationError(f"parallel width R must be >= 1, got {self.R}")
        if int(self.Q) < 1:
            raise ConfigurationError(f"refinement depth Q must be >= 1, got {self.Q}")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigurationError(f"friction must be positive, got {self.gamma}")
        if self.parallel_width is not None and int(self.parallel_width) < 1:
            raise ConfigurationError(f"parallel_width must be >= 1, got {self.parallel_width}")
        self.R = int(self.R)
        self.Q = int(self.Q)
        self.n = int(self.n)

    @property
    def eta(self) -> float | None:
        """Normalized kinetic step gamma * h (None without friction)."""
        return None if self.gamma is None else self.gamma * self.h

    def hbar(self, smoothness: float) -> float:
        """Normalized vanilla step M * h for a potential with smoothness M."""
        return smoothness * self.h

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "n": self.n,
            "R": self.R,
            "Q": self.Q,
            "gamma": self.gamma,
            "seed": self.seed,
            "parallel_width": self.parallel_width,
            "theta0": None if self.theta0 is None else np.asarray(self.theta0).tolist(),
            "v0": None if self.v0 is None else np.asarray(self.v0).tolist(),
        }


@dataclass
class ChainState:
    """Current iterate(s); velocity present for kinetic kinds only."""

    theta: np.ndarray
    iteration: int = 0
    v: np.ndarray | None = None


def effective_rq(kind: str, config: SamplerConfig) -> tuple[int, int]:
    """(R, Q) actually used by a kind; the sequential baselines pin R=1."""
    if kind == "lmc":
        return 1, 1
    if kind in ("rlmc", "rklmc"):
        return 1, 2
    return config.R, config.Q


def _batch(theta: np.ndarray) -> int | None:
    return None if theta.ndim == 1 else theta.shape[0]


def _draw_vanilla(config: SamplerConfig, k: int, R: int, p: int, size):
    u = noise_mod.draw_midpoints(R, noise_mod.stream(config.seed, k, noise_mod.ROLE_MIDPOINTS), size=size)
    return noise_mod.draw_vanilla_noise(
        R, config.h, p, u, noise_mod.stream(config.seed, k, noise_mod.ROLE_PATH)
    )


def _draw_kinetic(config: SamplerConfig, k: int, R: int, p: int, size):
    u = noise_mod.draw_midpoints(R, noise_mod.stream(config.seed, k, noise_mod.ROLE_MIDPOINTS), size=size)
    return noise_mod.draw_kinetic_noise(
        R, config.gamma, config.h, p, u, noise_mod.stream(config.seed, k, noise_mod.ROLE_PATH)
    )


def lmc_step(state: ChainState, config: SamplerConfig, potential: Potential, noise=None) -> ChainState:
    """One Euler step; noise defaults to N(0, 2h I) from the keyed stream."""
    theta = state.theta
    if noise is None:
        rng = noise_mod.stream(config.seed, state.iteration, noise_mod.ROLE_PATH)
        xi = np.sqrt(2.0 * config.h) * rng.standard_normal(theta.shape)
    else:
        xi = noise.xi_full if isinstance(noise, noise_mod.VanillaNoiseDraw) else np.asarray(noise)
    g = execute_round(RoundPlan([theta], parallel_width=config.parallel_width), potential).gradients[0]
    new_theta = theta - config.h * g + xi
    _raise_if_nonfinite(new_theta, state.iteration)
    return ChainState(theta=new_theta, iteration=state.iteration + 1, v=None)


def _vanilla_iteration(theta, k, config, potential, R, Q, noise):
    h = config.h
    if noise is None:
        noise = _draw_vanilla(config, k, R, theta.shape[-1], _batch(theta))
    weights = h * noise_mod.vanilla_coefficient_matrix(R, noise.U)
    points = [theta] * R
    for q in range(1, Q):
        grads = execute_round(
            RoundPlan(points, round_index=q - 1, parallel_width=config.parallel_width), potential
        ).gradients
        combined = weighted_prefix_combine(grads, weights)
        points = [theta - combined[r] + noise.xi_mid[..., r, :] for r in range(R)]
    grads = execute_round(
        RoundPlan(points, round_index=Q - 1, parallel_width=config.parallel_width), potential
    ).gradients
    total = grads[0]
    for r in range(1, R):
        total = total + grads[r]
    return theta - (h / R) * total + noise.xi_full


def _kinetic_iteration(theta, v, k, config, potential, R, Q, noise):
    h, gamma = config.h, config.gamma
    if noise is None:
        noise = _draw_kinetic(config, k, R, theta.shape[-1], _batch(theta))
    U = noise.U
    a = noise_mod.kinetic_velocity_weight(gamma, h, U)          # (..., R)
    weights = noise_mod.kinetic_coefficient_matrix(R, gamma, h, U)
    base = [theta + a[..., r, None] * v for r in range(R)]
    points = [theta] * R
    for q in range(1, Q):
        grads = execute_round(
            RoundPlan(points, round_index=q - 1, parallel_width=config.parallel_width), potential
        ).gradients
        combined = weighted_prefix_combine(grads, weights)
        points = [base[r] - combined[r] + noise.xi_mid[..., r, :] for r in range(R)]
    grads = execute_round(
        RoundPlan(points, round_index=Q - 1, parallel_width=config.parallel_width), potential
    ).gradients
    tail = gamma * h * (1.0 - U)                                # (..., R)
    w_theta = (h / R) * noise_mod._em1(tail)
    w_v = (h / R) * np.exp(-tail)
    sum_theta = w_theta[..., 0, None] * grads[0]
    sum_v = w_v[..., 0, None] * grads[0]
    for r in range(1, R):
        sum_theta = sum_theta + w_theta[..., r, None] * grads[r]
        sum_v = sum_v + w_v[..., r, None] * grads[r]
    new_theta = theta + (noise_mod._em1(gamma * h) / gamma) * v - sum_theta + noise.xi_full
    new_v = np.exp(-gamma * h) * v - gamma * sum_v + gamma * noise.xi_bar
    return new_theta, new_v


def prlmc_step(state: ChainState, config: SamplerConfig, potential: Potential, noise=None) -> ChainState:
    """One parallel randomized-midpoint step (vanilla rule, config R and Q)."""
    new_theta = _vanilla_iteration(state.theta, state.iteration, config, potential, config.R, config.Q, noise)
    _raise_if_nonfinite(new_theta, state.iteration)
    return ChainState(theta=new_theta, iteration=state.iteration + 1, v=None)


def rlmc_step(state: ChainState, config: SamplerConfig, potential: Potential, noise=None) -> ChainState:
    """Sequential randomized midpoint: the engine at R = 1, Q = 2."""
    new_theta = _vanilla_iteration(state.theta, state.iteration, config, potential, 1, 2, noise)
    _raise_if_nonfinite(new_theta, state.iteration)
    return ChainState(theta=new_theta, iteration=state.iteration + 1, v=None)


def prklmc_step(state: ChainState, config: SamplerConfig, potential: Potential, noise=None) -> ChainState:
    """One parallel kinetic randomized-midpoint step (config R and Q)."""
    new_theta, new_v = _kinetic_iteration(
        state.theta, state.v, state.iteration, config, potential, config.R, config.Q, noise
    )
    _raise_if_nonfinite(new_theta, state.iteration)
    return ChainState(theta=new_theta, iteration=state.iteration + 1, v=new_v)


def rklmc_step(state: ChainState, config: SamplerConfig, potential: Potential, noise=None) -> ChainState:
    """Sequential kinetic randomized midpoint: the engine at R = 1, Q = 2.

    Structurally identical to the psi-form two-stage scheme: at R = 1 the
    velocity weight is U h psi(gamma U h), the gradient weight is
    U h (1 - psi(gamma U h)), and the final-stage weights reduce to
    h psi(gamma h) and gamma h^2 (1 - U) psi(gamma h (1 - U)).
    """
    new_theta, new_v = _kinetic_iteration(
        state.theta, state.v, state.iteration, config, potential, 1, 2, noise
    )
    _raise_if_nonfinite(new_theta, state.iteration)
    return ChainState(theta=new_theta, iteration=state.iteration + 1, v=new_v)


_STEPPERS = {
    "lmc": lmc_step,
    "rlmc": rlmc_step,
    "prlmc": prlmc_step,
    "rklmc": rklmc_step,
    "prklmc": prklmc_step,
}


def _raise_if_nonfinite(theta, iteration):
    if not np.all(np.isfinite(theta)):
        raise DivergenceError(
            f"non-finite iterate at iteration {iteration}", iteration=iteration, norm=float("inf")
        )


@dataclass
class RunTrace:
    """Recorded snapshots, counters, and the echoed configuration of a run.

    CSV rows carry only deterministic columns so that identical (config,
    seed) reruns are byte-identical; wall-clock timings live in the JSON
    serialization only.
    """

    kind: str
    config: dict
    n_chains: int
    rows: list[dict] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    elapsed_seconds: float = 0.0
    warnings: list[str] = field(default_factory=list)
    final_state: ChainState | None = None  # not serialized

    _NONDETERMINISTIC = ("elapsed_seconds",)

    def csv_columns(self) -> list[str]:
        keys: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in keys and key not in self._NONDETERMINISTIC:
                    keys.append(key)
        return keys

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        cols = self.csv_columns()
        writer.writerow(cols)
        for row in self.rows:
            writer.writerow([row.get(c, "") for c in cols])
        return out.getvalue()

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "config": self.config,
            "n_chains": self.n_chains,
            "rows": self.rows,
            "counters": self.counters,
            "elapsed_seconds": self.elapsed_seconds,
            "warnings": self.warnings,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def write(self, json_path=None, csv_path=None):
        if json_path is not None:
            with open(json_path, "w") as fh:
                fh.write(self.to_json())
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                fh.write(self.to_csv())


def _initial_state(kind, config, potential, n_chains):
    p = potential.spec.dimension
    if config.theta0 is not None:
        theta0 = np.asarray(config.theta0, dtype=float)
    elif potential.spec.minimizer is not None:
        theta0 = np.asarray(potential.spec.minimizer, dtype=float)
    else:
        theta0 = np.zeros(p)
    if theta0.ndim == 1:
        if theta0.shape != (p,):
            raise ConfigurationError(f"theta0 must have dimension {p}")
        if n_chains > 1:
            theta0 = np.broadcast_to(theta0, (n_chains, p)).copy()
    else:
        if theta0.shape != (n_chains, p):
            raise ConfigurationError(f"theta0 must be ({n_chains}, {p}) for this ensemble")
        theta0 = theta0.copy()
    v0 = None
    if kind in KINETIC_KINDS:
        if config.v0 is not None:
            v0 = np.broadcast_to(np.asarray(config.v0, dtype=float), theta0.shape).copy()
        else:
            rng = noise_mod.stream(config.seed, 0, noise_mod.ROLE_VELOCITY)
            v0 = np.sqrt(config.gamma) * rng.standard_normal(theta0.shape)
    return ChainState(theta=theta0, iteration=0, v=v0)


def run(
    kind: str,
    config: SamplerConfig,
    potential: Potential,
    n_chains: int = 1,
    record_every: int | None = None,
    metric_fn=None,
) -> RunTrace:
    """Run n outer iterations, recording snapshots every `record_every` steps.

    `metric_fn(iteration, state) -> dict` contributes extra row columns.
    Counters reset at run start.  A non-finite or runaway iterate aborts with
    a DivergenceError carrying the partial trace.
    """
    if kind not in KINDS:
        raise ConfigurationError(f"unknown sampler kind {kind!r}; choose from {KINDS}")
    if kind in KINETIC_KINDS and config.gamma is None:
        raise ConfigurationError(f"{kind} requires a friction coefficient gamma")
    if n_chains < 1:
        raise ConfigurationError("n_chains must be >= 1")
    if record_every is None:
        record_every = max(1, config.n // 100)
    if record_every < 1:
        raise ConfigurationError("record_every must be >= 1")

    regime = "vanilla" if kind in VANILLA_KINDS else "kinetic"
    eff_r, eff_q = effective_rq(kind, config)
    checks = check_preconditions(
        _EffectiveView(config.h, eff_r, eff_q, config.gamma), potential.spec, regime
    )
    trace_warnings = []
    for check in checks:
        if not check.passed:
            msg = (
                f"{check.name} fails: value {check.value:.6g} vs threshold {check.threshold:.6g} "
                f"(run continues; the W2 guarantee does not apply)"
            )
            trace_warnings.append(msg)
            _warnings.warn(msg, PreconditionWarning, stacklevel=2)

    potential.counter.reset()
    state = _initial_state(kind, config, potential, n_chains)
    norm0 = float(np.sqrt(np.sum(state.theta**2, axis=-1)).max())
    threshold = DIVERGENCE_FACTOR * (1.0 + norm0)
    stepper = _STEPPERS[kind]

    trace = RunTrace(
        kind=kind,
        config={**config.to_dict(), "kind": kind, "n_chains": n_chains, "record_every": record_every},
        n_chains=n_chains,
        warnings=trace_warnings,
    )
    start = perf_counter()

    def record(st):
        row = {
            "iteration": st.iteration,
            **potential.counter.snapshot(),
            "elapsed_seconds": perf_counter() - start,
        }
        if metric_fn is not None:
            row.update(metric_fn(st.iteration, st))
        trace.rows.append(row)

    record(state)
    for k in range(config.n):
        try:
            state = stepper(state, config, potential)
        except DivergenceError as exc:
            trace.counters = potential.counter.snapshot()
            trace.elapsed_seconds = perf_counter() - start
            trace.final_state = state
            exc.trace = trace
            raise
        norm = float(np.sqrt(np.sum(state.theta**2, axis=-1)).max())
        if norm > threshold:
            trace.counters = potential.counter.snapshot()
            trace.elapsed_seconds = perf_counter() - start
            trace.final_state = state
            raise DivergenceError(
                f"iterate norm {norm:.3e} exceeded {threshold:.3e} at iteration {state.iteration}",
                iteration=state.iteration,
                norm=norm,
                trace=trace,
            )
        if state.iteration % record_every == 0 or state.iteration == config.n:
            record(state)

    trace.counters = potential.counter.snapshot()
    trace.elapsed_seconds = perf_counter() - start
    trace.final_state = state
    return trace


@dataclass(frozen=True)
class _EffectiveView:
    h: float
    R: int
    Q: int
    gamma: float | None
