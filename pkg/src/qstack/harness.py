"""Closed-loop simulation engine, scheme comparison, and trace serialization.

Per-step wiring (fixed; regression-pinned by the test suite):

1. measure ``y_k`` from the true state;
2. push ``y_k`` into the identification stack and run one Kalman
   predict/correct cycle (skipped until the first transition exists);
3. predict ``x_{k+1}`` from the identified model at the pre-update action;
4. run one critic episode on the transition (ADP controllers only);
5. run the controller's actor update and pick the action to apply;
6. log the step, advance the true plant, push the applied control into the
   identification stack, and shift stacked controllers' horizons.

The controller consumes the measured state by default (``noise_wiring =
"both"``); with ``"kf_only"`` the noise reaches only the identification
stack. Controller divergence truncates the trace with a recorded status
instead of raising.

Trace CSV columns (one row per step, 17 significant digits):

    t, x1..xn, y1..yn, u1..um, r, q_hat, bellman_err_final,
    a11..ann (row-major), b11..bnm (row-major)
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .critic import CriticWeights, Transition, critic_update, q_value
from .errors import DivergenceError
from .model_kf import (
    ModelEstimate,
    SampleStack,
    initial_estimate,
    kf_correct,
    kf_predict,
    predict_state,
)
from .plant import (
    MeasurementChannel,
    PlantModel,
    RunningCost,
    make_plant,
    measure,
    running_cost,
    step_true,
)
from .policy import (
    GRADIENT_MODES,
    ControlStack,
    adpq_update,
    gd_update,
    mpc_update,
    sadpq_update,
)
from .regressor import Regressor

CONTROLLERS = ("gd", "adpq", "sadpq", "mpc")
NOISE_WIRINGS = ("both", "kf_only")


class ConfigError(ValueError):
    """A simulation configuration failed validation."""


@dataclass(frozen=True)
class SimConfig:
    """Everything a closed-loop run depends on besides the seed.

    Scalar ``q_cost`` / ``r_cost`` expand to scaled identity weight matrices.
    ``r_kf = None`` resolves to ``max(sigma^2, 1e-6)``; ``w_init = None`` to
    the all-ones critic initialization.
    """

    plant: "str | PlantModel" = "lewis2d"
    x0: tuple = (0.5, 1.0)
    u0: float = 1.0
    dt: float = 1e-3
    T: float = 5.0
    sigma: float = 1.0
    L: int = 10
    alpha: float = 0.1
    beta: float = 1e-4
    n_critic_iter: int = 20
    n_actor_iter: int = 1
    N: int = 4
    controller: str = "sadpq"
    gradient_mode: str = "total"
    seed: int = 0
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    q_kf: float = 1e-6
    r_kf: "float | None" = None
    p0: float = 1e3
    q_cost: "float | tuple" = 2.0
    r_cost: "float | tuple" = 2.0
    noise_wiring: str = "both"
    threshold: float = 0.1
    sustain_steps: int = 100
    u_clamp: "float | None" = None
    w_init: "tuple | None" = None


def _resolve_plant(cfg: SimConfig) -> PlantModel:
    if isinstance(cfg.plant, PlantModel):
        return cfg.plant
    return make_plant(cfg.plant)


def _cost_matrix(spec, dim: int, name: str) -> np.ndarray:
    if np.isscalar(spec):
        return float(spec) * np.eye(dim)
    mat = np.asarray(spec, dtype=float)
    if mat.shape != (dim, dim):
        raise ConfigError(f"{name} must be scalar or a {dim}x{dim} matrix")
    return mat


def _resolve(cfg: SimConfig):
    """Validate and expand a config into run-ready pieces."""
    try:
        plant = _resolve_plant(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.controller not in CONTROLLERS:
        raise ConfigError(f"controller must be one of {CONTROLLERS}, got {cfg.controller!r}")
    if cfg.gradient_mode not in GRADIENT_MODES:
        raise ConfigError(f"gradient_mode must be one of {GRADIENT_MODES}")
    if cfg.noise_wiring not in NOISE_WIRINGS:
        raise ConfigError(f"noise_wiring must be one of {NOISE_WIRINGS}")
    if cfg.dt <= 0 or cfg.T <= 0:
        raise ConfigError("dt and T must be positive")
    if cfg.L < 1 or cfg.N < 1 or cfg.n_critic_iter < 1 or cfg.n_actor_iter < 1:
        raise ConfigError("L, N and iteration counts must be >= 1")
    if cfg.sigma < 0 or cfg.alpha < 0 or cfg.beta < 0:
        raise ConfigError("sigma, alpha and beta must be nonnegative")
    if cfg.p0 <= 0 or cfg.q_kf < 0:
        raise ConfigError("p0 must be positive and q_kf nonnegative")
    if cfg.threshold <= 0 or cfg.sustain_steps < 1:
        raise ConfigError("threshold must be positive, sustain_steps >= 1")
    x0 = np.asarray(cfg.x0, dtype=float)
    if x0.shape != (plant.n,):
        raise ConfigError(f"x0 must have length {plant.n} for plant {plant.name!r}")
    u0 = np.broadcast_to(np.asarray(cfg.u0, dtype=float), (plant.m,)).copy()
    r_kf = max(cfg.sigma ** 2, 1e-6) if cfg.r_kf is None else float(cfg.r_kf)
    if r_kf <= 0:
        raise ConfigError("r_kf must be positive")
    try:
        cost = RunningCost(
            Q=_cost_matrix(cfg.q_cost, plant.n, "q_cost"),
            R=_cost_matrix(cfg.r_cost, plant.m, "r_cost"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    steps = int(round(cfg.T / cfg.dt))
    return plant, cost, x0, u0, r_kf, steps


def validate_config(cfg: SimConfig) -> None:
    """Raise :class:`ConfigError` if the configuration is not runnable."""
    _resolve(cfg)


def config_hash(cfg: SimConfig) -> str:
    """Stable 16-hex-digit digest of every config field."""
    parts = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, PlantModel):
            value = f"custom:{value.name}"
        parts.append(f"{f.name}={value!r}")
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]


@dataclass
class SimTrace:
    """Time-indexed log of one closed-loop run plus run metadata.

    Arrays are truncated at the failing step when ``status != "ok"``.
    ``bellman_seq[k]`` holds the full critic-episode residual sequence of
    step ``k`` (empty for controllers without a critic); ``weights`` and
    ``estimate`` are the critic and model state when the run ended.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    r: np.ndarray
    q_hat: np.ndarray
    bellman_final: np.ndarray
    bellman_seq: list
    A: np.ndarray
    B: np.ndarray
    config: SimConfig
    seed: int
    config_hash: str
    weights: CriticWeights
    estimate: ModelEstimate
    status: str = "ok"
    failed_step: "int | None" = None

    @property
    def steps(self) -> int:
        return self.t.shape[0]


def run_closed_loop(cfg: SimConfig, seed: "int | None" = None) -> SimTrace:
    """Simulate one closed-loop run; deterministic given ``(cfg, seed)``."""
    plant, cost, x0, u0, r_kf, steps = _resolve(cfg)
    n, m = plant.n, plant.m
    run_seed = cfg.seed if seed is None else int(seed)

    chan = MeasurementChannel(cfg.sigma, run_seed)
    reg = Regressor(n, m)
    est = initial_estimate(n, m, cfg.L, p0=cfg.p0, q_kf=cfg.q_kf, r_kf=r_kf)
    kf_stack = SampleStack(cfg.L)
    if cfg.w_init is None:
        w0 = np.ones(reg.p)
    else:
        w0 = np.asarray(cfg.w_init, dtype=float)
        if w0.shape != (reg.p,):
            raise ConfigError(f"w_init must have length {reg.p}")
    weights = CriticWeights(w0, alpha=cfg.alpha, n_iter=cfg.n_critic_iter)
    ctrl = cfg.controller
    stacked = ctrl in ("sadpq", "mpc")
    has_critic = ctrl in ("adpq", "sadpq")
    stack = ControlStack.constant(u0, cfg.N, m, beta=cfg.beta,
                                  n_actor_iter=cfg.n_actor_iter)
    u_prev = u0

    ts = np.arange(steps) * cfg.dt
    xs = np.empty((steps, n))
    ys = np.empty((steps, n))
    us = np.empty((steps, m))
    rs = np.empty(steps)
    qh = np.empty(steps)
    bf = np.full(steps, np.nan)
    As = np.empty((steps, n, n))
    Bs = np.empty((steps, n, m))
    bseq: list = []

    status = "ok"
    failed_step = None
    x = x0.copy()
    done = 0
    for k in range(steps):
        y_k = measure(chan, x)
        x_ctrl = y_k if cfg.noise_wiring == "both" else x
        kf_stack.append_state(y_k)
        if kf_stack.n_transitions >= 1:
            est = kf_correct(kf_predict(est), kf_stack)

        u_minus = stack.first() if stacked else u_prev
        x_next_hat = predict_state(est, x_ctrl, u_minus)

        e_seq = np.empty(0)
        try:
            if has_critic:
                trans = Transition(x_ctrl, u_minus, x_next_hat,
                                   running_cost(cost, x_ctrl, u_minus))
                weights, e_seq = critic_update(reg, weights, trans)
            if ctrl == "adpq":
                u_apply = adpq_update(reg, u_minus, x_next_hat, weights,
                                      cfg.beta, cfg.n_actor_iter)
            elif ctrl == "gd":
                u_apply = gd_update(u_minus, x_next_hat, est.B, cfg.beta)
            elif ctrl == "sadpq":
                stack = sadpq_update(reg, stack, weights, est, x_ctrl,
                                     cfg.gradient_mode)
                u_apply = stack.first()
            else:  # mpc
                stack = mpc_update(stack, cost, est, x_ctrl)
                u_apply = stack.first()
        except DivergenceError:
            status, failed_step = "diverged", k
            break

        if cfg.u_clamp is not None:
            u_apply = np.clip(u_apply, -cfg.u_clamp, cfg.u_clamp)
            if stacked:
                stack = replace(stack, u=np.clip(stack.u, -cfg.u_clamp, cfg.u_clamp))

        xs[k], ys[k], us[k] = x, y_k, u_apply
        rs[k] = running_cost(cost, x, u_apply)
        qh[k] = q_value(reg, weights, x_ctrl, u_apply)
        if e_seq.size:
            bf[k] = e_seq[-1]
        bseq.append(e_seq)
        As[k], Bs[k] = est.A, est.B
        done = k + 1

        x = step_true(plant, x, u_apply)
        if not np.all(np.isfinite(x)):
            status, failed_step = "diverged", k + 1
            break
        kf_stack.append_control(u_apply)
        if stacked:
            stack = stack.shifted()
        else:
            u_prev = u_apply

    return SimTrace(
        t=ts[:done], x=xs[:done], y=ys[:done], u=us[:done], r=rs[:done],
        q_hat=qh[:done], bellman_final=bf[:done], bellman_seq=bseq[:done],
        A=As[:done], B=Bs[:done],
        config=cfg, seed=run_seed, config_hash=config_hash(cfg),
        weights=weights, estimate=est,
        status=status, failed_step=failed_step,
    )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def time_to_threshold(trace: SimTrace, threshold: "float | None" = None,
                      sustain_steps: "int | None" = None) -> float:
    """First time the state norm stays below ``threshold * ||x0||``.

    The bound must hold for ``sustain_steps`` consecutive steps inside the
    trace; returns ``nan`` when that never happens.
    """
    theta = trace.config.threshold if threshold is None else threshold
    sustain = trace.config.sustain_steps if sustain_steps is None else sustain_steps
    if trace.steps == 0:
        return math.nan
    bound = theta * np.linalg.norm(np.asarray(trace.config.x0, dtype=float))
    below = (np.linalg.norm(trace.x, axis=1) <= bound).astype(float)
    if below.size < sustain:
        return math.nan
    runs = np.convolve(below, np.ones(sustain), mode="valid")
    hits = np.nonzero(runs >= sustain - 0.5)[0]
    return float(trace.t[hits[0]]) if hits.size else math.nan


def cumulative_cost(trace: SimTrace) -> float:
    """Sum of the running cost incurred along the true trajectory."""
    return float(trace.r.sum())


# ---------------------------------------------------------------------------
# Scheme comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompareCell:
    controller: str
    seed: int
    time_to_threshold_s: float
    cumulative_cost: float
    status: str


@dataclass
class ComparisonReport:
    """Per-(controller, seed) metrics plus per-controller medians.

    Medians score cells that never reached the threshold (or diverged) at
    the full horizon ``T``, so "slower than the run" is representable.
    """

    cells: list
    medians: dict
    T: float
    threshold: float

    def median_time(self, controller: str) -> float:
        return self.medians[controller][0]

    def median_cost(self, controller: str) -> float:
        return self.medians[controller][1]


def compare_schemes(cfg: SimConfig, controllers, seeds=None) -> ComparisonReport:
    """Run every (controller, seed) cell and aggregate the metrics.

    Failures are recorded per cell; the report is always produced. Cells are
    evaluated in deterministic (controller, seed) order.
    """
    controllers = list(controllers)
    if len(controllers) < 2:
        raise ConfigError("compare needs at least two controllers")
    seeds = list(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("compare needs at least one seed")
    for ctrl in controllers:
        if ctrl not in CONTROLLERS:
            raise ConfigError(f"unknown controller {ctrl!r}")

    cells = []
    for ctrl in controllers:
        run_cfg = replace(cfg, controller=ctrl)
        for s in seeds:
            trace = run_closed_loop(run_cfg, seed=s)
            ttt = time_to_threshold(trace)
            if trace.status != "ok":
                cell_status = "diverged"
            elif math.isnan(ttt):
                cell_status = "not_reached"
            else:
                cell_status = "ok"
            cells.append(CompareCell(ctrl, int(s), ttt,
                                     cumulative_cost(trace), cell_status))

    medians = {}
    for ctrl in controllers:
        mine = [c for c in cells if c.controller == ctrl]
        scored = [c.time_to_threshold_s if c.status == "ok" else cfg.T for c in mine]
        medians[ctrl] = (float(np.median(scored)),
                         float(np.median([c.cumulative_cost for c in mine])))
    return ComparisonReport(cells=cells, medians=medians, T=cfg.T,
                            threshold=cfg.threshold)


# ---------------------------------------------------------------------------
# Hyperparameter sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    param: str
    cells: list  # (value, CompareCell) pairs
    medians: list  # (value, median_time, median_cost) triples


def sweep_param(cfg: SimConfig, param: str, values, seeds=None) -> SweepResult:
    """Grid over one SimConfig field with the configured controller."""
    field_names = {f.name for f in dataclasses.fields(SimConfig)}
    if param not in field_names:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    seeds = list(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("sweep needs at least one seed")

    cells = []
    medians = []
    for value in values:
        run_cfg = replace(cfg, **{param: value})
        validate_config(run_cfg)
        scored = []
        costs = []
        for s in seeds:
            trace = run_closed_loop(run_cfg, seed=s)
            ttt = time_to_threshold(trace)
            if trace.status != "ok":
                cell_status = "diverged"
            elif math.isnan(ttt):
                cell_status = "not_reached"
            else:
                cell_status = "ok"
            cost = cumulative_cost(trace)
            cells.append((value, CompareCell(run_cfg.controller, int(s), ttt,
                                             cost, cell_status)))
            scored.append(ttt if cell_status == "ok" else run_cfg.T)
            costs.append(cost)
        medians.append((value, float(np.median(scored)), float(np.median(costs))))
    return SweepResult(param=param, cells=cells, medians=medians)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def trace_columns(n: int, m: int) -> list:
    cols = ["t"]
    cols += [f"x{i+1}" for i in range(n)]
    cols += [f"y{i+1}" for i in range(n)]
    cols += [f"u{j+1}" for j in range(m)]
    cols += ["r", "q_hat", "bellman_err_final"]
    cols += [f"a{i+1}{j+1}" for i in range(n) for j in range(n)]
    cols += [f"b{i+1}{j+1}" for i in range(n) for j in range(m)]
    return cols


def write_trace(trace: SimTrace, path) -> None:
    """Write the trace as CSV: header plus one row per step, 17 sig digits."""
    n = trace.x.shape[1] if trace.steps else len(trace.config.x0)
    m = trace.u.shape[1] if trace.steps else 1
    with open(path, "w", newline="") as f:
        f.write(",".join(trace_columns(n, m)) + "\n")
        for k in range(trace.steps):
            row = [trace.t[k], *trace.x[k], *trace.y[k], *trace.u[k],
                   trace.r[k], trace.q_hat[k], trace.bellman_final[k],
                   *trace.A[k].ravel(), *trace.B[k].ravel()]
            f.write(",".join(_fmt(v) for v in row) + "\n")


def read_trace(path) -> dict:
    """Parse a trace CSV back into a dict of column-name -> float array."""
    with open(path, "r", newline="") as f:
        header = f.readline().strip()
        names = header.split(",") if header else []
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(names)))
    return {name: data[:, i] for i, name in enumerate(names)}


def write_report(report: ComparisonReport, path) -> None:
    """Write the comparison report CSV: cell rows plus a median block."""
    with open(path, "w", newline="") as f:
        f.write("controller,seed,time_to_threshold_s,cumulative_cost,status\n")
        for c in report.cells:
            f.write(f"{c.controller},{c.seed},{_fmt(c.time_to_threshold_s)},"
                    f"{_fmt(c.cumulative_cost)},{c.status}\n")
        f.write("# medians: cells not reaching the threshold scored at T="
                + _fmt(report.T) + "\n")
        f.write("controller,median_time_to_threshold_s,median_cumulative_cost\n")
        for ctrl, (mt, mc) in report.medians.items():
            f.write(f"{ctrl},{_fmt(mt)},{_fmt(mc)}\n")


def write_sweep(result: SweepResult, path) -> None:
    """Write sweep cells and per-value medians as CSV."""
    with open(path, "w", newline="") as f:
        f.write(f"{result.param},controller,seed,time_to_threshold_s,"
                "cumulative_cost,status\n")
        for value, c in result.cells:
            f.write(f"{value!r},{c.controller},{c.seed},"
                    f"{_fmt(c.time_to_threshold_s)},{_fmt(c.cumulative_cost)},"
                    f"{c.status}\n")
        f.write("# medians per value (not-reached scored at T)\n")
        f.write(f"{result.param},median_time_to_threshold_s,median_cumulative_cost\n")
        for value, mt, mc in result.medians:
            f.write(f"{value!r},{_fmt(mt)},{_fmt(mc)}\n")
