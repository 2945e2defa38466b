"""Window planning and the curriculum/transfer training pipeline.

The long horizon (0, T_t] is covered in three phases:

1. a standard training stage on (0, T_p];
2. n curriculum stages that regrow the window to (0, T_p + k*dt_pc],
   warm-started and supervised by the previous model on the previous
   window;
3. m transfer stages that slide a fixed-length window to
   (k*dt_ct, T_c + k*dt_ct], warm-started, supervised on the overlap,
   with initial conditions at the new window start handed over from the
   previous model (values, plus time derivatives for second-order
   problems).

Each stage regenerates its datasets from (base_seed, stage index), and
the composite solution routes queries to the earliest stage that covered
the queried time as newly added.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, PlanError, RangeError, SchedulingError
from .loss import LossWeights, StageObjective, anneal_weights
from .network import MlpSpec, init_params, param_length, save_checkpoint
from .optim import AdamState, LbfgsOptions, OptimReport, adam_step, lbfgs_minimize
from .sampling import Dataset, TimeWindow, build_dataset


class PlanWarning(UserWarning):
    """A window plan breaches a soft sizing recommendation."""


@dataclass(frozen=True)
class WindowPlan:
    """Curriculum/transfer schedule: (T_p, dt_pc, n, dt_ct, m)."""

    t_p: float
    dt_pc: float
    n_curriculum: int
    dt_ct: float
    n_transfer: int

    @property
    def t_c(self) -> float:
        return self.t_p + self.n_curriculum * self.dt_pc

    @property
    def t_t(self) -> float:
        return self.t_c + self.n_transfer * self.dt_ct

    @property
    def ctl_steps(self) -> int:
        """Curriculum plus transfer step count (the initial stage not included)."""
        return self.n_curriculum + self.n_transfer

    @property
    def n_stages(self) -> int:
        return 1 + self.n_curriculum + self.n_transfer

    def curriculum_window(self, k: int) -> TimeWindow:
        if not 1 <= k <= self.n_curriculum:
            raise SchedulingError(f"curriculum step {k} outside 1..{self.n_curriculum}")
        return TimeWindow(0.0, self.t_p + k * self.dt_pc)

    def transfer_window(self, k: int) -> TimeWindow:
        if not 1 <= k <= self.n_transfer:
            raise SchedulingError(f"transfer step {k} outside 1..{self.n_transfer}")
        return TimeWindow(k * self.dt_ct, self.t_c + k * self.dt_ct)

    def transfer_overlap(self, k: int) -> TimeWindow:
        """Supervision window for transfer step k: the two-window intersection."""
        lo = k * self.dt_ct
        hi = self.t_c + (k - 1) * self.dt_ct
        if hi <= lo:
            raise SchedulingError(
                f"transfer step {k} has empty overlap (dt_ct >= window length)")
        return TimeWindow(lo, hi)


def plan_windows(t_p: float, dt_pc: float, n: int, dt_ct: float, m: int,
                 strict: bool = False) -> WindowPlan:
    """Validate and build a window plan.

    Hard failures: nonpositive durations or negative counts.  The sizing
    recommendations (dt_pc <= T_p/4, T_c <= 3 T_p, dt_ct <= T_c/4) warn
    by default and fail under strict mode.
    """
    if t_p <= 0.0:
        raise ConfigurationError("T_p must be positive")
    if n < 0 or m < 0:
        raise ConfigurationError("step counts must be nonnegative")
    if n > 0 and dt_pc <= 0.0:
        raise ConfigurationError("curriculum step size must be positive")
    if m > 0 and dt_ct <= 0.0:
        raise ConfigurationError("transfer step size must be positive")
    plan = WindowPlan(float(t_p), float(dt_pc), int(n), float(dt_ct), int(m))
    tol = 1e-9 * max(1.0, plan.t_p)
    complaints = []
    if n > 0 and plan.dt_pc > plan.t_p / 4.0 + tol:
        complaints.append(
            f"curriculum step {plan.dt_pc} exceeds a quarter of T_p={plan.t_p}")
    if n > 0 and plan.t_c > 3.0 * plan.t_p + tol:
        complaints.append(f"T_c={plan.t_c} exceeds 3*T_p={3 * plan.t_p}")
    if m > 0 and plan.dt_ct > plan.t_c / 4.0 + tol:
        complaints.append(
            f"transfer step {plan.dt_ct} exceeds a quarter of T_c={plan.t_c}")
    if m > 0 and plan.dt_ct >= plan.t_c:
        raise SchedulingError("transfer step leaves no window overlap")
    for text in complaints:
        if strict:
            raise PlanError(text)
        warnings.warn(text, PlanWarning, stacklevel=2)
    return plan


@dataclass
class TrainConfig:
    """Everything a stage needs besides the problem and the plan."""

    mlp: MlpSpec
    optimizer: str = "lbfgs"
    iters_first: int = 500
    iters_stage: int = 200
    grad_tol: float = 1e-9
    ftol: float = 0.0
    lbfgs_history: int = 10
    adam_lr: float = 1e-3
    counts: dict = field(default_factory=lambda: {
        "residual": 400, "initial": 100, "boundary": 200, "supervised": 400,
    })
    weights: LossWeights = field(default_factory=LossWeights)
    anneal: bool = False
    anneal_alpha: float = 0.1
    anneal_stop: int = 300_000
    anneal_every: int = 1
    base_seed: int = 0
    out_dir: str | None = None
    measurements: Dataset | None = None

    def __post_init__(self):
        if self.optimizer not in ("lbfgs", "adam"):
            raise ConfigurationError("optimizer must be 'lbfgs' or 'adam'")
        if self.anneal and self.optimizer != "adam":
            raise ConfigurationError("weight annealing requires the adam optimizer")


@dataclass
class StageRecord:
    """Outcome of one training stage."""

    kind: str              # standard | curriculum | transfer
    k: int                 # step number within its phase (0 for standard)
    index: int             # position in the pipeline, 0-based
    window: TimeWindow
    params: np.ndarray
    weights: LossWeights
    seeds: dict
    reason: str
    iterations: int
    final_loss: float
    components: dict
    wall_s: float
    checkpoint_path: str | None = None


@dataclass
class CompositeSolution:
    """Piecewise-in-time model with earliest-owner query routing."""

    problem: object
    spec: MlpSpec
    plan: WindowPlan
    base_params: np.ndarray
    transfer_params: list

    def owner(self, t: float):
        """Stage owning time t: the base model up to T_c, else transfer k."""
        if not 0.0 < t <= self.plan.t_t + 1e-9 * max(1.0, self.plan.t_t):
            raise RangeError(f"t={t} outside the solvable range (0, {self.plan.t_t}]")
        if t <= self.plan.t_c or not self.transfer_params:
            return 0
        k = int(np.ceil((t - self.plan.t_c) / self.plan.dt_ct - 1e-12))
        return min(max(k, 1), self.plan.n_transfer)

    def query(self, points) -> dict[str, np.ndarray]:
        """Predict at (X..., t) rows by routing each point to its owner."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        owners = np.array([self.owner(t) for t in pts[:, -1]])
        out: dict[str, np.ndarray] = {}
        for stage in np.unique(owners):
            params = self.base_params if stage == 0 else self.transfer_params[stage - 1]
            mask = owners == stage
            vals = self.problem.predict_values(params, self.spec, pts[mask])
            for key, arr in vals.items():
                if key not in out:
                    out[key] = np.empty(pts.shape[0], dtype=np.float64)
                out[key][mask] = arr
        return out


def _stage_seeds(base_seed: int, stage_index: int) -> dict:
    """Per-kind dataset seeds, derived from (base seed, stage index)."""
    root = int(base_seed) + stage_index
    return {
        "residual": root * 1000 + 1,
        "initial": root * 1000 + 2,
        "boundary": root * 1000 + 3,
        "supervised": root * 1000 + 4,
        "transfer_initial": root * 1000 + 5,
    }


def _window_measurements(measurements: Dataset | None, window: TimeWindow):
    if measurements is None or len(measurements) == 0:
        return None
    t = measurements.points[:, -1]
    mask = (t > window.t_lo) & (t <= window.t_hi)
    if not np.any(mask):
        return None
    return Dataset("measurement", measurements.points[mask],
                   {k: v[mask] for k, v in measurements.targets.items()})


def _build_stage_datasets(problem, window: TimeWindow, seeds: dict, config: TrainConfig,
                          kind: str, source=None, sp_window: TimeWindow | None = None):
    counts = config.counts
    datasets = {"residual": build_dataset(
        "residual", problem, window, counts["residual"], seeds["residual"])}
    uses_bc = getattr(problem, "uses_boundary_data", True)
    if uses_bc and counts.get("boundary", 0):
        datasets["boundary"] = build_dataset(
            "boundary", problem, window, counts["boundary"], seeds["boundary"])
    if kind == "transfer":
        datasets["transfer_initial"] = build_dataset(
            "transfer_initial", problem, window, counts["initial"],
            seeds["transfer_initial"], source_model=source)
    elif getattr(problem, "uses_initial_data", True) and counts.get("initial", 0):
        datasets["initial"] = build_dataset(
            "initial", problem, window, counts["initial"], seeds["initial"])
    if sp_window is not None:
        datasets["supervised"] = build_dataset(
            "supervised", problem, sp_window, counts["supervised"],
            seeds["supervised"], source_model=source)
    meas = _window_measurements(config.measurements, window)
    if meas is not None:
        datasets["measurement"] = meas
    return datasets


def _train(problem, config: TrainConfig, datasets, params0: np.ndarray,
           max_iters: int, stage_index: int):
    """Run one stage's optimization; returns (params, report, objective)."""
    objective = StageObjective(problem, config.mlp, datasets, config.weights)
    train_rows = []
    loss_rows = []

    def snapshot(iteration):
        b = objective.last_breakdown
        if b is not None:
            loss_rows.append((iteration, dict(b.components), dict(b.weights), b.total))

    if config.optimizer == "lbfgs":
        def loss_fn(p):
            total, grad, _ = objective.value_and_grad(p)
            return total, grad

        def cb(it, f, gi, sl):
            train_rows.append((it, f, gi, sl))
            snapshot(it)

        params, report = lbfgs_minimize(
            loss_fn, params0, LbfgsOptions(history=config.lbfgs_history),
            grad_tol=config.grad_tol, ftol=config.ftol, max_iters=max_iters,
            callback=cb)
    else:
        params = np.asarray(params0, dtype=np.float64).copy()
        state = AdamState.fresh(params.shape[0], lr=config.adam_lr)
        weights = config.weights
        total = float("nan")
        grad = np.zeros_like(params)
        for it in range(max_iters):
            if (config.anneal and it < config.anneal_stop
                    and it % config.anneal_every == 0):
                stats = objective.gradient_stats(params)
                if "pde1" in stats:
                    weights = anneal_weights(weights, stats, config.anneal_alpha)
                    objective.weights = weights
            total, grad, _ = objective.value_and_grad(params)
            state, params = adam_step(state, params, grad)
            if it % 50 == 0 or it == max_iters - 1:
                train_rows.append((it + 1, total, float(np.max(np.abs(grad))),
                                   config.adam_lr))
                snapshot(it + 1)
        config.weights = weights  # annealed weights carry into later stages
        objective.weights = weights
        report = OptimReport("max_iters", max_iters, total,
                             float(np.max(np.abs(grad))) if grad.size else 0.0, max_iters)

    if config.out_dir:
        _write_stage_logs(config.out_dir, stage_index, train_rows, loss_rows)
    return params, report, objective


def _write_stage_logs(out_dir, stage_index, train_rows, loss_rows) -> None:
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(f"{out_dir}/stage_{stage_index:02d}_train.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "loss", "grad_norm", "step_len"])
        writer.writerows(train_rows)
    if not loss_rows:
        return
    names = sorted(loss_rows[-1][1])
    with open(f"{out_dir}/stage_{stage_index:02d}_loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration"] + names + [f"w_{n}" for n in names] + ["total"])
        for iteration, comps, weights, total in loss_rows:
            writer.writerow([iteration] + [comps.get(n, "") for n in names]
                            + [weights.get(n, "") for n in names] + [total])


def _finish_stage(kind, k, index, window, params, config, seeds, report, objective,
                  wall_s) -> StageRecord:
    components = objective.components(params)
    path = None
    if config.out_dir:
        import os

        os.makedirs(config.out_dir, exist_ok=True)
        path = f"{config.out_dir}/stage_{index:02d}.ckpt"
        extras = params.shape[0] - param_length(config.mlp)
        save_checkpoint(params, config.mlp, path, extras=extras)
    return StageRecord(kind, k, index, window, params, config.weights, seeds,
                       report.reason, report.iterations, report.final_loss,
                       components, wall_s, path)


def initial_parameters(problem, spec: MlpSpec) -> np.ndarray:
    """Network init plus the problem's physical parameters, if any."""
    extras = np.asarray(getattr(problem, "initial_extras", lambda: np.zeros(0))(),
                        dtype=np.float64)
    return np.concatenate([init_params(spec), extras])


def run_standard_stage(problem, window: TimeWindow, config: TrainConfig,
                       params0: np.ndarray | None = None,
                       stage_index: int = 0) -> StageRecord:
    """Plain training on one window (the pipeline's first stage)."""
    seeds = _stage_seeds(config.base_seed, stage_index)
    datasets = _build_stage_datasets(problem, window, seeds, config, "standard")
    if params0 is None:
        params0 = initial_parameters(problem, config.mlp)
    start = time.perf_counter()
    params, report, objective = _train(problem, config, datasets, params0,
                                       config.iters_first, stage_index)
    return _finish_stage("standard", 0, stage_index, window, params, config, seeds,
                         report, objective, time.perf_counter() - start)


def run_curriculum_stage(k: int, problem, plan: WindowPlan, prev: StageRecord,
                         config: TrainConfig) -> StageRecord:
    """Grow the window; supervise on the previous window with the previous model."""
    window = plan.curriculum_window(k)
    sp_window = TimeWindow(0.0, window.t_hi - plan.dt_pc)
    index = k
    seeds = _stage_seeds(config.base_seed, index)
    source = problem.predictor(prev.params, config.mlp)
    datasets = _build_stage_datasets(problem, window, seeds, config, "curriculum",
                                     source=source, sp_window=sp_window)
    start = time.perf_counter()
    params, report, objective = _train(problem, config, datasets, prev.params,
                                       config.iters_stage, index)
    return _finish_stage("curriculum", k, index, window, params, config, seeds,
                         report, objective, time.perf_counter() - start)


def run_transfer_stage(k: int, problem, plan: WindowPlan, prev: StageRecord,
                       config: TrainConfig) -> StageRecord:
    """Slide the window; initial data at the new start comes from the previous model."""
    window = plan.transfer_window(k)
    overlap = plan.transfer_overlap(k)
    index = plan.n_curriculum + k
    seeds = _stage_seeds(config.base_seed, index)
    source = problem.predictor(prev.params, config.mlp)
    datasets = _build_stage_datasets(problem, window, seeds, config, "transfer",
                                     source=source, sp_window=overlap)
    start = time.perf_counter()
    params, report, objective = _train(problem, config, datasets, prev.params,
                                       config.iters_stage, index)
    return _finish_stage("transfer", k, index, window, params, config, seeds,
                         report, objective, time.perf_counter() - start)


def run_pipeline(problem, plan: WindowPlan, config: TrainConfig):
    """Full curriculum/transfer pipeline; returns (composite, stage records)."""
    records = [run_standard_stage(problem, TimeWindow(0.0, plan.t_p), config)]
    for k in range(1, plan.n_curriculum + 1):
        records.append(run_curriculum_stage(k, problem, plan, records[-1], config))
    for k in range(1, plan.n_transfer + 1):
        records.append(run_transfer_stage(k, problem, plan, records[-1], config))
    base = records[plan.n_curriculum]
    composite = CompositeSolution(
        problem, config.mlp, plan, base.params,
        [r.params for r in records[plan.n_curriculum + 1:]])
    if config.out_dir:
        _write_stage_manifest(config.out_dir, plan, records)
    return composite, records


def _write_stage_manifest(out_dir, plan: WindowPlan, records) -> None:
    import os

    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "plan": {
            "t_p": plan.t_p, "dt_pc": plan.dt_pc, "n_curriculum": plan.n_curriculum,
            "dt_ct": plan.dt_ct, "n_transfer": plan.n_transfer,
            "t_c": plan.t_c, "t_t": plan.t_t,
        },
        "stages": [
            {
                "kind": r.kind, "k": r.k, "index": r.index,
                "window": [r.window.t_lo, r.window.t_hi],
                "checkpoint": r.checkpoint_path,
                "seeds": r.seeds,
                "final_loss": r.final_loss,
                "components": r.components,
                "reason": r.reason,
                "iterations": r.iterations,
                "wall_s": r.wall_s,
            }
            for r in records
        ],
    }
    with open(f"{out_dir}/stages.json", "w") as fh:
        json.dump(payload, fh, indent=2)
