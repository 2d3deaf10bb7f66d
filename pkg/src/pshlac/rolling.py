"""Fix-and-slide simulation of one operating day.

Each window [t1, t1+L-1] is solved with actual load inside the window
and forecast-derived information beyond it, the first hour's decisions
are frozen, and the window slides by one hour.  Frozen decisions feed
the next window through the reservoir state and the previous-hour mode;
reservoir bookkeeping uses the same energy balance as the models, so
the ledger trajectory is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Mapping, Protocol, Sequence

from .core import (
    FrozenDecision,
    MarketDay,
    PowerSystem,
    PriceScenarioSet,
    PshMode,
    TimeGrid,
)
from .lac_models import (
    DaReference,
    LacInstance,
    ModelConfig,
    Variant,
    build_variant,
    da_reference_from_system,
)
from .milp import MilpModel, MilpSolution, SolveOptions, infeasibility_report, solve
from .psh_model import soc_step


class WindowInfeasibleError(RuntimeError):
    def __init__(self, window_index: int, t1: int, status: str, conflict_rows: list[str]):
        self.window_index = window_index
        self.t1 = t1
        self.conflict_rows = conflict_rows
        rows = "; ".join(conflict_rows) if conflict_rows else "<none identified>"
        super().__init__(
            f"window {window_index} (t1={t1}) ended {status}; conflicting rows: {rows}"
        )


@dataclass(frozen=True)
class WindowView:
    """What a window is allowed to see: actual load inside the window,
    realized prices strictly before it."""

    hours: tuple[int, ...]
    net_load: tuple[float, ...]
    observed_rt_lmp: Mapping[str, tuple[float, ...]]


def reveal_policy(market_day: MarketDay, window: TimeGrid) -> WindowView:
    t0 = window.start_index - 1
    hours = tuple(window.window_hours())
    net_load = tuple(float(market_day.load[t - 1]) for t in hours)
    observed = {
        node: tuple(series[:t0]) for node, series in sorted(market_day.rt_lmp_actual.items())
    }
    return WindowView(hours, net_load, observed)


class ScenarioProvider(Protocol):
    def full_set(self, t0: int, observed_rt: Mapping[str, Sequence[float]]) -> PriceScenarioSet:
        """Trajectories for hours t0+1 .. T."""

    def point_set(self, t0: int, observed_rt: Mapping[str, Sequence[float]]) -> PriceScenarioSet:
        """Single point-forecast trajectory for hours t0+1 .. T."""


class PipelineProvider:
    """Scenario provider backed by a fitted forecast pipeline."""

    def __init__(self, pipeline, day_da: Mapping[str, Sequence[float]], horizon_end: int,
                 count: int, seed: int):
        self.pipeline = pipeline
        self.day_da = {k: tuple(v) for k, v in day_da.items()}
        self.horizon_end = horizon_end
        self.count = count
        self.seed = seed

    def full_set(self, t0, observed_rt):
        return self.pipeline.scenario_set(
            t0, observed_rt, self.day_da, self.horizon_end, self.count, self.seed
        )

    def point_set(self, t0, observed_rt):
        return self.pipeline.point_set(t0, observed_rt, self.day_da, self.horizon_end)


class FrozenSetProvider:
    """Reuses one origin's trajectories for every window (speed knob) or
    serves sets loaded from files, keyed by origin."""

    def __init__(self, sets: Mapping[int, PriceScenarioSet], points: Mapping[int, PriceScenarioSet] | None = None,
                 reuse_origin: int | None = None):
        self._sets = dict(sets)
        self._points = dict(points or {})
        self._reuse = reuse_origin

    def _lookup(self, table: dict[int, PriceScenarioSet], t0: int) -> PriceScenarioSet:
        key = self._reuse if self._reuse is not None else t0
        if key not in table:
            raise KeyError(f"no scenario data for forecast origin {key}")
        scn = table[key]
        if scn.start_hour > t0 + 1:
            raise KeyError(f"scenario data at origin {key} starts after hour {t0 + 1}")
        return scn.slice_hours(t0 + 1)

    def full_set(self, t0, observed_rt):
        return self._lookup(self._sets, t0)

    def point_set(self, t0, observed_rt):
        return self._lookup(self._points, t0)


@dataclass(frozen=True)
class WindowMetric:
    window: int
    t1: int
    status: str
    objective: float
    walltime_s: float
    rows: int
    cols: int
    nonzeros: int


@dataclass
class WindowDetail:
    """In-memory record of a solved window, kept only on request."""

    window: int
    t1: int
    model: MilpModel
    solution: MilpSolution
    instance: LacInstance


@dataclass
class SimulationLedger:
    variant: str
    day_label: str
    seed: int
    hours: list[FrozenDecision] = field(default_factory=list)
    windows: list[WindowMetric] = field(default_factory=list)
    details: list[WindowDetail] = field(default_factory=list)  # not serialized

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for h in self.hours:
                rec = {
                    "variant": self.variant,
                    "day": self.day_label,
                    "seed": self.seed,
                    **asdict(h),
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def write_metrics_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("window,t1,status,objective,walltime_s,rows,cols,nonzeros\n")
            for m in self.windows:
                fh.write(
                    f"{m.window},{m.t1},{m.status},{m.objective!r},{m.walltime_s!r},"
                    f"{m.rows},{m.cols},{m.nonzeros}\n"
                )

    @classmethod
    def from_jsonl(cls, path) -> "SimulationLedger":
        hours = []
        variant = day = ""
        seed = 0
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                variant = rec.pop("variant")
                day = rec.pop("day")
                seed = rec.pop("seed")
                hours.append(FrozenDecision(**rec))
        out = cls(variant, day, seed)
        out.hours = hours
        return out


@dataclass
class RunControl:
    scenario_count: int = 50
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolveOptions = field(default_factory=SolveOptions)
    keep_window_details: bool = False


def _freeze_hour(
    system: PowerSystem,
    model: MilpModel,
    sol: MilpSolution,
    t1: int,
    soc_in: Mapping[str, float],
) -> FrozenDecision:
    det = model.meta["det_block"]
    psh_mode = {}
    psh_gen = {}
    psh_pump = {}
    for u in system.psh_units:
        mode = PshMode.OFF.value
        for m in ("off", "gen", "pump"):
            if sol.binary_value(det.u[(u.id, m, t1)]) == 1:
                mode = m
        psh_mode[u.id] = mode
        psh_gen[u.id] = _clean(sol.value(det.q_gen[(u.id, t1)]))
        psh_pump[u.id] = _clean(sol.value(det.q_pump[(u.id, t1)]))
    thermal_commit = {}
    thermal_p = {}
    for u in system.thermal_units:
        thermal_commit[u.id] = sol.binary_value(model.meta["thermal_u"][(u.id, t1)])
        thermal_p[u.id] = _clean(sol.value(model.meta["thermal_p"][(u.id, t1)]))
    soc_after = {
        r.id: soc_step(system.psh_units, r, float(soc_in[r.id]), psh_gen, psh_pump,
                       system.grid.interval_hours)
        for r in system.reservoirs
    }
    sh, su = model.meta["slack_vars"][t1]
    return FrozenDecision(
        hour=t1,
        psh_mode=psh_mode,
        psh_gen=psh_gen,
        psh_pump=psh_pump,
        thermal_commit=thermal_commit,
        thermal_p=thermal_p,
        soc_after=soc_after,
        slack_short=_clean(sol.value(sh)),
        slack_surplus=_clean(sol.value(su)),
    )


def _clean(v: float, tol: float = 1e-9) -> float:
    return 0.0 if abs(v) < tol else float(v)


def run_day(
    system: PowerSystem,
    market_day: MarketDay,
    variant: Variant,
    provider: ScenarioProvider | None,
    control: RunControl | None = None,
    da: DaReference | None = None,
) -> SimulationLedger:
    """Simulate the day under one variant and return its ledger.

    The perfect variant bypasses the reveal policy by design: it prices
    nothing and sees the whole day's load.  Any infeasible window aborts
    with the window index and the conflicting row names.
    """
    control = control or RunControl()
    if da is None:
        da = da_reference_from_system(system)
    grid = system.grid
    T = grid.horizon_end
    L = grid.window_length
    needs_scenarios = variant in (Variant.STOCHASTIC, Variant.ROBUST, Variant.DETERMINISTIC)
    if needs_scenarios and provider is None:
        raise ValueError(f"variant {variant.value} needs a scenario provider")

    ledger = SimulationLedger(variant.value, market_day.label, control.seed)
    soc = {r.id: float(r.e_initial) for r in system.reservoirs}
    prev_modes = {u.id: u.initial_mode for u in system.psh_units}
    history: list[FrozenDecision] = []

    last_start = max(1, T - L + 1)
    for w_index, t1 in enumerate(range(1, last_start + 1), start=1):
        win = TimeGrid(t1, T, L, grid.interval_hours)
        te = win.window_end
        view = reveal_policy(market_day, win)
        scn = None
        if needs_scenarios and te < T:
            t0 = t1 - 1
            if variant == Variant.DETERMINISTIC:
                full = provider.point_set(t0, view.observed_rt_lmp)
            else:
                full = provider.full_set(t0, view.observed_rt_lmp)
            scn = full.slice_hours(te + 1)
        inst = LacInstance(
            system, win, view.net_load, da, dict(soc), dict(prev_modes), scn, tuple(history)
        )
        model = build_variant(
            variant, inst, control.model,
            full_day_load=market_day.load if variant == Variant.PERFECT else None,
        )
        sol = solve(model, control.solver)
        if not sol.ok:
            raise WindowInfeasibleError(w_index, t1, sol.status, infeasibility_report(model))
        frozen = _freeze_hour(system, model, sol, t1, soc)
        history.append(frozen)
        ledger.hours.append(frozen)
        ledger.windows.append(
            WindowMetric(
                w_index, t1, sol.status, float(sol.objective), float(sol.walltime_s),
                model.n_rows, model.n_vars, model.n_nonzeros,
            )
        )
        if control.keep_window_details:
            ledger.details.append(WindowDetail(w_index, t1, model, sol, inst))
        soc = dict(frozen.soc_after)
        prev_modes = dict(frozen.psh_mode)

    # tail hours of the final window stay frozen too: the last window
    # already covers them and nothing re-optimizes them afterwards
    if history:
        final = ledger.details[-1] if control.keep_window_details else None
        last_model, last_sol, last_t1 = (
            (final.model, final.solution, final.t1) if final else (model, sol, t1)
        )
        for t in range(last_t1 + 1, T + 1):
            frozen = _freeze_hour_at(system, last_model, last_sol, t, ledger.hours[-1].soc_after)
            ledger.hours.append(frozen)
    return ledger


def _freeze_hour_at(system, model, sol, t, soc_in):
    # same extraction as _freeze_hour but for an arbitrary in-window hour
    return _freeze_hour(system, model, sol, t, soc_in)


def causality_check(ledger_a: SimulationLedger, ledger_b: SimulationLedger, through_hour: int) -> bool:
    """True when both ledgers agree on every frozen hour up to the given hour."""
    for ha, hb in zip(ledger_a.hours, ledger_b.hours):
        if ha.hour > through_hour:
            break
        if asdict(ha) != asdict(hb):
            return False
    return True
