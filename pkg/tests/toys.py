"""Small hand-sized problem builders shared across test modules.

``window_setup`` produces the same problem twice: once as package
objects ready for the model builders, once as an :class:`oracle_tools.
ToyWindow` for the exhaustive reference optimum.  Keeping both views in
one constructor is what makes the equivalence tests meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from pshlac.core import (
    CostSegment,
    FrozenDecision,
    InitialStatus,
    MarketDay,
    PowerSystem,
    PriceScenarioSet,
    PshUnit,
    Reservoir,
    ThermalUnit,
    TimeGrid,
)
from pshlac.lac_models import DaReference, LacInstance, ModelConfig

from oracle_tools import ToyWindow

NODE = "n1"


@dataclass
class WindowSetup:
    system: PowerSystem
    instance: LacInstance
    cfg: ModelConfig
    toy: ToyWindow
    market_day: MarketDay


def window_setup(
    *,
    T: int = 3,
    t1: int = 1,
    L: int = 2,
    loads: Sequence[float] = (50.0, 50.0, 50.0),
    prices: Sequence[Sequence[float]] = ((30.0,),),
    weights: Sequence[float] = (1.0,),
    da_gen: Sequence[float] | None = None,
    da_pump: Sequence[float] | None = None,
    e_init: float = 20.0,
    e_min: float = 0.0,
    e_max: float = 40.0,
    e_target: float = 10.0,
    end_soc: str = "fix",
    eta_gen: float = 1.0,
    eta_pump: float = 1.0,
    gen_min: float = 0.0,
    gen_max: float = 20.0,
    pump_min: float = 0.0,
    pump_max: float = 20.0,
    trans_gen: float = 0.0,
    trans_pump: float = 0.0,
    init_mode: str = "off",
    thermal_segments: Sequence[tuple[float, float]] = ((200.0, 20.0),),
    no_load: float = 0.0,
    voll: float = 3500.0,
    gap_tol: float = 1e-9,
    grid_step: float = 10.0,
) -> WindowSetup:
    """One thermal unit, one PSH unit, one reservoir, window [t1, t1+L-1].

    ``loads`` covers the whole day; ``prices`` is per scenario over the
    post-window hours (ignored when the window reaches the day end).
    """
    grid = TimeGrid(t1, T, L, 1.0)
    te = grid.window_end
    thermal = ThermalUnit(
        "th1",
        tuple(CostSegment(mw, pr) for mw, pr in thermal_segments),
        no_load_cost=no_load,
        startup_cost=0.0,
        p_min=0.0,
        p_max=sum(mw for mw, _ in thermal_segments),
        initial_status=InitialStatus(True, 24),
        da_commitment=(1,) * T,
    )
    unit = PshUnit(
        "ps1", "res1", NODE, gen_min, gen_max, pump_min, pump_max, eta_gen, eta_pump,
        startup_cost_gen=trans_gen, startup_cost_pump=trans_pump,
        initial_mode=init_mode,
        da_gen=tuple(da_gen) if da_gen is not None else (0.0,) * T,
        da_pump=tuple(da_pump) if da_pump is not None else (0.0,) * T,
    )
    res = Reservoir("res1", e_min, e_max, e_init, e_target, ("ps1",))
    system = PowerSystem(grid, (thermal,), (unit,), (res,))
    da = DaReference(
        gen={"ps1": unit.da_gen},
        pump={"ps1": unit.da_pump},
        commitment={"th1": thermal.da_commitment},
        end_soc={"res1": e_target},
    )

    post = tuple(range(te + 1, T + 1))
    scn = None
    if post:
        arr = np.asarray(prices, dtype=float).reshape(len(weights), 1, len(post))
        scn = PriceScenarioSet((NODE,), te + 1, arr, tuple(float(w) for w in weights))

    # hours before t1 are represented by idle placeholder records; only
    # their count matters to instance validation
    history = tuple(
        FrozenDecision(
            hour=t, psh_mode={"ps1": "off"}, psh_gen={"ps1": 0.0}, psh_pump={"ps1": 0.0},
            thermal_commit={"th1": 1}, thermal_p={"th1": float(loads[t - 1])},
            soc_after={"res1": e_init},
        )
        for t in range(1, t1)
    )
    instance = LacInstance(
        system=system,
        window=grid,
        net_load=tuple(float(v) for v in loads[t1 - 1 : te]),
        da=da,
        soc_state={"res1": e_init},
        prev_modes={"ps1": init_mode},
        scenario_set=scn,
        fixed_history=history,
    )
    cfg = ModelConfig(voll=voll, gap_tol=gap_tol, time_limit=30.0,
                      end_soc=end_soc, time_preference=0.0)

    toy = ToyWindow(
        hours_in=tuple(range(t1, te + 1)),
        hours_post=post,
        net_load={t: float(loads[t - 1]) for t in range(t1, T + 1)},
        prices={(s, t): float(prices[s][i]) for s in range(len(weights))
                for i, t in enumerate(post)},
        weights=tuple(float(w) for w in weights),
        da_net={t: float(unit.da_gen[t - 1] - unit.da_pump[t - 1]) for t in range(1, T + 1)},
        e_init=e_init, e_min=e_min, e_max=e_max, e_target=e_target,
        end_sense=end_soc if end_soc == "relax" else "fix",
        eta_gen=eta_gen, eta_pump=eta_pump,
        gen_max=gen_max, pump_max=pump_max,
        trans_cost_gen=trans_gen, trans_cost_pump=trans_pump,
        init_mode=init_mode,
        thermal_segments=tuple((float(mw), float(pr)) for mw, pr in thermal_segments),
        thermal_no_load=no_load,
        voll=voll,
        grid_step=grid_step,
    )
    flat = tuple(20.0 for _ in range(T))
    market_day = MarketDay("toy", tuple(float(v) for v in loads),
                           {NODE: flat}, {NODE: flat})
    return WindowSetup(system, instance, cfg, toy, market_day)


def rolling_day_setup(
    *,
    T: int = 3,
    L: int = 2,
    loads: Sequence[float] = (50.0, 50.0, 50.0),
    rt_lmp: Sequence[float] = (20.0, 20.0, 20.0),
    da_gen: Sequence[float] = (0.0, 0.0, 10.0),
    e_init: float = 20.0,
    e_target: float = 10.0,
) -> tuple[PowerSystem, MarketDay, DaReference]:
    """Whole-day toy for the rolling loop: day-ahead plan already embedded.

    The default day-ahead plan discharges 10 MW in the last hour, which is
    exactly what the end target requires from the initial fill.
    """
    ws = window_setup(T=T, t1=1, L=L, loads=loads, da_gen=da_gen,
                      e_init=e_init, e_target=e_target)
    day = MarketDay(
        "toyday",
        tuple(float(v) for v in loads),
        {NODE: tuple(20.0 for _ in range(T))},
        {NODE: tuple(float(v) for v in rt_lmp)},
    )
    return ws.system, day, ws.instance.da


def full_set_for_day(prices_by_scenario: Sequence[Sequence[float]],
                     weights: Sequence[float] | None = None) -> PriceScenarioSet:
    """Whole-day scenario set (start hour 1) for FrozenSetProvider toys."""
    arr = np.asarray(prices_by_scenario, dtype=float)
    S, H = arr.shape
    w = tuple(float(v) for v in (weights or [1.0 / S] * S))
    return PriceScenarioSet((NODE,), 1, arr.reshape(S, 1, H), w)
