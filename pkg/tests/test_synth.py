import numpy as np
import pytest

from pshlac.core import read_series_csv, read_system_json, validate_system
from pshlac.synth import (
    NODE,
    SynthConfig,
    _rt_prices,
    base_load_shape,
    make_day,
    make_fleet,
    make_history,
    make_storage,
    make_system,
    read_history_csv,
    write_bundle,
    write_history_csv,
)

CFG = SynthConfig(seed=1, history_days=4)


@pytest.fixture(scope="module")
def day0():
    return make_day(CFG, 0)


def test_load_shape_has_two_peaks():
    s = base_load_shape()
    assert len(s) == 24
    assert s.max() == 1.0
    assert int(np.argmax(s)) == 18  # evening peak at hour 19
    # morning shoulder rises above both the night floor and the midday dip
    assert s[7] > s[2]
    assert s[7] > s[12]
    assert s.min() > 0.4


def test_fleet_spans_the_merit_order():
    fleet = make_fleet()
    assert len(fleet) == 7
    assert len({u.id for u in fleet}) == 7
    prices = [seg.price for u in fleet for seg in u.cost_curve]
    assert min(prices) == 8.0 and max(prices) == 82.0
    for u in fleet:
        # convex curves: segment prices non-decreasing, widths fill p_max
        steps = [seg.price for seg in u.cost_curve]
        assert steps == sorted(steps)
        assert sum(seg.mw for seg in u.cost_curve) == u.p_max
        assert 0.0 <= u.p_min <= u.p_max


def test_storage_shares_one_reservoir():
    units, reservoirs = make_storage()
    assert [u.id for u in units] == ["psh1", "psh2"]
    assert all(u.reservoir_id == "upper" for u in units)
    assert (units[0].eta_gen, units[0].eta_pump) == (0.90, 0.87)
    (upper,) = reservoirs
    assert (upper.e_min, upper.e_max) == (200.0, 2600.0)
    assert upper.e_initial == upper.e_final_target == 1300.0
    assert upper.member_units == ("psh1", "psh2")


def test_generated_world_passes_validation(day0):
    assert validate_system(make_system(CFG)) == []
    assert validate_system(day0.system, day0.market_day) == []


def test_day_ahead_clear_outputs(day0):
    assert len(day0.market_day.da_lmp[NODE]) == 24
    assert all(0.0 < p < 200.0 for p in day0.market_day.da_lmp[NODE])
    assert day0.da.commitment.keys() == {u.id for u in make_fleet()}
    # the baseload unit never switches off
    assert day0.da.commitment["nuke1"] == (1,) * 24
    assert day0.da.end_soc["upper"] == pytest.approx(1300.0, abs=1e-6)


def test_days_are_reproducible_and_distinct(day0):
    again = make_day(CFG, 0)
    assert again.market_day == day0.market_day
    assert again.da.gen == day0.da.gen
    assert again.da_load == day0.da_load
    other = make_day(CFG, 1, base_system=make_system(CFG))
    assert other.market_day.load != day0.market_day.load
    assert other.market_day.rt_lmp_actual[NODE] != day0.market_day.rt_lmp_actual[NODE]


def test_price_recursion_is_the_documented_arx():
    da = np.array([20.0, 25.0, 22.0, 30.0])
    got, last = _rt_prices(CFG, da, np.random.default_rng(5))
    rng = np.random.default_rng(5)
    phi, alpha, beta = CFG.price_phi, CFG.price_alpha, CFG.price_beta
    innov_sd = CFG.price_sigma * np.sqrt(1.0 - phi * phi)
    prev = (alpha + beta * da[0]) / (1.0 - phi) + rng.normal(0.0, CFG.price_sigma)
    expect = []
    for v in da:
        prev = alpha + phi * prev + beta * v + rng.normal(0.0, innov_sd)
        expect.append(prev)
    assert np.allclose(got, expect, atol=1e-12)
    assert last == expect[-1]
    # chaining: passing the last value continues the recursion, no re-draw
    cont, _ = _rt_prices(CFG, da, np.random.default_rng(6), prev=last)
    fresh, _ = _rt_prices(CFG, da, np.random.default_rng(6), prev=None)
    assert not np.allclose(cont, fresh)


def test_history_chains_across_days():
    hist = make_history(CFG)
    rt, da = hist[NODE]
    assert rt.shape == da.shape == (4 * 24,)
    rt2, da2 = make_history(CFG)[NODE]
    assert np.array_equal(rt, rt2) and np.array_equal(da, da2)


def test_history_csv_round_trip(tmp_path):
    hist = make_history(CFG)
    p = tmp_path / "history.csv"
    write_history_csv(p, hist)
    back = read_history_csv(p)
    assert np.array_equal(back[NODE][0], hist[NODE][0])
    assert np.array_equal(back[NODE][1], hist[NODE][1])


def test_history_csv_guards(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,node,rt,da\n")
    with pytest.raises(ValueError, match="unexpected history header"):
        read_history_csv(bad)
    short = tmp_path / "short.csv"
    short.write_text("hour,node,rt_lmp,da_lmp\n1,bus,20.0\n")
    with pytest.raises(ValueError, match="line 2: expected 4 fields"):
        read_history_csv(short)


def test_bundle_writes_the_full_file_set(tmp_path):
    paths = write_bundle(CFG, tmp_path / "bundle")
    assert sorted(paths) == ["da_lmp", "da_load", "history", "load", "rt_lmp", "system"]
    day = make_day(CFG, 0)
    system = read_system_json(paths["system"])
    assert system.psh_units[0].da_gen == day.system.psh_units[0].da_gen
    load = read_series_csv(paths["load"])
    assert tuple(load["system"]) == day.market_day.load
    rt = read_series_csv(paths["rt_lmp"])
    assert tuple(rt[NODE]) == day.market_day.rt_lmp_actual[NODE]
    hist = read_history_csv(paths["history"])
    assert hist[NODE][0].shape == (4 * 24,)
