import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from tsmcast import simulator as sim
from tsmcast.analysis import load_pmf, sinr_ccdf
from tsmcast.model import CacheDesign, ModelBundle, NetworkConfig, Popularity, SchemeConfig, zipf_popularity
from tsmcast.simulator import ScenarioSnapshot, SimulationSettings


def snapshot(bs, combos_of, users=(), requests=(), tiers=None, design=None):
    design = design or CacheDesign.uniform(3, 2)  # (1,2), (1,3), (2,3)
    bs = np.array(bs, dtype=float).reshape(-1, 2)
    return ScenarioSnapshot(
        radius=100.0,
        user_radius=100.0,
        bs_xy=bs,
        bs_tier=np.array(tiers if tiers is not None else [1] * len(bs)),
        bs_combo=np.array(combos_of, dtype=int),
        user_xy=np.array(users, dtype=float).reshape(-1, 2),
        requests=np.array(requests, dtype=int).reshape(len(users), -1) if users else np.empty((0, 1), int),
        membership=design.combos.membership,
    )


# --- slots and association ------------------------------------------------


@pytest.mark.parametrize("t0,tau0,period,expected", [(3, 1, 2, 3), (3, 2, 2, 4), (4, 2, 2, 4), (9, 3, 3, 9), (7, 1, 3, 7), (7, 2, 3, 8)])
def test_serving_slot(t0, tau0, period, expected):
    assert sim.serving_slot(t0, tau0, period) == expected


@given(st.integers(1, 12), st.data())
def test_serving_slot_is_next_active_slot(period, data):
    t0 = data.draw(st.integers(period, 500))
    tau0 = data.draw(st.integers(1, period))
    slot = sim.serving_slot(t0, tau0, period)
    assert t0 <= slot < t0 + period
    assert slot % period == tau0 % period


def test_serving_bs_cache_aware():
    snap = snapshot([[1, 0], [0, 2]], combos_of=[1, 2])  # {1,3} at 1, {2,3} at 2
    assert sim.serving_bs(snap, (0, 0), 2) == 1
    assert sim.serving_bs(snap, (0, 0), 3) == 0
    assert sim.serving_bs(snap, (0, 0), 1) == 0
    assert sim.nearest_bs(snap, (0, 0)) == 0


def test_serving_bs_missing_file():
    snap = snapshot([[1, 0]], combos_of=[1])
    assert sim.serving_bs(snap, (0, 0), 2) is None
    assert sim.serving_bs(snapshot([], combos_of=[]), (0, 0), 1) is None


# --- window load --------------------------------------------------------------


def test_window_load_counts_routed_requests():
    # typical request for file 1 at BS0 = {1,2}; BS1 = {2,3} far to the left
    bs = [[1, 0], [-5, 0]]
    assert sim.window_load(snapshot(bs, [0, 2]), 0, 1) == 1
    near_user = snapshot(bs, [0, 2], users=[[2, 0]], requests=[[2]])
    assert sim.window_load(near_user, 0, 1) == 2
    far_user = snapshot(bs, [0, 2], users=[[-4, 0]], requests=[[2]])
    assert sim.window_load(far_user, 0, 1) == 1
    # request for an uncached file never adds load
    other = snapshot(bs, [0, 2], users=[[2, 0]], requests=[[3]])
    assert sim.window_load(other, 0, 1) == 1


def test_window_load_spans_the_whole_window():
    bs = [[1, 0], [-5, 0]]
    snap = snapshot(bs, [0, 2], users=[[2, 0], [1, 1]], requests=[[1, 1, 2], [1, 1, 1]])
    assert sim.window_load(snap, 0, 1) == 2


def test_window_load_single_file_cache():
    design = CacheDesign.uniform(3, 1)
    snap = snapshot([[1, 0], [3, 0]], [0, 1], users=[[1, 1]], requests=[[2]], design=design)
    assert sim.window_load(snap, 0, 1) == 1


def test_nearest_load_backhaul_and_cached_only():
    bs = [[1, 0], [-5, 0]]
    snap = snapshot(bs, [0, 2], users=[[2, 0], [1, 1]], requests=[[3], [2]])
    assert sim._window_load_nearest(snap, 0, 1, cached_only=False) == 3
    assert sim._window_load_nearest(snap, 0, 1, cached_only=True) == 2


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cell_membership_matches_kdtree(seed):
    rng = np.random.default_rng(seed)
    sites = rng.uniform(-10, 10, (rng.integers(1, 80), 2))
    points = rng.uniform(-12, 12, (rng.integers(0, 300), 2))
    b = int(rng.integers(len(sites)))
    owner = cKDTree(sites).query(points)[1] if len(points) else np.zeros(0, int)
    np.testing.assert_array_equal(sim._in_cell(points, sites, b), owner == b)


# --- scenario sampling ----------------------------------------------------


def test_sample_scenario_single_tier(ref_net, ref_pop, ref_design):
    snap = sim.sample_scenario(ref_net, ref_pop, ref_design, SchemeConfig(1, 0), 40.0, np.random.default_rng(1))
    assert np.all(snap.bs_tier == 1)
    assert snap.requests.shape == (snap.user_xy.shape[0], 1)


def test_sample_scenario_empty_region(ref_net, ref_pop, ref_design):
    snap = sim.sample_scenario(ref_net, ref_pop, ref_design, SchemeConfig(3, 0), 0.0, np.random.default_rng(1))
    assert snap.n_bs == 0 and snap.user_xy.shape[0] == 0


def test_sample_scenario_poisson_means(ref_net, ref_pop, ref_design):
    radius, reps = 20.0, 10_000
    rng = np.random.default_rng(11)
    counts, tiers, requests = [], [], []
    for _ in range(reps):
        snap = sim.sample_scenario(ref_net, ref_pop, ref_design, SchemeConfig(3, 0), radius, rng, with_users=False)
        counts.append(snap.n_bs)
        tiers.extend(snap.bs_tier.tolist())
    mean = ref_net.lambda_b * math.pi * radius**2
    assert abs(np.mean(counts) - mean) < 3 * math.sqrt(mean / reps)
    assert set(tiers) == {1, 2, 3}
    snap = sim.sample_scenario(ref_net, ref_pop, ref_design, SchemeConfig(4, 0), 200.0, np.random.default_rng(3))
    freq = np.bincount(snap.requests.ravel(), minlength=6)[1:] / snap.requests.size
    np.testing.assert_allclose(freq, ref_pop.a, atol=0.01)
    assert np.all(np.linalg.norm(snap.bs_xy, axis=1) <= 200.0)


def test_scenario_json_dump(ref_net, ref_pop, ref_design, tmp_path):
    bundle = ModelBundle(ref_net, ref_pop, ref_design, SchemeConfig(2, 1e6))
    paths = sim.dump_scenarios(bundle, SimulationSettings(trials=5, seed=4), 3, tmp_path)
    assert len(paths) == 3
    doc = json.loads(paths[0].read_text())
    assert doc["trial"] == 0 and 1 <= doc["requested_file"] <= 5
    assert {"x", "y", "tier", "combination"} <= set(doc["bs"][0])
    assert len(doc["requests"]) == len(doc["users"])


# --- SINR ------------------------------------------------------------------


def test_sinr_single_bs_is_noise_limited(ref_net):
    snap = snapshot([[3, 4]], [0])
    value = sim.sinr_sample(snap, 0, 1, ref_net, np.random.default_rng(8))
    h = np.random.default_rng(8).exponential(size=1)[0]
    assert value == pytest.approx(h * 5.0**-4 * ref_net.snr_ratio, rel=1e-12)


def test_sinr_interference_only_from_same_tier():
    net = NetworkConfig(0.01, 0.1, 4, 1e7, 1e300)
    snap = snapshot([[1, 0], [2, 0], [0, 3]], [0, 0, 0], tiers=[1, 1, 2])
    value = sim.sinr_sample(snap, 0, 1, net, np.random.default_rng(2))
    h = np.random.default_rng(2).exponential(size=2)
    assert value == pytest.approx(h[0] / (h[1] * 2.0**-4), rel=1e-12)
    assert value > 0


def test_empirical_interference_limited_coverage():
    net = NetworkConfig(0.01, 0.1, 4, 1e7, 1e12)
    bundle = ModelBundle(net, Popularity([1.0]), CacheDesign.dense(1, 1, [1.0]), SchemeConfig(1, 1e7))
    est = sim.estimate(bundle, SimulationSettings(trials=20_000, seed=12))
    assert abs(est.q_hat - 1 / (1 + math.pi / 4)) <= est.ci95 + 0.002


def test_empirical_sinr_ccdf_matches_analysis(ref_bundle):
    batch = sim.simulate(ref_bundle, SimulationSettings(trials=5_000, seed=21))
    net, pop, design = ref_bundle.net, ref_bundle.pop, ref_bundle.design
    for eta in (0.5, 1.0, 2.0):
        empirical = np.mean(batch.sinr >= eta)
        expected = sum(pop.a[n - 1] * sinr_ccdf(eta, design.hit[n - 1], net, 2) for n in range(1, 6))
        ci = 1.96 * math.sqrt(empirical * (1 - empirical) / len(batch))
        assert abs(empirical - expected) <= ci + 0.01


# --- trials and estimates ----------------------------------------------------


def test_zero_rate_trial_succeeds(ref_bundle):
    bundle = ref_bundle.with_scheme(rate_theta=0.0)
    out = sim.run_trial(bundle, sim.trial_rng(0, 0))
    assert out.success and 1 <= out.load <= 4 and out.sinr >= 0


def test_trial_without_bs_fails(ref_bundle):
    out = sim.run_trial(ref_bundle.with_scheme(rate_theta=0.0), sim.trial_rng(0, 0), radius=0.0)
    assert out.no_serving_bs and not out.success


def test_single_trial_estimate(ref_bundle):
    est = sim.estimate(ref_bundle.with_scheme(rate_theta=0.0), SimulationSettings(trials=1, seed=3))
    assert est.q_hat == 1.0 and est.trials == 1


def test_continuous_baseline_is_proposed_at_unit_period(ref_bundle):
    bundle = ref_bundle.with_scheme(period_t=1)
    a = sim.simulate(bundle, SimulationSettings(trials=200, seed=5))
    b = sim.simulate(ref_bundle, SimulationSettings(trials=200, seed=5, variant=sim.BASELINE_CONTINUOUS))
    for name in ("file", "load", "sinr", "distance"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_single_file_cache_unit_period_reduction(ref_net):
    pop = zipf_popularity(3, 1)
    bundle = ModelBundle(ref_net, pop, CacheDesign.dense(3, 1, [0.5, 0.3, 0.2]), SchemeConfig(1, 2e6))
    a = sim.estimate(bundle, SimulationSettings(trials=300, seed=9))
    b = sim.estimate(bundle, SimulationSettings(trials=300, seed=9, variant=sim.BASELINE_CONTINUOUS))
    assert a.q_hat == b.q_hat and a.q_hat_per_file == b.q_hat_per_file


def test_threads_do_not_change_results(ref_bundle):
    runs = [sim.estimate(ref_bundle, SimulationSettings(trials=120, seed=77, threads=t)) for t in (1, 3, 8)]
    assert runs[0] == runs[1] == runs[2]


def test_estimate_per_file_aggregation(ref_bundle):
    est = sim.estimate(ref_bundle, SimulationSettings(trials=600, seed=2))
    counts = np.array(est.trials_per_file)
    per = np.nan_to_num(np.array(est.q_hat_per_file))
    assert counts.sum() == est.trials
    assert est.q_hat == pytest.approx(float(counts @ per) / est.trials, abs=1e-12)
    assert 0 <= est.q_hat <= 1 and est.ci95 > 0


def test_edge_budget_default_radius(ref_bundle):
    est = sim.estimate(ref_bundle, SimulationSettings(trials=2_000, seed=31))
    assert est.edge_freq < 1e-3
    assert est.no_serving_freq == 0


def test_temporal_baseline_cache_miss_rate(ref_bundle):
    settings_ = SimulationSettings(trials=3_000, seed=14, variant=sim.BASELINE_TEMPORAL)
    batch = sim.simulate(ref_bundle, settings_)
    miss = np.mean((batch.load == 0) & ~batch.no_serving)
    expected = float(ref_bundle.pop.a @ (1 - ref_bundle.design.hit))
    assert abs(miss - expected) < 3 * math.sqrt(expected * (1 - expected) / len(batch))
    served = sim.simulate(ref_bundle, SimulationSettings(trials=300, seed=14, variant=sim.BASELINE_TEMPORAL, baseline_backhaul=True))
    assert np.all(served.load >= 1)
    assert np.all(served.load <= ref_bundle.pop.n_files)


def test_loaded_interferers_flag_only_raises_sinr(ref_bundle):
    base = sim.simulate(ref_bundle, SimulationSettings(trials=150, seed=6))
    quiet = sim.simulate(ref_bundle, SimulationSettings(trials=150, seed=6, loaded_interferers_only=True))
    np.testing.assert_array_equal(base.load, quiet.load)
    assert np.mean(quiet.sinr >= base.sinr) > 0.5


def test_empirical_load_monotone_in_period(ref_bundle):
    means = [
        sim.simulate(ref_bundle.with_scheme(period_t=t), SimulationSettings(trials=2_500, seed=40)).load.mean()
        for t in (1, 2, 4, 8)
    ]
    assert np.all(np.diff(means) >= 0)


@pytest.mark.slow
def test_empirical_load_pmf_matches_approximation():
    pop = Popularity([0.8, 0.2])
    design = CacheDesign.dense(2, 2, [1.0])
    net = NetworkConfig(0.01, 0.1, 4, 1e7, 1e3)
    batch = sim.simulate(ModelBundle(net, pop, design, SchemeConfig(1, 0)), SimulationSettings(trials=100_000, seed=5))
    for n in (1, 2):
        mask = batch.file == n
        empirical = np.bincount(batch.load[mask], minlength=3)[1:] / mask.sum()
        np.testing.assert_allclose(empirical, load_pmf(n, pop, design, net, 1).probs, atol=0.01)
