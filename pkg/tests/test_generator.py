import numpy as np
import pytest

from turbohse import generator
from turbohse.domain import HI_MAX, HI_MIN, N_HI, states_within_bounds
from turbohse.generator import (
    ConfigError,
    DegradationSpeed,
    GenerationConfig,
    NoiseConfig,
    SpeedPolicy,
    add_sensor_noise,
    apply_maintenance,
    compute_channel_ranges,
    generate_dataset,
    generate_trajectory,
    sample_maintenance_schedule,
)


def ramp_config(max_len, mu=-2e-5, jitter=0.0, maint=(10**8, 10**8), n=1, seed=0):
    """All three regimes collapsed onto one deterministic slope."""
    speeds = {tag: DegradationSpeed(tag, mu, 0.0) for tag in generator.SPEED_TAGS}
    return GenerationConfig(
        n_trajectories=n,
        max_len=max_len,
        speed_params=speeds,
        jitter_sigma=jitter,
        maint_interval=maint,
        base_seed=seed,
    )


# -- deterministic ramps and termination --------------------------------------


def test_deterministic_ramp_is_exact_line():
    traj = generate_trajectory(ramp_config(100), 0)
    assert traj.length == 100
    assert not traj.terminated_early
    assert np.array_equal(traj.states[0], np.zeros(N_HI))
    # sequential float accumulation oracle, then the ideal line
    acc = 0.0
    expected = np.empty(100)
    for t in range(100):
        expected[t] = acc
        acc += -2e-5
    for i in range(N_HI):
        assert np.array_equal(traj.states[:, i], expected)
    ideal = -2e-5 * np.arange(100)
    assert np.allclose(traj.states[:, 0], ideal, rtol=0, atol=1e-15)


def test_ramp_terminates_at_bound_violation():
    # independent float-accumulation oracle for the first step strictly below -0.05
    acc, t_star = 0.0, 0
    while acc >= -0.05:
        acc += -2e-5
        t_star += 1
    traj = generate_trajectory(ramp_config(3000), 0)
    assert traj.terminated_early
    assert traj.length == t_star + 1
    assert np.array_equal(traj.states[-1], np.clip(np.full(N_HI, acc), HI_MIN, HI_MAX))
    assert states_within_bounds(traj.states)


def test_efficiency_ceiling_clips_without_terminating():
    # positive drift pushes efficiencies against their nominal ceiling at 0:
    # the walk must clip there and keep going, not die at the first step
    speeds = {tag: DegradationSpeed(tag, 0.0, 2e-5) for tag in generator.SPEED_TAGS}
    cfg = GenerationConfig(n_trajectories=1, max_len=200, speed_params=speeds,
                           jitter_sigma=0.0, maint_interval=(10**8, 10**8),
                           base_seed=21)
    traj = generate_trajectory(cfg, 0)
    eff = traj.states[:, 0]
    assert not traj.terminated_early
    assert traj.length == 200
    assert (eff <= 0.0).all()
    assert (eff == 0.0).sum() > 1  # ceiling was actually hit and clipped


def test_mass_flow_ceiling_is_fatal():
    # a genuinely positive-drifting mass flow crossing +0.03 ends the run
    speeds = {tag: DegradationSpeed(tag, 0.0, 0.0) for tag in generator.SPEED_TAGS}
    cfg = GenerationConfig(n_trajectories=1, max_len=5000, speed_params=speeds,
                           jitter_sigma=1e-3, maint_interval=(10**8, 10**8),
                           base_seed=3)
    traj = generate_trajectory(cfg, 0)
    assert traj.terminated_early
    last = traj.states[-1]
    at_floor = (last == -0.05).any()
    at_wc_ceiling = (last[[1, 3, 5]] == 0.03).any() or (last[[7, 9]] == 0.05).any()
    assert at_floor or at_wc_ceiling


def test_linear_until_clipping_analytic_oracle():
    # with zero variance and no maintenance the trace is linear everywhere before the end
    traj = generate_trajectory(ramp_config(3000, mu=-5e-5), 3)
    diffs = np.diff(traj.states[:-1], axis=0)
    assert np.allclose(diffs, -5e-5, rtol=0, atol=1e-12)


# -- maintenance ----------------------------------------------------------------


def test_apply_maintenance_arithmetic():
    x = np.zeros(N_HI)
    x[0] = -0.04
    lam = np.full(N_HI, 0.7)
    out = apply_maintenance(x, lam)
    assert out[0] == pytest.approx(-0.012, rel=1e-12)
    assert np.array_equal(apply_maintenance(np.zeros(N_HI), lam), np.zeros(N_HI))
    x[1] = 0.02
    out = apply_maintenance(x, np.full(N_HI, 0.6))
    assert out[1] == pytest.approx(0.008, rel=1e-12)


def test_apply_maintenance_rejects_bad_lambda():
    with pytest.raises(ValueError):
        apply_maintenance(np.zeros(N_HI), np.full(N_HI, 1.2))
    with pytest.raises(ValueError):
        apply_maintenance(np.zeros(N_HI), np.full(N_HI, -0.1))


def test_schedule_empty_when_horizon_short(rng):
    assert sample_maintenance_schedule(rng, 150, (200, 500)) == []


def test_schedule_gaps_within_interval(rng):
    for _ in range(20):
        times = sample_maintenance_schedule(rng, 5000, (200, 500))
        gaps = np.diff([0] + times)
        assert (gaps >= 200).all() and (gaps <= 500).all()
        assert all(t < 5000 for t in times)
        assert (np.diff(times) > 0).all()


def test_schedule_mean_gap_matches_uniform(rng):
    gaps = []
    while len(gaps) < 10_000:
        times = sample_maintenance_schedule(rng, 10**6, (200, 500))
        gaps.extend(np.diff([0] + times))
    mean = np.mean(gaps[:10_000])
    assert 340 <= mean <= 360  # uniform integer on [200, 500] has mean 350


def test_maintenance_shrinks_each_component(small_dataset):
    seen = 0
    for traj in small_dataset.trajectories:
        for ev in traj.maintenance:
            before = traj.states[ev.t - 1]
            after = apply_maintenance(before, ev.lambdas)
            nz = before != 0
            assert (np.abs(after[nz]) < np.abs(before[nz])).all()
            assert ((ev.lambdas >= 0.6) & (ev.lambdas <= 0.8)).all()
            seen += 1
    assert seen > 0


# -- bound clipping ----------------------------------------------------------------


def test_clip_to_bounds_examples():
    x = np.zeros(N_HI)
    x[0] = -0.06
    clipped, violated = generator.clip_to_bounds(x)
    assert violated and clipped[0] == -0.05
    x = np.zeros(N_HI)
    x[1] = 0.031
    clipped, violated = generator.clip_to_bounds(x)
    assert violated and clipped[1] == 0.03
    clipped, violated = generator.clip_to_bounds(np.zeros(N_HI))
    assert not violated and np.array_equal(clipped, np.zeros(N_HI))


# -- channel ranges and noise -------------------------------------------------------


def test_channel_ranges_fallback_for_constant_trajectory():
    cfg = ramp_config(50, mu=0.0)
    traj = generate_trajectory(cfg, 0)
    delta = compute_channel_ranges([traj], "Cruise")
    expected = 0.01 * np.abs(generator.surrogate._BASELINES["Cruise"])
    assert np.allclose(delta, expected)


def test_channel_ranges_simple_difference():
    traj = generate_trajectory(ramp_config(50), 0)
    fake = np.tile(traj.sensors_clean["Cruise"][:1], (2, 1))
    fake[0, :] = 100.0
    fake[1, :] = 110.0
    traj.sensors_clean["Cruise"] = fake
    delta = compute_channel_ranges([traj], "Cruise")
    assert np.allclose(delta, 10.0)


def test_channel_ranges_recomputation_oracle(small_dataset):
    for oc in small_dataset.config.ocs:
        frames = np.vstack([t.sensors_clean[oc] for t in small_dataset.trajectories])
        expected = frames.max(axis=0) - frames.min(axis=0)
        assert np.allclose(small_dataset.deltas[oc], expected)


def test_channel_ranges_empty_dataset_errors():
    with pytest.raises(ValueError):
        compute_channel_ranges([], "Cruise")


def test_noise_zero_gamma_identity(rng):
    y = rng.normal(0, 1, (5, 7))
    out = add_sensor_noise(y, np.ones(7), 0.0, rng)
    assert np.array_equal(out, y)


def test_noise_support_bound(rng):
    delta = np.array([10.0, 20, 5, 1, 0.1, 50, 2])
    y = np.zeros((1000, 7))
    out = add_sensor_noise(y, delta, 0.02, rng)
    assert (np.abs(out) <= 0.02 * delta + 1e-15).all()


def test_noise_on_sensor_frame(rng):
    frame = generator.surrogate.simulate_sensors(np.zeros(N_HI), "Cruise")
    delta = np.full(7, 10.0)
    noised = add_sensor_noise(frame, delta, 0.02, rng)
    assert noised.noised and noised.oc == "Cruise"
    assert (np.abs(noised.channels - frame.channels) <= 0.2).all()
    assert not frame.noised  # input frame untouched


def test_noise_variance_matches_uniform_law(rng):
    delta = np.full(7, 100.0)
    gamma = 0.02
    out = add_sensor_noise(np.zeros((100_000, 7)), delta, gamma, rng)
    target = (gamma * 100.0) ** 2 / 3.0
    assert np.var(out[:, 0]) == pytest.approx(target, rel=0.05)


# -- whole-dataset invariants ----------------------------------------------------------


def test_dataset_states_within_bounds_and_start_at_zero(small_dataset):
    for traj in small_dataset.trajectories:
        assert states_within_bounds(traj.states)
        assert np.array_equal(traj.states[0], np.zeros(N_HI))
        ts = [ev.t for ev in traj.maintenance]
        assert ts == sorted(ts) and len(set(ts)) == len(ts)
        for oc in traj.ocs:
            assert traj.sensors_clean[oc].shape == (traj.length, 7)
            assert traj.sensors_noisy[oc].shape == (traj.length, 7)


def test_dataset_noise_is_bounded(small_dataset):
    gamma = small_dataset.config.noise.gamma
    for traj in small_dataset.trajectories:
        for oc in traj.ocs:
            diff = np.abs(traj.sensors_noisy[oc] - traj.sensors_clean[oc])
            assert (diff <= gamma * small_dataset.deltas[oc] + 1e-9).all()


def test_dataset_regeneration_is_identical(small_dataset):
    again = generate_dataset(small_dataset.config)
    for a, b in zip(small_dataset.trajectories, again.trajectories):
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.speeds, b.speeds)
        assert a.terminated_early == b.terminated_early
        assert [e.t for e in a.maintenance] == [e.t for e in b.maintenance]
        for oc in a.ocs:
            assert np.array_equal(a.sensors_clean[oc], b.sensors_clean[oc])
            assert np.array_equal(a.sensors_noisy[oc], b.sensors_noisy[oc])
    for oc in small_dataset.deltas:
        assert np.array_equal(small_dataset.deltas[oc], again.deltas[oc])


def test_increments_mostly_negative(desk_dataset):
    # the drift distributions put most mass below zero for every regime;
    # a per-HI majority of negative increments confirms downward trends
    neg = np.zeros(N_HI)
    tot = np.zeros(N_HI)
    for traj in desk_dataset.trajectories:
        inc = np.diff(traj.states, axis=0)
        neg += (inc < 0).sum(axis=0)
        tot += inc.shape[0]
    frac = neg / tot
    assert (frac > 0.5).all()


def test_most_full_length_trajectories_have_maintenance(desk_dataset):
    full = [t for t in desk_dataset.trajectories if not t.terminated_early]
    with_maint = [t for t in full if t.maintenance]
    assert len(with_maint) >= 0.9 * len(full)


def test_hpc_degrades_faster_on_average(desk_dataset):
    # policy bias toward fast wear should show up in mean depth
    depth = np.zeros(N_HI)
    for traj in desk_dataset.trajectories:
        depth += np.abs(traj.states).mean(axis=0)
    hpc_eff, fan_eff = depth[4], depth[0]
    assert hpc_eff > fan_eff


# -- config validation ------------------------------------------------------------------


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        GenerationConfig(n_trajectories=0)
    with pytest.raises(ConfigError):
        GenerationConfig(max_len=1)
    with pytest.raises(ConfigError):
        GenerationConfig(maint_interval=(0, 100))
    with pytest.raises(ConfigError):
        GenerationConfig(maint_interval=(300, 200))
    with pytest.raises(ConfigError):
        GenerationConfig(ocs=("Cruise", "Orbit"))
    with pytest.raises(ConfigError):
        GenerationConfig(jitter_sigma=-1.0)
    with pytest.raises(ConfigError):
        NoiseConfig(gamma=-0.1)
    with pytest.raises(ConfigError):
        NoiseConfig(range_mode="other")
    with pytest.raises(ConfigError):
        SpeedPolicy(probs=np.full((N_HI, 3), 0.5))
    with pytest.raises(ConfigError):
        DegradationSpeed("slow", mu=1e-5, sigma=0.0)


def test_speed_policy_resampling_changes_speeds():
    cfg = GenerationConfig(n_trajectories=1, max_len=400, base_seed=3)
    traj = generate_trajectory(cfg, 0)
    # regime indices change at multiples of change_period and only there
    changes = np.where(np.any(np.diff(traj.speeds.astype(int), axis=0) != 0, axis=1))[0] + 1
    period = cfg.speed_policy.change_period
    assert len(changes) > 0
    assert all(c % period == 0 for c in changes)


def test_baseline_fraction_range_mode():
    cfg = ramp_config(50)
    cfg = GenerationConfig(
        n_trajectories=1, max_len=50, speed_params=cfg.speed_params,
        jitter_sigma=0.0, maint_interval=cfg.maint_interval,
        noise=NoiseConfig(gamma=0.02, range_mode="baseline_fraction"),
    )
    ds = generate_dataset(cfg)
    for oc in cfg.ocs:
        expected = 0.01 * np.abs(generator.surrogate._BASELINES[oc])
        assert np.allclose(ds.deltas[oc], expected)
