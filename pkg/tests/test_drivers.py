import numpy as np
import pytest

import entrochain as ec
from entrochain.drivers import (
    ConfigError,
    ExperimentConfig,
    compute_trace,
    fit_left_tail,
    run_beta_sweep,
    run_density,
    run_extremize,
    run_histogram,
    run_localized_entropy,
    run_pmax_sweep,
    run_size_sweep,
)
from entrochain.extremize import OptimizerConfig


def small_optimizer(**overrides):
    base = dict(max_iter=2000, restarts=2, seed=0, prescan_t_max=100.0)
    base.update(overrides)
    return OptimizerConfig(**base)


def small_config(**overrides):
    base = dict(
        L=6, N_p=2, width=3, beta=0.01, seeds=(0, 1), t_max=500.0, dt=0.5,
        bins=40, optimizer=small_optimizer(), workers=1,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(dt=0.0)
    with pytest.raises(ConfigError):
        small_config(seeds=(1, 1))
    with pytest.raises(ConfigError):
        small_config(seeds=())
    with pytest.raises(ConfigError):
        small_config(bins=1)


def test_trace_matches_scalar_evaluation(chain6):
    _, basis, _, spec = chain6
    state = ec.sample_rpts(spec, 0.01, "complex", 0)
    times = np.arange(0.0, 40.0, 0.5)
    trace = compute_trace(state, spec, basis, 3, times)
    bip = ec.BipartitionTable(basis, 3)
    xe = ec.SpatialEnergyTable(spec, basis, ec.RegionPartition(6, 3))
    eigvecs = spec.eigenvectors.astype(complex)
    for k in (0, 17, 79):
        amps = ec.evolve(state, spec, times[k]).amps
        assert trace.s_ent[k] == pytest.approx(
            bip.entropy_of(eigvecs @ amps), abs=1e-10)
        assert trace.s_xe[k] == pytest.approx(xe.total(amps), abs=1e-10)


def test_trace_density_thinning(chain6):
    _, basis, _, spec = chain6
    state = ec.sample_rpts(spec, 0.01, "complex", 0)
    times = np.arange(0.0, 50.0, 0.5)
    trace = compute_trace(state, spec, basis, 3, times, density_stride=10)
    assert trace.densities.shape == (10, 6)
    assert np.allclose(trace.densities.sum(axis=1), 2.0, atol=1e-9)


def test_fit_left_tail_on_synthetic_exponential():
    rng = np.random.default_rng(0)
    # left tail exponential: p(x) ~ exp(+8 (x - 3)) for x < 3
    samples = 3.0 - rng.exponential(1 / 8.0, size=200_000)
    counts, edges = np.histogram(samples, bins=80)
    fit = fit_left_tail(counts, edges)
    assert fit.slope < 0
    assert fit.slope == pytest.approx(-8.0, rel=0.1)
    assert fit.r_squared > 0.98


def test_fit_left_tail_degenerate():
    counts = np.array([0, 0, 1000])
    edges = np.array([0.0, 1.0, 2.0, 3.0])
    fit = fit_left_tail(counts, edges)
    assert np.isnan(fit.slope)


def test_run_histogram_shape_and_markers():
    config = small_config(experiment="histogram", seeds=(3,), t_max=600.0)
    result = run_histogram(config)
    assert len(result.trace.times) == len(result.trace.s_ent)
    for label in ("ent", "xE"):
        data = result.entropies[label]
        assert data.probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert data.marker_min.value <= data.sample_min + 1e-9
        assert data.marker_max.value >= data.sample_max - 1e-9
        for which in ("min", "max", "mean"):
            density = getattr(data, f"density_{which}")
            assert density.sum() == pytest.approx(2.0, abs=1e-8)


def test_run_histogram_warns_when_short():
    config = small_config(seeds=(0,), t_max=20.0)
    with pytest.warns(UserWarning):
        run_histogram(config)


def test_run_size_sweep_rows():
    config = small_config(L_grid=(6,), width=3)
    rows = run_size_sweep(config)
    assert {r["kind"] for r in rows} == {"ent", "xE"}
    ent = next(r for r in rows if r["kind"] == "ent")
    assert ent["min_mean"] <= ent["ave_mean"] <= ent["max_mean"]
    assert ent["max_bound"] == pytest.approx(ec.max_entanglement_bound(6, 3, 2))
    assert ent["volume_law"] == pytest.approx(ent["s_th_AB"] / 2)
    xe = next(r for r in rows if r["kind"] == "xE")
    assert xe["min_mean"] <= xe["ave_mean"] <= xe["max_mean"] + 1e-9


def test_run_size_sweep_rejects_nondivisible_L():
    config = small_config(L_grid=(7,), width=3)
    with pytest.raises(ConfigError):
        run_size_sweep(config)


def test_run_beta_sweep_rows():
    config = small_config(beta_grid=(0.01, 5.0), seeds=(0,))
    rows = run_beta_sweep(config)
    assert len(rows) == 4
    high = [r for r in rows if r["beta"] == 5.0 and r["kind"] == "ent"][0]
    low = [r for r in rows if r["beta"] == 0.01 and r["kind"] == "ent"][0]
    # cold states barely fluctuate
    assert high["max_mean"] - high["min_mean"] < low["max_mean"] - low["min_mean"]
    assert high["s_th_AB"] < low["s_th_AB"]


def test_run_localized_entropy_rows():
    config = small_config(L_grid=(6,), width=3, window_start=0)
    rows = run_localized_entropy(config)
    row = rows[0]
    assert 0.0 <= row["p_max_mean"] <= 1.0
    assert row["M"] == 3  # C(3, 2)
    assert row["s_xe_min_mean"] <= row["s_xe_loc_mean"] + 1e-9
    assert row["s_xe_loc_mean"] >= row["bound_mean"] - 1e-6


def test_run_pmax_sweep_rows():
    config = small_config(
        L_grid=(6,), beta_grid=(0.01, 4.0), kinds=("real", "complex"),
        window_width=3, seeds=(0, 1),
    )
    rows = run_pmax_sweep(config)
    assert len(rows) == 4
    assert all(0.0 <= r["p_max_mean"] <= 1.0 for r in rows)


def test_run_extremize_and_density():
    config = small_config(seeds=(0,), entropy_kind="ent", direction="max")
    res = run_extremize(config)
    assert res.value <= ec.max_entanglement_bound(6, 3, 2) + 1e-9
    out = run_density(small_config(seeds=(0,), time=3.0))
    assert out["density"].sum() == pytest.approx(2.0, abs=1e-9)
    assert len(out["density"]) == 6


@pytest.mark.filterwarnings("ignore:only .* samples")
def test_sweep_average_consistent_with_histogram_trace():
    # same seed, same time grid: the sweep's ave equals the trace mean
    config = small_config(L_grid=(6,), seeds=(4,), t_max=400.0)
    rows = run_size_sweep(config)
    hist = run_histogram(small_config(seeds=(4,), t_max=400.0))
    ent_row = next(r for r in rows if r["kind"] == "ent")
    expected = hist.trace.mean_after_burn_in(hist.trace.s_ent)
    assert ent_row["ave_mean"] == pytest.approx(expected, abs=1e-12)


def test_workers_do_not_change_results():
    serial = run_size_sweep(small_config(L_grid=(6,), workers=1))
    threaded = run_size_sweep(small_config(L_grid=(6,), workers=4))
    for a, b in zip(serial, threaded):
        assert a == b
