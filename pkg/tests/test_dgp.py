"""Synthetic benchmark: outcome surface, unit distributions, panel."""

import numpy as np
import pytest

from scbounds.dgp import (
    DgpConfig,
    dgp_grid_samples,
    dgp_lipschitz,
    f_xt,
    generate_panel,
    unit_distribution,
)
from scbounds.ot import AtomSet

from oracles import w1_1d_cdf


def test_surface_at_zero_cause():
    assert f_xt(0.0, 0.0) == pytest.approx(40.0, abs=1e-12)
    for t in (0.0, 1.5, 7.3, 20.0, 49.0):
        assert f_xt(0.0, t) == pytest.approx(t + 40.0, abs=1e-9)


def test_surface_finite_and_increasing_in_time_on_grid():
    cfg = DgpConfig()
    F = dgp_grid_samples(cfg).values
    assert F.shape == (200, 50)
    assert np.all(np.isfinite(F))
    assert np.all(np.diff(F, axis=1) > 0)


def test_grid_spec():
    cfg = DgpConfig()
    g = cfg.grid
    assert g.shape == (200,)
    assert g[0] == 0.0
    assert g[-1] == pytest.approx(90.0)
    assert g[1] == pytest.approx(90.0 / 199.0)


def test_unit_distribution_normalized_and_modal():
    cfg = DgpConfig()
    d = unit_distribution(45.0, cfg)
    assert abs(d.probs.sum() - 1.0) < 1e-12
    modal = d.atom_set.points[np.argmax(d.probs), 0]
    grid = cfg.grid
    nearest = grid[np.argmin(np.abs(grid - 45.0))]
    assert modal == pytest.approx(nearest)


def test_unit_distribution_w1_ordering():
    cfg = DgpConfig()
    a = AtomSet(cfg.grid)
    g45 = unit_distribution(45.0, cfg, a)
    g50 = unit_distribution(50.0, cfg, a)
    g70 = unit_distribution(70.0, cfg, a)
    x = cfg.grid
    near = w1_1d_cdf(x, g45.probs, g50.probs)
    far = w1_1d_cdf(x, g45.probs, g70.probs)
    assert near < far


def test_generate_panel_shape_and_names():
    panel, dists, truth = generate_panel(DgpConfig())
    assert panel.outcomes.shape == (6, 50)
    assert panel.unit_ids == ("g20", "g45", "g50", "g60", "g65", "g70")
    assert panel.target_id == "g45"
    assert panel.t0 == 15
    assert set(dists) == set(panel.unit_ids)
    assert truth.shape == (50,)
    assert np.array_equal(truth, panel.target_outcomes)  # noiseless default


def test_generate_panel_point_mass_expectation():
    cfg = DgpConfig()
    panel, dists, _ = generate_panel(cfg)
    a = dists["g45"].atom_set
    k = 77
    point_mass = np.zeros(len(a))
    point_mass[k] = 1.0
    t = np.arange(cfg.periods, dtype=float)
    series = point_mass @ f_xt(a.points[:, 0][:, None], t[None, :])
    assert np.allclose(series, f_xt(a.points[k, 0], t), atol=1e-12)


def test_generate_panel_matches_summation_oracle():
    cfg = DgpConfig()
    panel, dists, _ = generate_panel(cfg)
    rng = np.random.default_rng(0)
    x = cfg.grid
    for _ in range(10):
        j = int(rng.integers(0, 6))
        t = int(rng.integers(0, cfg.periods))
        unit = panel.unit_ids[j]
        acc = 0.0
        for k in range(cfg.atom_count):
            acc += float(f_xt(x[k], float(t))) * float(dists[unit].probs[k])
        assert abs(panel.outcomes[j, t] - acc) < 1e-10


def test_generate_panel_rejects_missing_target_mean():
    with pytest.raises(ValueError, match="target mean"):
        generate_panel(DgpConfig(target_mean=33.0))


def test_generate_panel_deterministic_and_noise_control():
    a1 = generate_panel(DgpConfig())[0].outcomes
    a2 = generate_panel(DgpConfig())[0].outcomes
    assert np.array_equal(a1, a2)
    noisy_cfg = DgpConfig(noise_sigma=1.0, seed=7)
    n1, _, t1 = generate_panel(noisy_cfg)
    n2, _, t2 = generate_panel(noisy_cfg)
    assert np.array_equal(n1.outcomes, n2.outcomes)
    assert not np.array_equal(n1.outcomes, a1)
    assert np.array_equal(t1, t2)
    assert np.array_equal(t1, a1[1])  # truth stays the noiseless expectation


def test_config_validation():
    with pytest.raises(ValueError):
        DgpConfig(sigma=0.0)
    with pytest.raises(ValueError):
        DgpConfig(atom_count=1)
    with pytest.raises(ValueError):
        DgpConfig(t0=0)
    with pytest.raises(ValueError):
        DgpConfig(t0=50, periods=50)
    with pytest.raises(ValueError):
        DgpConfig(unit_means=(20.0, 20.0, 45.0))


def test_lipschitz_constant_in_expected_band():
    est = dgp_lipschitz(DgpConfig())
    assert 3.5 <= est.ell <= 4.5
    a, b = est.argmax_pair
    assert a.shape == (1,)
    assert abs(float(a[0]) - float(b[0])) > 0
