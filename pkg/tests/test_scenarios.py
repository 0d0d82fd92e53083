"""Tests of initial conditions and the configuration format."""

import math

import numpy as np
import pytest

from fracfisher.femspace import build_mesh, integrate
from fracfisher.scenarios import (ConfigError, default_config, dumps_config,
                                  ic_smoothed, initial_field, levelset_blob,
                                  levelset_circle, levelset_four_circles,
                                  load_config)

TANH_ONE_VALUE = 0.11920292202211756   # (1 - tanh 1) / 2, frozen via mpmath


class TestLevelsets:
    def test_circle_signs(self):
        s = levelset_circle((0.0, 0.0), 0.2)
        assert s(0.0, 0.0) == pytest.approx(-0.2, rel=1e-14)
        assert s(0.2, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert s(0.5, 0.0) > 0.0

    def test_four_circles_outside_all(self):
        s = levelset_four_circles(radius=0.15)
        assert s(0.0, 0.0) == pytest.approx(math.sqrt(0.5) - 0.15, rel=1e-13)
        assert s(-0.5, 0.5) == pytest.approx(-0.15, rel=1e-14)

    def test_blob_printed_formula_value(self):
        s = levelset_blob()
        # direct evaluation at the formula's center point
        assert float(s(0.6, 0.5)) == pytest.approx(0.04 + 1.1 * 0.01 - 1.0, rel=1e-12)

    def test_blob_clamped_outside_window(self):
        s = levelset_blob()
        assert float(s(0.0, 0.0)) == 1.0e3
        assert float(s(0.95, 0.5)) == 1.0e3
        assert float(s(0.5, 0.05)) == 1.0e3

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            levelset_circle((0, 0), 0.0)
        with pytest.raises(ValueError):
            levelset_four_circles(radius=-0.1)


class TestSmoothedIndicator:
    def test_midpoint_and_limits(self):
        mesh = build_mesh(4, 4, (0.0, 1.0, 0.0, 1.0))
        u = ic_smoothed(mesh, lambda x, y: np.zeros_like(x), epsilon=0.1)
        np.testing.assert_allclose(u, 0.5, rtol=1e-15)
        u = ic_smoothed(mesh, lambda x, y: np.full_like(x, -1e5), epsilon=0.1)
        np.testing.assert_allclose(u, 1.0, rtol=1e-15)
        u = ic_smoothed(mesh, lambda x, y: np.full_like(x, 1e5), epsilon=0.1)
        np.testing.assert_allclose(u, 0.0, atol=1e-15)

    def test_value_one_epsilon_into_the_layer(self):
        mesh = build_mesh(1, 1, (0.0, 1.0, 0.0, 1.0))
        eps = 0.3
        u = ic_smoothed(mesh, lambda x, y: np.full_like(x, eps), epsilon=eps)
        np.testing.assert_allclose(u, TANH_ONE_VALUE, rtol=1e-12)

    def test_monotone_decreasing_in_levelset(self):
        mesh = build_mesh(63, 1, (-3.0, 3.0, 0.0, 1.0))
        u = ic_smoothed(mesh, lambda x, y: x, epsilon=0.5)
        row = u[: 64]
        assert np.all(np.diff(row) < 0.0)

    def test_circle_ic_strictly_inside_unit_interval(self):
        cfg = default_config()
        for ic_type in ("circle", "four_circles"):
            mesh = build_mesh(64, 64)
            from dataclasses import replace
            c = replace(cfg, ic=replace(cfg.ic, type=ic_type))
            u = initial_field(c, mesh)
            assert u.min() > 0.0
            assert u.max() < 1.0

    def test_rejects_bad_epsilon(self):
        mesh = build_mesh(2, 2)
        with pytest.raises(ValueError):
            ic_smoothed(mesh, levelset_circle(), 0.0)


class TestBlobField:
    def test_zero_outside_window_and_bounded(self):
        from dataclasses import replace
        cfg = default_config()
        cfg = replace(cfg, ic=replace(cfg.ic, type="blob"),
                      mesh=replace(cfg.mesh, nx=64, ny=64))
        mesh = build_mesh(64, 64)
        u = initial_field(cfg, mesh)
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        outside = (x <= 0.05) | (x >= 0.9) | (y <= 0.1) | (y >= 0.85)
        assert np.abs(u[outside]).max() == 0.0
        assert u.max() < 1.0
        assert u.min() >= 0.0
        assert integrate(mesh, u) > 0.01   # the blob has substance

    def test_no_spurious_mass_at_window_edge(self):
        # the clamp must not cut through substantial field values: the mass
        # carried by the one-cell strip just inside the window boundary
        # (the size of any jump the clamp could introduce) stays tiny
        from dataclasses import replace
        cfg = default_config()
        cfg = replace(cfg, ic=replace(cfg.ic, type="blob"),
                      mesh=replace(cfg.mesh, nx=64, ny=64))
        mesh = build_mesh(64, 64)
        u = initial_field(cfg, mesh)
        h = mesh.hx
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        inside = (x > 0.05) & (x < 0.9) & (y > 0.1) & (y < 0.85)
        strip = inside & ((x < 0.05 + h) | (x > 0.9 - h)
                          | (y < 0.1 + h) | (y > 0.85 - h))
        band = u.copy()
        band[~strip] = 0.0
        assert integrate(mesh, band) <= 1e-3


class TestInitialFieldValidation:
    def test_circle_outside_domain_rejected(self):
        from dataclasses import replace
        cfg = default_config()
        cfg = replace(cfg, ic=replace(cfg.ic, center=(0.95, 0.0), radius=0.2))
        mesh = build_mesh(8, 8)
        with pytest.raises(ConfigError):
            initial_field(cfg, mesh)

    def test_from_file_requires_path(self):
        from dataclasses import replace
        cfg = default_config()
        cfg = replace(cfg, ic=replace(cfg.ic, type="from_file", path=None))
        with pytest.raises(ConfigError):
            initial_field(cfg, build_mesh(4, 4))

    def test_from_file_round_trip(self, tmp_path):
        from dataclasses import replace
        mesh = build_mesh(4, 4)
        values = np.linspace(0.1, 0.9, mesh.n_vertices)
        path = tmp_path / "field.txt"
        np.savetxt(path, values)
        cfg = default_config()
        cfg = replace(cfg, ic=replace(cfg.ic, type="from_file", path=str(path)))
        np.testing.assert_allclose(initial_field(cfg, mesh), values, rtol=1e-15)


class TestConfigFormat:
    def test_empty_document_gives_reference_defaults(self):
        cfg = load_config("")
        assert cfg.physics.D == 1e-3
        assert cfg.physics.r == 5.0
        assert cfg.time.gamma == 2.0
        assert cfg.time.T == 5.0
        assert cfg.mesh.bounds == (-1.0, 1.0, -1.0, 1.0)
        assert cfg.epsilon_factor == 10.0
        assert cfg.ic.type == "circle"

    def test_round_trip_identity(self):
        text = """
        [mesh]
        nx = 48
        ny = 32
        bounds = -2 2 -1 1
        [time]
        N = 100
        gamma = 3
        T = 2.5
        [physics]
        alpha = 0.75
        model = caputo
        bc = dirichlet
        bc_value = 0.25
        [ic]
        type = four_circles
        radius = 0.1
        epsilon_factor = 8
        [output]
        directory = results
        snapshot_times = 0 1 2.5
        formats = vtk csv_grid
        """
        cfg = load_config(text)
        assert load_config(dumps_config(cfg)) == cfg

    def test_comments_and_inline_comments(self):
        cfg = load_config("# a comment\n[time]\nN = 32  # inline\n")
        assert cfg.time.N == 32

    def test_rejects_alpha_out_of_range(self):
        with pytest.raises(ConfigError, match=r"\[physics\]"):
            load_config("[physics]\nalpha = 1.5\n")

    def test_rejects_gamma_below_one(self):
        with pytest.raises(ConfigError, match="grading"):
            load_config("[time]\ngamma = 0.5\n")

    def test_rejects_unknown_key_with_location(self):
        with pytest.raises(ConfigError, match=r"\[mesh\] nz"):
            load_config("[mesh]\nnz = 4\n")

    def test_rejects_unknown_section(self):
        with pytest.raises(ConfigError, match="solver"):
            load_config("[solver]\ntol = 1e-10\n")

    def test_rejects_malformed_number(self):
        with pytest.raises(ConfigError, match=r"\[time\] N"):
            load_config("[time]\nN = many\n")

    def test_rejects_degenerate_bounds(self):
        with pytest.raises(ConfigError, match="bounds"):
            load_config("[mesh]\nbounds = 1 1 0 1\n")

    def test_rejects_snapshot_time_outside_horizon(self):
        with pytest.raises(ConfigError, match="snapshot_times"):
            load_config("[time]\nT = 1\n[output]\nsnapshot_times = 0 2\n")

    def test_rejects_unknown_ic_type(self):
        with pytest.raises(ConfigError, match=r"\[ic\] type"):
            load_config("[ic]\ntype = gaussian\n")

    def test_default_snapshot_times_follow_horizon(self):
        cfg = load_config("[time]\nT = 8\n")
        assert cfg.snapshot_times() == (0.0, 2.0, 4.0, 8.0)

    def test_epsilon_scales_with_mesh(self):
        cfg = load_config("[mesh]\nnx = 64\nny = 64\n")
        assert cfg.epsilon() == pytest.approx(10.0 * 2.0 / 64, rel=1e-14)
