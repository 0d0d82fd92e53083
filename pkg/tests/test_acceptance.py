"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest -s tests/test_acceptance.py` to see the lines as they
come.  Criterion 4 keeps its 2e-2 tolerance unweakened; its alpha = 1 leg
is expected to fail, since the backward-Euler reduction at N = 512 has a
2.39e-2 relative truncation error at t = 1 for every admissible grading
(the failure message carries the analysis).  All other criteria pass.
"""

import math
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from fracfisher import femspace
from fracfisher.femspace import (assemble_mass, assemble_reaction,
                                 assemble_stiffness, build_mesh, min_eigpair)
from fracfisher.fractime import (caputo_l1_apply, check_sonine, conv_weights,
                                 discrete_convolution, graded_grid, mittag_leffler)
from fracfisher.models import ModelParams, advance, run, scalar_solve
from fracfisher.observe_io import compare_models
from fracfisher.scenarios import default_config


@contextmanager
def criterion(label):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        print(f"ACCEPTANCE {label}: FAIL ({exc})")
        raise
    print(f"ACCEPTANCE {label}: PASS ({time.perf_counter() - t0:.1f}s)")


def make_fem(mesh):
    return femspace.FemMatrices(mass=assemble_mass(mesh),
                                stiffness=assemble_stiffness(mesh))


def test_criterion_1_kernel_identities():
    with criterion("1 kernel identities"):
        t0 = time.perf_counter()

        # telescoping weight sums on uniform and graded grids
        for gamma in (1.0, 2.0):
            grid = graded_grid(256, gamma, 5.0)
            for alpha in (0.25, 0.5, 0.75):
                for n in (1, 100, 256):
                    b = conv_weights(grid, alpha, n)
                    assert np.all(b > 0.0)
                    target = grid.points[n] ** (1 - alpha) / math.gamma(2 - alpha)
                    assert abs(b.sum() - target) <= 1e-12 * target

        # kernel semigroup identity at the three stated order pairs
        for a, bta in ((0.5, 0.5), (0.3, 0.4), (0.25, 0.5)):
            assert check_sonine(a, bta, 1.0, tol=1e-6)
            assert check_sonine(a, bta, 2.0, tol=1e-6)
        assert not check_sonine(0.5, 0.5, 1.0, tol=1e-6, target=1.1)

        # discrete composition identities on u(t) = t^2, uniform N = 2048
        grid = graded_grid(2048, 1.0, 1.0)
        u = grid.points ** 2
        for alpha in (0.3, 0.5, 0.7):
            deriv = np.zeros(grid.N)
            for k in range(1, grid.N):
                deriv[k] = caputo_l1_apply(grid, alpha, u[:k + 1])
            got = discrete_convolution(grid, 1.0 - alpha, deriv)
            assert abs(got - (u[-1] - u[0])) <= 1e-2 * abs(u[-1] - u[0])

            conv = np.zeros(grid.N + 1)
            for k in range(1, grid.N + 1):
                conv[k] = discrete_convolution(grid, 1.0 - alpha, u[:k])
            got = caputo_l1_apply(grid, alpha, conv)
            assert abs(got - u[-1]) <= 1e-2 * abs(u[-1])

        assert time.perf_counter() - t0 < 10.0, "runtime budget 10 s exceeded"


def test_criterion_2_l1_exactness_on_affine():
    with criterion("2 L1 exact on affine functions"):
        for N in (16, 256):
            for gamma in (1.0, 2.0):
                grid = graded_grid(N, gamma, 2.0)
                for alpha in (0.25, 0.5, 0.75, 1.0):
                    for n in (1, N // 2, N):
                        samples = 0.8 - 2.5 * grid.points[:n + 1]
                        got = caputo_l1_apply(grid, alpha, samples)
                        want = -2.5 * grid.points[n] ** (1 - alpha) / math.gamma(2 - alpha)
                        assert abs(got - want) <= 1e-12 * abs(want)


def test_criterion_3_scalar_fractional_relaxation():
    with criterion("3 scalar fractional relaxation"):
        t0 = time.perf_counter()
        for alpha in (0.25, 0.5, 0.75):
            gamma = (2.0 - alpha) / alpha
            want = mittag_leffler(alpha, -1.0)

            grid = graded_grid(1024, gamma, 1.0)
            y = scalar_solve(alpha, -1.0, 1.0, grid, model="caputo")
            assert abs(y[-1] - want) <= 1e-2 * abs(want)

            errs = []
            for N in (64, 128, 256, 512):
                g = graded_grid(N, gamma, 1.0)
                yN = scalar_solve(alpha, -1.0, 1.0, g, model="caputo")
                errs.append(abs(yN[-1] - want))
            slope = np.polyfit(np.log2([64, 128, 256, 512]), np.log2(errs), 1)[0]
            assert -slope >= 2.0 - alpha - 0.3, \
                f"alpha={alpha}: observed order {-slope:.3f}"
        assert time.perf_counter() - t0 < 30.0, "runtime budget 30 s exceeded"


@pytest.mark.parametrize("alpha,gamma", [(0.5, 3.0), (1.0, 1.0)])
def test_criterion_4_eigenmode_decay(alpha, gamma):
    # gamma is chosen most favorably per order: (2-alpha)/alpha for the
    # fractional leg, uniform for the classical one (any grading >= 1 only
    # enlarges the late-time steps and therefore the truncation error)
    with criterion(f"4 eigenmode decay (alpha={alpha:g})"):
        t0 = time.perf_counter()
        mesh = build_mesh(32, 32, (-1.0, 1.0, -1.0, 1.0))
        fem = make_fem(mesh)
        lam, mode = min_eigpair(mesh, bc="dirichlet", D=1.0)

        grid = graded_grid(512, gamma, 1.0)
        params = ModelParams(D=1.0, r=0.0, alpha=alpha, bc="dirichlet",
                             model="consistent")
        fields, _ = advance(grid, mesh, fem, params, mode)

        mv = fem.mass @ mode
        denom = float(mode @ mv)
        window = (grid.points >= 0.1) & (grid.points <= 1.0)
        worst = 0.0
        for n in np.flatnonzero(window):
            c = float(fields[n] @ mv) / denom
            want = mittag_leffler(alpha, -lam * grid.points[n] ** alpha)
            worst = max(worst, abs(c - want) / abs(want))
        assert time.perf_counter() - t0 < 120.0, "runtime budget 2 min exceeded"
        assert worst <= 2e-2, (
            f"max relative deviation {worst:.4e} > 2e-2; at alpha=1 this is the "
            f"backward-Euler truncation floor ~2.4e-2 of N=512 for any grading "
            f"(uniform is optimal); the criterion is unattainable as stated")


def test_criterion_5_alpha_one_reduction():
    with criterion("5 alpha=1 model coincidence and mass balance"):
        cfg = default_config()
        cfg = replace(cfg, mesh=replace(cfg.mesh, nx=32, ny=32),
                      time=replace(cfg.time, N=32),
                      physics=replace(cfg.physics, alpha=1.0,
                                      reaction_mode="implicit_last"))
        res_c = run(cfg, write_outputs=False)
        cfg_w = replace(cfg, physics=replace(cfg.physics, model="caputo"))
        res_w = run(cfg_w, write_outputs=False)
        assert np.abs(res_c.fields - res_w.fields).max() <= 1e-10

        mesh, grid = res_w.mesh, res_w.grid
        ones = np.ones(mesh.n_vertices)
        for n in range(1, grid.N + 1):
            dm = (femspace.integrate(mesh, res_w.fields[n])
                  - femspace.integrate(mesh, res_w.fields[n - 1])) / grid.steps[n - 1]
            reac = assemble_reaction(mesh, res_w.fields[n])
            assert abs(dm - cfg.physics.r * float(ones @ reac)) <= 1e-8


def test_criterion_6_equilibria_and_boundedness():
    with criterion("6 equilibria and boundedness"):
        mesh = build_mesh(8, 8)
        fem = make_fem(mesh)
        grid = graded_grid(8, 2.0, 5.0)
        for alpha in (0.25, 0.5, 0.75, 1.0):
            for model, mode in (("consistent", "explicit_history"),
                                ("consistent", "implicit_last"),
                                ("caputo", "explicit_history")):
                params = ModelParams(alpha=alpha, model=model, reaction_mode=mode)
                for value in (0.0, 1.0):
                    fields, _ = advance(grid, mesh, fem, params,
                                        np.full(mesh.n_vertices, value))
                    assert np.abs(fields - value).max() <= 1e-9

        # instantaneous-reaction model stays within the unit slab
        for alpha in (0.25, 0.5, 0.75, 1.0):
            cfg = default_config()
            cfg = replace(cfg, mesh=replace(cfg.mesh, nx=64, ny=64),
                          time=replace(cfg.time, N=128),
                          physics=replace(cfg.physics, model="caputo", alpha=alpha))
            res = run(cfg, write_outputs=False)
            assert min(r.min_u for r in res.rows) >= -1e-8
            assert max(r.max_u for r in res.rows) <= 1.0 + 1e-8


def test_criterion_7_qualitative_model_comparison():
    with criterion("7 qualitative model comparison"):
        t0 = time.perf_counter()
        cfg = default_config()
        cfg = replace(cfg, mesh=replace(cfg.mesh, nx=64, ny=64),
                      time=replace(cfg.time, N=64))
        assert cfg.physics.alpha == 0.5 and cfg.physics.D == 1e-3 \
            and cfg.physics.r == 5.0 and cfg.time.gamma == 2.0

        report = compare_models(cfg, write_outputs=False)

        # (a) the instantaneous-reaction model front runs ahead
        t_c, t_w = report.t_half["consistent"], report.t_half["caputo"]
        assert t_w is not None and t_c is not None and t_w < t_c

        # (b) both mass curves nondecreasing after the first 5 steps
        for m in report.mass.values():
            assert np.all(np.diff(m[5:]) >= 0.0)

        # (c) the longer initial interface accumulates mass no later
        m_star = 1.2 * report.mass["consistent"][0]
        cfg4 = replace(cfg, ic=replace(cfg.ic, type="four_circles"))
        res4 = run(cfg4, write_outputs=False)
        mass4 = np.array([r.mass for r in res4.rows])

        def first_time(times, mass):
            hit = np.flatnonzero(mass >= m_star)
            return None if hit.size == 0 else times[hit[0]]

        t_circle = first_time(report.times, report.mass["consistent"])
        t_four = first_time(res4.times, mass4)
        assert t_four is not None and t_circle is not None
        assert t_four <= t_circle
        assert time.perf_counter() - t0 < 300.0, "runtime budget 5 min exceeded"


@pytest.mark.slow
def test_criterion_8_full_scale_smoke(tmp_path):
    import os
    archive = os.environ.get("FRACFISHER_SMOKE_DIR")
    out_dir = archive if archive else str(tmp_path / "full_scale")
    with criterion("8 full-scale smoke run"):
        t0 = time.perf_counter()
        for alpha in (0.25, 0.5, 0.75, 1.0):
            cfg = default_config()
            cfg = replace(cfg, mesh=replace(cfg.mesh, nx=256, ny=256),
                          time=replace(cfg.time, N=256),
                          physics=replace(cfg.physics, alpha=alpha),
                          output=replace(cfg.output, directory=out_dir))
            res = run(cfg)   # outputs archived; no numeric assertions
            assert res.fields.shape == (257, 257 * 257)
        assert time.perf_counter() - t0 < 3600.0, "runtime budget 1 h exceeded"
