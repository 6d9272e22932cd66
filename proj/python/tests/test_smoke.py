import math

import numpy as np
import pytest

import latticeopt as lo

SMALL = """
problem = max_bulk
grid.n = 8
materials.E = 10 5
materials.density = 0.9 0.45
bars.count = 3
bars.seed = 2
"""


def test_solid_cell_matches_isotropic_moduli():
    n = 4
    rho = np.ones((n**3, 1))
    out = lo.effective_tensor(n, 1.0, rho, [10.0], [0.3])
    assert out["K"] == pytest.approx(10 / (3 * 0.4), rel=1e-8)
    assert out["G"] == pytest.approx(10 / 2.6, rel=1e-8)
    assert out["nu"] == pytest.approx(0.3, rel=1e-8)
    np.testing.assert_allclose(out["CH"], lo.isotropic_stiffness(10.0, 0.3), rtol=1e-8, atol=1e-10)


def test_kernels():
    vals = [0.1, 0.4, -0.2]
    assert lo.lks_max(vals, 25) <= max(vals) <= lo.ks_max(vals, 25)
    assert lo.smooth_heaviside(-1.0, 0.1, 2.0) == 0.0
    assert lo.smooth_heaviside(1.0, 0.1, 2.0) == 1.0
    assert lo.bar_density(-1.0, 0.1) == 1.0
    assert lo.distance_to_segment([0, 0, 0], [1, 0, 0], [0.5, 2, 0]) == pytest.approx(2.0)


def test_config_errors_raise():
    with pytest.raises(lo.ConfigError):
        lo.parse_config("materials.E = 10\nunknown.key = 1\n")
    with pytest.raises(ValueError):
        lo.parse_config("grid.n = 8\n")


def test_initial_design_and_homogenize():
    cfg = lo.parse_config(SMALL)
    bars = lo.initial_design(cfg)
    assert len(bars) == 3
    assert all(b.alpha == [0.5, 0.5] for b in bars)
    out = lo.homogenize(cfg)
    assert out["K"] > 0
    assert out["K"] <= out["voigt_bound"]
    assert out["rho"].shape == (512, 2)


def test_short_optimization(tmp_path):
    cfg = lo.parse_config(SMALL)
    cfg.max_iters = 3
    seen = []
    res = lo.optimize(cfg, lambda rec: seen.append(rec["iteration"]))
    assert res["status"] in ("infeasible", "max_iterations", "converged")
    assert seen == [1, 2, 3]
    assert len(res["history"]) == 3
    assert all(math.isfinite(h["f"]) for h in res["history"])

    lo.export_design(cfg, res["bars"], tmp_path)
    vtk = lo.read_vtk(tmp_path / "densities.vtk")
    assert vtk["n"] == 8
    assert vtk["rho"].shape == (512, 2)
    assert (tmp_path / "bars.txt").exists()
