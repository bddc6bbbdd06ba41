import math

import pytest

from fblab.certify import HarnackBand, alpha_from_shrink
from fblab.grid import GridSpec
from fblab.plotting import emit_plots, fitted_slope, plot_cascade

from conftest import plane_field


def _cascade(factor, steps=3):
    bands = [HarnackBand((0, 0), 1.0, 0.0, 0.01)]
    for k in range(1, steps + 1):
        w = 0.01 * factor**k
        bands.append(HarnackBand((0, 0), 20.0**-k, 0.0, w, factor))
    return {
        "bands": [b.to_dict() for b in bands],
        "alpha_estimate": alpha_from_shrink([factor] * steps),
    }


def test_fitted_slope_matches_alpha(tmp_path):
    _, slope = plot_cascade(_cascade(0.9), tmp_path / "c.svg")
    assert slope == pytest.approx(0.0352, abs=1e-3)
    assert slope == pytest.approx(-math.log(0.9) / math.log(20), abs=1e-12)
    assert fitted_slope([1.0], [1.0]) is None


def test_svg_bytes_are_deterministic(tmp_path):
    a, _ = plot_cascade(_cascade(0.9), tmp_path / "a.svg")
    b, _ = plot_cascade(_cascade(0.9), tmp_path / "b.svg")
    assert open(a, "rb").read() == open(b, "rb").read()


def test_degenerate_cascade_gets_sentinel(tmp_path):
    cas = _cascade(0.0, steps=2)
    cas["alpha_estimate"] = "inf"
    path, slope = plot_cascade(cas, tmp_path / "d.svg")
    text = open(path).read()
    assert slope is None
    assert "<svg" in text


def test_emit_plots(tmp_path):
    files, slope = emit_plots({"results": {}}, tmp_path)
    assert files == [] and slope is None
    rep = {"results": {"cascades": [_cascade(0.9)],
                       "sweep": [{"eps": 0.02, "r": 0.25, "epsilon_new": 0.001, "pass": True},
                                 {"eps": 0.02, "r": 0.125, "epsilon_new": 0.002, "pass": True}]}}
    U = plane_field(GridSpec.unit(2, 1, 1 / 32))
    files, slope = emit_plots(rep, tmp_path, field=U)
    names = sorted(p.rsplit("/", 1)[-1] for p in files)
    assert names == ["cascade.svg", "free_boundary.svg", "iof_sweep.svg"]
    assert slope == pytest.approx(0.0352, abs=1e-3)
