import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from roughdisk.billiard import (BOUNCE_LIMIT, OK, CavityShape, empirical_measure, flat_cavity,
                                isosceles_triangle, rectangle, reflect, sample_grid,
                                scatter_samples, trace_batch, trace_cavity)
from roughdisk.errors import (BounceLimitExceeded, DegenerateHit, InvalidShape,
                              TooManyDiscards)
from roughdisk.measures import GAMMA_MOMENTS, TEST_FUNCTIONS

SHAPES = {
    "right": isosceles_triangle(45.0),
    "equilateral": isosceles_triangle(60.0),
    "obtuse": isosceles_triangle(30.0),
    "rect": rectangle(0.5),
    "zigzag": CavityShape([(0, 0), (0.2, -0.4), (0.5, -0.1), (0.8, -0.5), (1, 0)]),
}


def test_reflect():
    np.testing.assert_allclose(reflect(np.array([1.0, -1.0]), np.array([0.0, 1.0])), [1.0, 1.0])


@pytest.mark.parametrize("verts", [
    [(0, 0), (0.5, 0.2), (1, 0)],  # above the opening
    [(0.1, 0), (0.5, -0.5), (1, 0)],  # wrong start
    [(0, 0), (1.5, -0.5), (1, 0)],  # outside the strip
    [(0, 0), (0.8, -0.5), (0.2, -0.5), (0.6, -0.1), (0.4, -0.6), (1, 0)],  # crossing
])
def test_invalid_shapes(verts):
    with pytest.raises(InvalidShape):
        CavityShape(verts)


def test_invalid_convex_fraction():
    with pytest.raises(InvalidShape):
        isosceles_triangle(45.0, 1.5)


def test_flat_cavity_is_specular():
    ev = trace_cavity(flat_cavity(), 0.4, 0.3)
    assert (ev.xi_out, ev.phi_out, ev.n_reflections) == (0.4, -0.3, 0)


def test_right_triangle_retroreflects_normal_rays():
    ev = trace_cavity(isosceles_triangle(45.0), 0.3, 0.0)
    assert ev.n_reflections == 2
    assert ev.xi_out == pytest.approx(0.7, abs=1e-12)
    assert ev.phi_out == pytest.approx(0.0, abs=1e-12)


def test_vertex_hit_is_degenerate():
    with pytest.raises(DegenerateHit):
        trace_cavity(isosceles_triangle(45.0), 0.5, 0.0)


def test_deep_rectangle_bounce_limit():
    with pytest.raises(BounceLimitExceeded):
        trace_cavity(rectangle(0.01), 0.3, 0.3, max_bounces=3)
    ev = trace_cavity(rectangle(0.01), 0.3, 0.3)
    assert abs(ev.phi_out) == pytest.approx(0.3, abs=1e-12)
    assert ev.n_reflections > 50


def test_entry_validation():
    with pytest.raises(ValueError):
        trace_cavity(isosceles_triangle(45.0), 1.2, 0.0)
    with pytest.raises(ValueError):
        trace_cavity(isosceles_triangle(45.0), 0.5, 2.0)


def test_json_round_trip(tmp_path):
    shape = SHAPES["zigzag"]
    path = tmp_path / "s.json"
    path.write_text(shape.to_json())
    back = CavityShape.from_json(path)
    np.testing.assert_array_equal(back.vertices, shape.vertices)
    path.write_text(json.dumps({"convex_fraction": 0.1}))
    with pytest.raises(InvalidShape):
        CavityShape.from_json(path)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(SHAPES)), st.floats(0.001, 0.999), st.floats(-1.55, 1.55))
def test_cavity_map_is_an_involution(name, xi, phi):
    shape = SHAPES[name]
    xo, po, _, status = trace_batch(shape, xi, phi)
    assume(status[0] == OK)
    assume(0 < xo[0] < 1 and abs(po[0]) < math.pi / 2)
    xb, pb, _, status_b = trace_batch(shape, xo[0], po[0])
    assert status_b[0] == OK
    assert xb[0] == pytest.approx(xi, abs=1e-9)
    assert pb[0] == pytest.approx(phi, abs=1e-9)


def test_sample_grid_weights():
    xi, phi, w = sample_grid(10, 40)
    assert w.sum() == pytest.approx(2.0, abs=1e-14)
    assert xi.min() > 0 and xi.max() < 1


def _sampling_error(samples, g):
    p = samples.weight[samples.ok] / samples.weight[samples.ok].sum()
    vals = g(samples.phi_out[samples.ok])
    mean = float(np.sum(p * vals))
    var = float(np.sum(p * (vals - mean) ** 2))
    n_eff = 1.0 / float(np.sum(p * p))
    return 2.0 * mean, 2.0 * math.sqrt(var / n_eff)


@pytest.mark.parametrize("name", sorted(SHAPES))
def test_exit_marginal_matches_gamma(name):
    samples = scatter_samples(SHAPES[name], 300, 300)
    for key, g in TEST_FUNCTIONS.items():
        if key == "1":
            continue
        moment, err = _sampling_error(samples, g)
        assert abs(moment - GAMMA_MOMENTS[key]) <= 3 * err + 1e-12


def test_empirical_measure_symmetric(right_triangle_hist):
    m = right_triangle_hist.masses
    assert np.abs(m - m.T).max() < 5e-4 * m.max()


def test_convex_fraction_adds_specular_part():
    h = empirical_measure(isosceles_triangle(45.0, 0.25), 100, 100, 20)
    assert h.masses.sum() == pytest.approx(2.0)
    anti = h.masses[np.arange(20), 19 - np.arange(20)].sum()
    assert anti >= 0.25 * 2.0 - 1e-12


def test_too_many_discards():
    with pytest.raises(TooManyDiscards):
        empirical_measure(rectangle(0.01), 50, 50, 10, max_bounces=5)


def test_bounce_limit_status_in_batch():
    _, _, _, status = trace_batch(rectangle(0.01), np.array([0.3]), np.array([0.3]), 3)
    assert status[0] == BOUNCE_LIMIT
