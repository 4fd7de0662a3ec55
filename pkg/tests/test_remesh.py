"""Angle fields, frame sampling and streamline grid extraction."""

import math

import numpy as np
import pytest

from lnets import (AngleField, CongruenceSpec, GridSpec, QuadGrid,
                   TracingError, UmbilicError, frame_at, theta_eval,
                   trace_grid)
from lnets.remesh import FrameSample, trace_grid_from_field


def test_theta_eval_families():
    assert theta_eval(AngleField.constant(math.pi / 4), 0.3, 0.9) \
        == math.pi / 4
    lin = AngleField.linear_u(0.0, math.pi / 3)
    assert theta_eval(lin, 0.5, 0.0) == pytest.approx(math.pi / 6)
    assert theta_eval(AngleField.linear_v(0.0, math.pi / 3), 0.0, 1.0) \
        == pytest.approx(math.pi / 3)
    cos = AngleField.cosine_u(0.0, math.pi / 2)
    assert theta_eval(cos, 0.0, 0.0) == pytest.approx(math.pi / 2)
    assert theta_eval(cos, 0.25, 0.0) == pytest.approx(math.pi / 4)
    assert theta_eval(cos, 0.5, 0.0) == pytest.approx(0.0, abs=1e-16)


def test_theta_cosine_is_exactly_periodic():
    cos_u = AngleField.cosine_u(0.1, 1.3)
    cos_v = AngleField.cosine_v(0.1, 1.3)
    # Dyadic samples: u + 1 is exactly representable.
    for k in range(64):
        u = k / 64.0
        assert theta_eval(cos_u, u, 0.0) == theta_eval(cos_u, u + 1.0, 0.0)
        assert theta_eval(cos_v, 0.0, u) == theta_eval(cos_v, 0.0, u + 1.0)


def test_angle_field_validation():
    with pytest.raises(ValueError):
        AngleField.constant(2.0)
    with pytest.raises(ValueError):
        AngleField.linear_u(-0.1, 1.0)
    with pytest.raises(ValueError):
        AngleField("spline_u", 0.0, 1.0)


def test_frame_at_zero_angle_gives_principal_directions(patch):
    spec = CongruenceSpec("tau_min", tau=0.5)
    sample = frame_at(patch, spec, AngleField.constant(0.0), 0.5, 0.5)
    assert np.allclose(sample.d1_3d, [1, 0, 0], atol=1e-12)
    assert np.allclose(sample.d2_3d, [0, 1, 0], atol=1e-12)


def test_frame_at_conjugate_pair_example(steep_patch):
    # Center of the steep patch has curvatures (2, 1); with r = 0.25 and
    # a 45-degree first direction the partner is 3 t1 - 4 t2 normalized.
    spec = CongruenceSpec("explicit", value=0.25)
    sample = frame_at(steep_patch, spec, AngleField.constant(math.pi / 4),
                      0.5, 0.5)
    want = np.array([3.0, -4.0, 0.0]) / 5.0
    assert np.allclose(sample.d2_3d, want, atol=1e-12)


def test_frame_at_umbilic_reports_location(steep_patch):
    # The steep patch has an exact umbilic at (x, y) = (0.5, 0).
    spec = CongruenceSpec("tau_min", tau=0.5)
    with pytest.raises(UmbilicError, match="u=0.75"):
        frame_at(steep_patch, spec, AngleField.constant(0.0), 0.75, 0.5)


def test_pushforward_roundtrip(patch):
    spec = CongruenceSpec("tau_min", tau=0.6)
    field = AngleField.constant(0.3)
    rng = np.random.default_rng(3)
    from lnets import evaluate_jet
    for u, v in rng.uniform(0.1, 0.9, size=(20, 2)):
        s = frame_at(patch, spec, field, u, v)
        jet = evaluate_jet(patch, u, v)
        for duv, d3d in ((s.d1_uv, s.d1_3d), (s.d2_uv, s.d2_3d)):
            push = duv[0] * jet.f_u + duv[1] * jet.f_v
            assert np.linalg.norm(push - d3d) <= 1e-9


def constant_field(d1_uv, d2_uv, domain=(0.0, 1.0, 0.0, 1.0)):
    d1 = np.asarray(d1_uv, float)
    d2 = np.asarray(d2_uv, float)

    def field_fn(u, v):
        u0, u1, v0, v1 = domain
        if not (u0 <= u <= u1 and v0 <= v <= v1):
            from lnets.remesh import _LeftDomain
            raise _LeftDomain
        return FrameSample(np.array([u, v]), d1, d2,
                           np.append(d1, 0.0), np.append(d2, 0.0))

    return field_fn


def test_trace_constant_axis_field_gives_uniform_grid():
    grid = trace_grid_from_field(constant_field((1, 0), (0, 1)),
                                 (0, 1, 0, 1), GridSpec(3, 3, 0.2))
    assert grid.rows == 3 and grid.cols == 3
    want_u = np.array([0.3, 0.5, 0.7])
    for i in range(3):
        assert np.allclose(grid.uv[i, :, 0], want_u, atol=1e-12)
        assert np.allclose(grid.uv[i, :, 1], 0.3 + 0.2 * i, atol=1e-12)


def test_trace_rotated_constant_field_lines_are_straight():
    ang = 0.35
    d1 = (math.cos(ang), math.sin(ang))
    d2 = (-math.sin(ang), math.cos(ang))
    grid = trace_grid_from_field(constant_field(d1, d2), (0, 1, 0, 1),
                                 GridSpec(3, 3, 0.15))
    for i in range(grid.rows):
        pts = grid.uv[i]
        chords = np.diff(pts, axis=0)
        lengths = np.linalg.norm(chords, axis=1)
        assert np.allclose(lengths, 0.15, atol=1e-12)
        for ch in chords:
            assert abs(ch[0] * d1[1] - ch[1] * d1[0]) <= 1e-9


def test_trace_trims_to_domain():
    grid = trace_grid_from_field(constant_field((1, 0), (0, 1)),
                                 (0, 1, 0, 1), GridSpec(50, 50, 0.2))
    assert grid.rows <= 50 and grid.cols <= 50
    assert np.all(grid.uv[..., 0] >= 0) and np.all(grid.uv[..., 0] <= 1)
    assert np.all(grid.uv[..., 1] >= 0) and np.all(grid.uv[..., 1] <= 1)
    # A 0.2 spacing fits at most 5 whole edges inside a unit box.
    assert grid.rows == 5 and grid.cols == 5


def test_trace_detects_field_singularity():
    ang = math.radians(2.0)
    d2 = (math.cos(ang), math.sin(ang))
    with pytest.raises(TracingError):
        trace_grid_from_field(constant_field((1, 0), d2), (0, 1, 0, 1),
                              GridSpec(3, 3, 0.2))


def test_trace_grid_on_surface_aligns_with_field(patch):
    spec = CongruenceSpec("tau_min", tau=0.75)
    field = AngleField.constant(math.pi / 4)
    grid = trace_grid(patch, spec, field, GridSpec(7, 7, 0.22))
    assert grid.rows >= 4 and grid.cols >= 4
    # Chord directions of first-family lines stay within 10 degrees of
    # the local first field direction.
    from lnets import evaluate_jet
    for i in range(grid.rows):
        for j in range(grid.cols - 1):
            mid = 0.5 * (grid.uv[i, j] + grid.uv[i, j + 1])
            s = frame_at(patch, spec, field, mid[0], mid[1])
            jet = evaluate_jet(patch, mid[0], mid[1])
            chord_uv = grid.uv[i, j + 1] - grid.uv[i, j]
            chord = chord_uv[0] * jet.f_u + chord_uv[1] * jet.f_v
            cosang = abs(np.dot(chord, s.d1_3d)) / (
                np.linalg.norm(chord) * np.linalg.norm(s.d1_3d))
            assert math.degrees(math.acos(min(1.0, cosang))) <= 10.0


def test_quad_grid_rejects_degenerate_cells():
    uv = np.zeros((2, 2, 2))
    uv[1, 0] = (1, 0)
    uv[0, 1] = (1, 0)  # duplicate corner collapses the cell
    uv[1, 1] = (1, 0)
    with pytest.raises(ValueError):
        QuadGrid(uv, (0, 1, 0, 1))
