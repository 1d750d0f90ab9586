"""Stent mesh construction, connection element, stencils, serialization."""

import json

import numpy as np
import pytest

from stentfit.centerline import CenterlineSet
from stentfit.errors import (CenterlineTooShort, InvalidConnection,
                             RadiusNonPositive)
from stentfit.stent import (build_initial_stent, build_tube_stent,
                            derivative_stencils, export_mesh, mesh_from_dict,
                            mesh_to_dict, rotation_minimizing_frames)


def _line(n=30, length=29.0):
    z = np.linspace(0.0, length, n)
    return np.column_stack([np.zeros(n), np.zeros(n), z])


def _y_centerlines():
    trunk = np.column_stack([np.zeros(26), np.zeros(26),
                             np.linspace(50.0, 25.0, 26)])
    t = np.linspace(0.0, 20.0, 21)
    left = np.column_stack([-0.4 * t, np.zeros(21), 25.0 - t])
    right = np.column_stack([0.4 * t, np.zeros(21), 25.0 - t])
    return CenterlineSet(trunk=trunk, left_limb=left, right_limb=right,
                         bifurcation_point=(0.0, 0.0, 25.0), sample_step=1.0)


def test_tube_counts_8x8():
    mesh = build_tube_stent(_line(), r0=4.0, n_t=8, rings=8)
    assert mesh.n_vertices == 64
    assert len(mesh.quads()) == 56  # (rings - 1) * n_t


def test_bifurcated_vertex_count_624():
    mesh = build_initial_stent(_y_centerlines(), 4.0, 3.0, 12, 26, 13)
    assert mesh.n_vertices == (26 + 2 * 13) * 12 == 624


def test_tube_rings_have_exact_radius():
    mesh = build_tube_stent(_line(), r0=4.0, n_t=12, rings=10)
    for seg, s, idx in mesh.rings():
        pts = mesh.vertices[idx]
        c = pts.mean(axis=0)
        np.testing.assert_allclose(np.linalg.norm(pts - c, axis=1), 4.0,
                                   atol=1e-9)
        # straight tube: ring plane perpendicular to z
        assert np.ptp(pts[:, 2]) < 1e-9


def test_radial_units_point_outward():
    mesh = build_tube_stent(_line(), r0=4.0, n_t=12, rings=10)
    np.testing.assert_allclose(np.linalg.norm(mesh.radial, axis=1), 1.0,
                               atol=1e-12)
    for seg, s, idx in mesh.rings():
        c = mesh.vertices[idx].mean(axis=0)
        outward = (mesh.vertices[idx] - c)
        dots = np.sum(outward * mesh.radial[idx], axis=1)
        assert np.all(dots > 0)


def test_connection_element_maps_across_junction():
    mesh = build_initial_stent(_y_centerlines(), 4.0, 3.0, 12, 26, 13)
    conn = mesh.connection
    # one virtual trunk ring past the end maps onto limb ring 0, split by t
    assert conn.resolve(("trunk", 26, 0)) == ("right", 0, 0)
    assert conn.resolve(("trunk", 26, 6)) == ("left", 0, 6)
    # limb virtual ring -1 maps back onto the last trunk ring
    assert conn.resolve(("left", -1, 3)) == ("trunk", 25, 3)
    assert conn.resolve(("right", -2, 3)) == ("trunk", 24, 3)
    with pytest.raises(InvalidConnection):
        conn.resolve(("trunk", 99, 0))


def test_stencils_span_the_junction():
    mesh = build_initial_stent(_y_centerlines(), 4.0, 3.0, 12, 26, 13)
    table = derivative_stencils(mesh)
    # last trunk ring continues into the limbs
    i = mesh.index("trunk", 25, 2)
    assert table.s_next[i] == mesh.index("right", 0, 2)
    i = mesh.index("trunk", 25, 8)
    assert table.s_next[i] == mesh.index("left", 0, 8)
    # first limb ring looks back into the trunk
    i = mesh.index("left", 0, 5)
    assert table.s_prev[i] == mesh.index("trunk", 25, 5)
    # free ends are one-sided
    assert table.s_prev[mesh.index("trunk", 0, 0)] == -1
    assert table.s_next[mesh.index("left", 12, 0)] == -1
    # t wraps periodically
    i = mesh.index("trunk", 3, 11)
    assert table.t_next[i] == mesh.index("trunk", 3, 0)


def test_tube_stencils_have_no_junction():
    mesh = build_tube_stent(_line(), r0=4.0, n_t=8, rings=8)
    table = derivative_stencils(mesh)
    assert np.sum(table.s_prev == -1) == 8
    assert np.sum(table.s_next == -1) == 8


def test_validation_errors():
    with pytest.raises(RadiusNonPositive):
        build_tube_stent(_line(), r0=0.0, n_t=12, rings=8)
    with pytest.raises(ValueError):
        build_tube_stent(_line(), r0=4.0, n_t=7, rings=8)  # odd n_t
    with pytest.raises(ValueError):
        build_tube_stent(_line(), r0=4.0, n_t=6, rings=8)  # too few around
    with pytest.raises(CenterlineTooShort):
        build_tube_stent(_line(), r0=4.0, n_t=12, rings=1)
    with pytest.raises(CenterlineTooShort):
        build_tube_stent(np.zeros((1, 3)), r0=4.0, n_t=12, rings=8)
    with pytest.raises(RadiusNonPositive):
        build_initial_stent(_y_centerlines(), -1.0, 3.0, 12, 26, 13)


def test_rotation_minimizing_frames_stay_orthonormal():
    t = np.linspace(0, 4 * np.pi, 120)
    centers = np.column_stack([np.cos(t), np.sin(t), 0.3 * t])
    tangents = np.column_stack([-np.sin(t), np.cos(t), np.full_like(t, 0.3)])
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]
    n0 = np.array([np.cos(t[0] + np.pi), -np.sin(t[0]), 0.0])
    n0 -= (n0 @ tangents[0]) * tangents[0]
    n0 /= np.linalg.norm(n0)
    normals = rotation_minimizing_frames(centers, tangents, n0)
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-9)
    assert np.abs(np.sum(normals * tangents, axis=1)).max() < 1e-9
    # transport is continuous: successive normals nearly parallel
    dots = np.sum(normals[1:] * normals[:-1], axis=1)
    assert dots.min() > 0.99


def test_export_mesh_format(tmp_path):
    mesh = build_tube_stent(_line(), r0=4.0, n_t=8, rings=8)
    path = tmp_path / "mesh.txt"
    export_mesh(mesh, path)
    lines = path.read_text().splitlines()
    v_lines = [l for l in lines if l.startswith("v ")]
    f_lines = [l for l in lines if l.startswith("f ")]
    assert len(v_lines) == 64 and len(f_lines) == 56
    # faces are 1-based and in range
    for l in f_lines:
        idx = [int(tok) for tok in l.split()[1:]]
        assert all(1 <= i <= 64 for i in idx)
    # deterministic output
    export_mesh(mesh, tmp_path / "mesh2.txt")
    assert path.read_bytes() == (tmp_path / "mesh2.txt").read_bytes()


def test_mesh_dict_round_trip():
    mesh = build_initial_stent(_y_centerlines(), 4.0, 3.0, 12, 26, 13)
    d = json.loads(json.dumps(mesh_to_dict(mesh)))
    back = mesh_from_dict(d)
    assert back.n_t == mesh.n_t
    assert back.seg_names == mesh.seg_names
    assert back.seg_rings == mesh.seg_rings
    np.testing.assert_allclose(back.vertices, mesh.vertices)
    np.testing.assert_allclose(back.radial, mesh.radial)
    assert back.connection.mapping == mesh.connection.mapping
    np.testing.assert_allclose(back.ring_arcs["trunk"], mesh.ring_arcs["trunk"])
    assert back.r_trunk == mesh.r_trunk and back.r_limb == mesh.r_limb


def test_limb_rings_offset_from_bifurcation():
    mesh = build_initial_stent(_y_centerlines(), 4.0, 3.0, 12, 26, 13)
    # first limb ring sits one ring spacing past the junction, not on it
    assert mesh.ring_arcs["left"][0] > 0
    np.testing.assert_allclose(np.diff(mesh.ring_arcs["left"]),
                               mesh.ring_arcs["left"][0], atol=1e-9)
