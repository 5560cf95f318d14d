from __future__ import annotations

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from diecam.association import CuttingTool, compute_pitch
from diecam.indicators import (ContactMapConfig, FeedDirection, ToolAxis,
                               classify_contact, compute_indicators,
                               continuity_residuals)
from diecam.mesh import mesh_from_triangles
from diecam.planner import MachiningSequence, SequenceEstimates, order_process
from diecam.association import MachiningStrategy


# What this tests
# - randomized invariants: the indicator identity, rotation invariance,
#   residual bounds, pitch monotonicity, ordering determinism
# - each property is phrased against the public API only


def rotation_matrix(rx, ry, rz):
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mz @ my @ mx


coord = st.floats(min_value=-50.0, max_value=50.0,
                  allow_nan=False, allow_infinity=False)
angle = st.floats(min_value=0.0, max_value=2.0 * np.pi,
                  allow_nan=False, allow_infinity=False)


@st.composite
def triangle_soups(draw, max_facets=6):
    count = draw(st.integers(min_value=1, max_value=max_facets))
    tri = np.array(draw(st.lists(
        st.lists(coord, min_size=9, max_size=9),
        min_size=count, max_size=count))).reshape(-1, 3, 3)
    # keep triangles well conditioned so cleaning drops nothing and the
    # rotated build keeps the same facets in the same order
    edges = tri - np.roll(tri, 1, axis=1)
    assume(float(np.min(np.linalg.norm(edges, axis=2))) > 1e-2)
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    assume(float(np.min(0.5 * np.linalg.norm(cross, axis=1))) > 1e-3)
    flat = tri.reshape(-1, 3)
    d = np.linalg.norm(flat[:, None, :] - flat[None, :, :], axis=2)
    np.fill_diagonal(d, 1.0)
    assume(float(d.min()) > 1e-2)
    return tri


@given(triangle_soups())
@settings(max_examples=60, deadline=None)
def test_indicator_identity(tri):
    ind = compute_indicators(mesh_from_triangles(tri))
    np.testing.assert_allclose(ind.omega ** 2 + ind.kappa ** 2, 1.0,
                               rtol=0, atol=1e-9)
    assert np.all(ind.kappa >= 0.0)


@given(triangle_soups(max_facets=4), angle, angle, angle)
@settings(max_examples=40, deadline=None)
def test_indicators_are_rotation_invariant(tri, rx, ry, rz):
    rot = rotation_matrix(rx, ry, rz)
    base = compute_indicators(mesh_from_triangles(tri))
    turned = compute_indicators(
        mesh_from_triangles(tri @ rot.T),
        axis=ToolAxis.from_vector(rot @ np.array([0.0, 0.0, 1.0])))
    assert len(base.omega) == len(turned.omega)
    np.testing.assert_allclose(turned.omega, base.omega, rtol=0, atol=1e-9)
    np.testing.assert_allclose(turned.kappa, base.kappa, rtol=0, atol=1e-9)


@given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=2,
                max_size=30),
       st.floats(min_value=0.01, max_value=0.5),
       st.floats(min_value=0.51, max_value=0.99))
@settings(max_examples=60, deadline=None)
def test_classification_is_monotone_in_omega(omegas, tau_draft, tau_flat):
    order = {"undercut": 0, "draft": 1, "transition": 2, "flat": 3}
    om = np.array(sorted(omegas))
    from diecam.indicators import FacetIndicators
    ind = FacetIndicators(omega=om, kappa=np.sqrt(np.maximum(1 - om ** 2, 0)),
                          axis=ToolAxis())
    classify_contact(
        ind, ContactMapConfig(tau_draft=tau_draft, tau_flat=tau_flat))
    ranks = [order[c] for c in ind.contact_class]
    assert ranks == sorted(ranks)


@given(triangle_soups(),
       st.lists(st.floats(min_value=0.0, max_value=179.0), min_size=1,
                max_size=6))
@settings(max_examples=40, deadline=None)
def test_residuals_stay_between_zero_and_kappa(tri, degs):
    mesh = mesh_from_triangles(tri)
    ind = compute_indicators(mesh)
    profile = continuity_residuals(
        mesh, ind, [FeedDirection.from_angle(d) for d in degs])
    assert np.all(profile.rho >= 0.0)
    assert np.all(profile.rho <= ind.kappa[:, None] + 1e-12)


def ball(diameter):
    return CuttingTool(id="b", tip_type="ball_nose", diameter_mm=diameter,
                       corner_radius_mm=diameter / 2, overall_length_mm=100.0,
                       tool_length_mm=60.0, material="carbide")


@given(st.floats(min_value=2.0, max_value=30.0),
       st.floats(min_value=1.0, max_value=100.0),
       st.floats(min_value=1.0, max_value=100.0))
@settings(max_examples=60, deadline=None)
def test_pitch_grows_with_scallop_budget(diameter, h1, h2):
    assume(abs(h1 - h2) > 1e-6)
    lo, hi = sorted((h1, h2))
    tool = ball(diameter)
    assert compute_pitch(tool, lo) < compute_pitch(tool, hi)


@given(st.floats(min_value=2.0, max_value=30.0),
       st.floats(min_value=2.0, max_value=30.0),
       st.floats(min_value=1.0, max_value=100.0))
@settings(max_examples=60, deadline=None)
def test_pitch_grows_with_tip_radius(d1, d2, h):
    assume(abs(d1 - d2) > 1e-6)
    lo, hi = sorted((d1, d2))
    assert compute_pitch(ball(lo), h) < compute_pitch(ball(hi), h)


@st.composite
def sequence_lists(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    strat = MachiningStrategy(feed_kind="z_level", direction_deg=None,
                              sweeping_mode="one_way", cutting_mode="down",
                              pitch_mm=1.0, machining_tolerance_mm=0.1)
    seqs = []
    for i in range(n):
        mean_z = draw(st.floats(min_value=0.0, max_value=40.0))
        top_z = mean_z + draw(st.floats(min_value=0.0, max_value=10.0))
        seqs.append(MachiningSequence(
            id=f"seq-{i:03d}", feature_id=i,
            tool_id=draw(st.sampled_from(["T-A", "T-B", "T-C"])),
            strategy=strat, parking_point=(0.0, 0.0, 50.0),
            estimates=SequenceEstimates(1, 10.0, 10.0),
            mean_z=mean_z, top_z=top_z))
    return seqs


@given(sequence_lists(), st.randoms(use_true_random=False),
       st.sampled_from(["tool", "z"]))
@settings(max_examples=60, deadline=None)
def test_ordering_ignores_input_permutation(seqs, rng, policy):
    reference = order_process(seqs, order_by=policy)
    shuffled = list(seqs)
    rng.shuffle(shuffled)
    result = order_process(shuffled, order_by=policy)
    assert result.order == reference.order
    assert result.tool_change_count == reference.tool_change_count
    assert result.total_machining_length_mm == \
        reference.total_machining_length_mm


@given(triangle_soups())
@settings(max_examples=40, deadline=None)
def test_vertex_merge_is_a_fixed_point(tri):
    first = mesh_from_triangles(tri)
    second = mesh_from_triangles(first.vertices[first.facets])
    assert len(second) == len(first)
    np.testing.assert_array_equal(
        second.vertices[second.facets], first.vertices[first.facets])
