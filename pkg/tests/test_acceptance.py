from __future__ import annotations

import functools
import time
from dataclasses import replace

import numpy as np
import pytest

from diecam.association import CuttingTool, compute_pitch
from diecam.indicators import (ContactMapConfig, ContinuityParams, ToolAxis,
                               classify_contact, classify_continuity,
                               compute_indicators, continuity_residuals,
                               default_directions)
from diecam.meshgen import (DieParams, cone_band, cylinder_wall, hemisphere,
                            plane_patch, ramp_patch, random_soup,
                            synthetic_die)
from diecam.pipeline import canonical_json, run_plan
from diecam.segmentation import (feature_relations, grow_elementary_features,
                                 make_feature)

from oracles import pitch_for_scallop, regions_bruteforce, relations_bruteforce


# What this tests
# - the complete acceptance checklist, one test per criterion
# - every test prints a PASS or FAIL line (run with -s to see them live)


def criterion(label):
    def deco(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL  {label}", flush=True)
                raise
            print(f"PASS  {label}", flush=True)
        return run
    return deco


@criterion("indicator identity and rotation invariance within 1e-9")
def test_indicator_identity_and_rotation():
    from diecam.mesh import mesh_from_triangles
    rng = np.random.default_rng(0)
    for seed in range(10):
        mesh = random_soup(seed=seed, count=300)
        ind = compute_indicators(mesh)
        np.testing.assert_allclose(ind.omega ** 2 + ind.kappa ** 2, 1.0,
                                   rtol=0, atol=1e-9)
        # a turn about the tool axis must not change either indicator
        theta = rng.uniform(0, 2 * np.pi)
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        turned = mesh_from_triangles(mesh.vertices[mesh.facets] @ rot.T)
        assert len(turned) == len(mesh)
        ind2 = compute_indicators(turned)
        np.testing.assert_allclose(ind2.omega, ind.omega, rtol=0, atol=1e-9)
        np.testing.assert_allclose(ind2.kappa, ind.kappa, rtol=0, atol=1e-9)


def classes_of(mesh):
    ind = compute_indicators(mesh)
    classify_contact(ind, ContactMapConfig())
    return ind


@criterion("analytic meshes classify exactly under default thresholds, < 5 s")
def test_analytic_contact_classes():
    t0 = time.perf_counter()
    assert set(classes_of(plane_patch()).contact_class) == {"flat"}
    assert set(classes_of(cylinder_wall()).contact_class) == {"draft"}
    assert set(classes_of(cone_band(slope_deg=45.0)).contact_class) == \
        {"transition"}

    ind = classes_of(hemisphere(polar_step_deg=1.0))
    polar = np.degrees(np.arccos(np.clip(ind.omega, -1.0, 1.0)))
    flat_to_transition = np.degrees(np.arccos(0.8))       # 36.87
    transition_to_draft = np.degrees(np.arccos(0.15))     # 81.37
    by_class = {c: polar[ind.contact_class == c]
                for c in ("flat", "transition", "draft")}
    assert abs(by_class["flat"].max() - flat_to_transition) <= 2.0
    assert abs(by_class["transition"].min() - flat_to_transition) <= 2.0
    assert abs(by_class["transition"].max() - transition_to_draft) <= 2.0
    assert abs(by_class["draft"].min() - transition_to_draft) <= 2.0
    assert time.perf_counter() - t0 < 5.0


def verdict(mesh, facet_ids=None):
    ind = compute_indicators(mesh)
    prof = continuity_residuals(mesh, ind, default_directions())
    ids = list(range(len(mesh))) if facet_ids is None else facet_ids
    return classify_continuity(ids, prof)


@criterion("continuity verdicts on the four reference shapes, < 1 s each")
def test_continuity_reference_shapes():
    assert [d.angle_deg for d in default_directions()] == \
        [float(a) for a in range(0, 91, 10)]

    t0 = time.perf_counter()
    assert verdict(plane_patch()).kind == "indifferent"
    assert time.perf_counter() - t0 < 1.0

    t0 = time.perf_counter()
    # steep enough that only grid angles near the azimuth pass the
    # residual gate; a shallow ramp widens the band past three angles
    got = verdict(ramp_patch(slope_deg=70.0, azimuth_deg=30.0))
    assert (got.kind, got.direction_deg) == ("oriented", 30.0)
    assert time.perf_counter() - t0 < 1.0

    t0 = time.perf_counter()
    dome = hemisphere(polar_step_deg=2.0, segments=60)
    ind = compute_indicators(dome)
    polar = np.degrees(np.arccos(np.clip(ind.omega, -1.0, 1.0)))
    band = [i for i in range(len(dome)) if 40.0 <= polar[i] <= 75.0]
    assert verdict(dome, band).kind == "undefined"
    assert time.perf_counter() - t0 < 1.0

    t0 = time.perf_counter()
    assert verdict(cylinder_wall()).kind == "z_level"
    assert time.perf_counter() - t0 < 1.0


def ball(tip_radius_mm):
    return CuttingTool(id=f"b{tip_radius_mm:g}", tip_type="ball_nose",
                       diameter_mm=2 * tip_radius_mm,
                       corner_radius_mm=tip_radius_mm,
                       overall_length_mm=120.0, tool_length_mm=80.0,
                       material="carbide")


@criterion("pitch agrees with the two-circle envelope oracle within 1%")
def test_pitch_against_oracle():
    reference = compute_pitch(ball(5.0), 16.0)
    assert reference == pytest.approx(0.79936, abs=5e-6)
    assert reference == pytest.approx(pitch_for_scallop(5.0, 16.0), rel=0.01)
    for h_um in (2.0, 5.0, 16.0, 50.0):
        for tip_r in (1.0, 3.0, 5.0, 8.0):
            got = compute_pitch(ball(tip_r), h_um)
            assert got == pytest.approx(pitch_for_scallop(tip_r, h_um),
                                        rel=0.01)


@criterion("benchmark die: taxonomy, relations, waiver, two tools, "
           "deterministic bytes, < 10 s")
def test_benchmark_die_end_to_end(die_mesh, die_config):
    t0 = time.perf_counter()
    plan = run_plan(die_mesh, die_config)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0

    classes = [f["class"] for f in plan["features"]]
    assert classes == ["flat", "transition", "flat", "draft", "transition",
                       "flat"]
    # ids: 0 crest, 1 dome flank, 2 cavity floor, 3 drafted wall,
    #      4 rim blend, 5 surrounding top plane
    z_top = {f["id"]: f["z_range"][1] for f in plan["features"]}
    assert z_top[5] == pytest.approx(die_mesh.z_max)
    assert z_top[0] < z_top[5]  # the crest stays inside the cavity

    kinds = {(r["feature_a"], r["feature_b"]): r["kind"]
             for r in plan["relations"]}
    assert kinds[(2, 3)] == "contact_concave"   # floor meets the wall
    waivers = {(w["container_id"], w["contained_id"])
               for w in plan["waivers"]}
    assert (5, 0) in waivers                    # crest stays below the top

    tools = {b["tool_id"] for b in plan["bindings"]}
    strategies = {b["strategy"]["feed_kind"] for b in plan["bindings"]}
    assert len(tools) == 2
    assert strategies == {"parallel_planes", "z_level"}

    again = run_plan(die_mesh, die_config)
    assert canonical_json(plan) == canonical_json(again)


@criterion("single-tool contingency: every strategy z-level, strictly "
           "longer process")
def test_single_tool_contingency(die_mesh, die_config):
    base = run_plan(die_mesh, die_config)
    forced = run_plan(die_mesh, replace(die_config, single_tool="corner_end"))
    feed_kinds = {b["strategy"]["feed_kind"] for b in forced["bindings"]}
    assert feed_kinds == {"z_level"}
    assert len({b["tool_id"] for b in forced["bindings"]}) == 1
    assert forced["process"]["total_machining_length_mm"] > \
        base["process"]["total_machining_length_mm"]


@criterion("small meshes: segmentation and relations equal brute force")
def test_small_instance_oracle_equality():
    small = [
        synthetic_die(DieParams(
            segments=8, cap_step_deg=30.0, cone_step=12.0,
            base_fillet_step_deg=60.0, floor_step=20.0, wall_step=20.0,
            rim_step_deg=60.0, parting_step=25.0)),
        synthetic_die(DieParams(
            segments=6, cap_step_deg=45.0, cone_step=16.0,
            base_fillet_step_deg=90.0, floor_step=25.0, wall_step=25.0,
            rim_step_deg=90.0, parting_step=30.0)),
    ]
    for mesh in small:
        assert len(mesh) <= 200
        ind = compute_indicators(mesh)
        classify_contact(ind, ContactMapConfig())
        prof = continuity_residuals(mesh, ind, default_directions())
        for frac in (0.002, 0.01):
            regions = grow_elementary_features(mesh, ind,
                                               min_region_area_frac=frac)
            assert regions == regions_bruteforce(mesh, ind.contact_class,
                                                 frac)
        regions = grow_elementary_features(mesh, ind,
                                           min_region_area_frac=0.002)
        feats = [make_feature(i, ids, cls, mesh, prof, ContinuityParams(),
                              ToolAxis(), mesh.z_max)
                 for i, (ids, cls) in enumerate(regions)]
        got = feature_relations(mesh, feats, proximity_distance=16.0)
        expected = relations_bruteforce(
            mesh, {f.id: f.facet_ids for f in feats}, proximity_distance=16.0)
        assert [(r.feature_a, r.feature_b, r.kind) for r in got] == expected
