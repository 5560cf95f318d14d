from __future__ import annotations

import json
import pathlib
import tempfile

import pytest

from diecam.errors import OverrideError, SessionError
from diecam.mesh import write_stl
from diecam.meshgen import DieParams, synthetic_die
from diecam.pipeline import PipelineConfig, canonical_json
from diecam.session import (AnalysisSession, SessionStore,
                            normalize_single_tool)


# What this tests
# - session lifecycle: creation, summaries, the store
# - atomic override patches: a rejected patch changes nothing
# - bundles restore to byte-identical plans


def die_bytes():
    mesh = synthetic_die(DieParams(
        segments=24, cap_step_deg=6.0, cone_step=3.0,
        base_fillet_step_deg=15.0, floor_step=4.0, wall_step=4.0,
        rim_step_deg=15.0, parting_step=5.0))
    with tempfile.TemporaryDirectory() as td:
        path = pathlib.Path(td) / "die.stl"
        write_stl(mesh, path)
        return path.read_bytes()


@pytest.fixture(scope="module")
def stl():
    return die_bytes()


@pytest.fixture()
def session(stl):
    return AnalysisSession(
        stl, name="bench",
        config=PipelineConfig(min_region_area_frac=0.002))


def test_session_summary(session):
    doc = session.summary()
    assert doc["name"] == "bench"
    assert doc["revision"] == 0
    assert doc["facet_count"] == len(session.mesh)
    assert len(doc["mesh_sha256"]) == 64
    assert len(doc["session_id"]) == 12


def test_single_tool_aliases():
    assert normalize_single_tool(None) is None
    for alias in ("corner-only", "corner_only", "corner", "corner_end",
                  "CORNER-ONLY"):
        assert normalize_single_tool(alias) == "corner_end"
    assert normalize_single_tool("ball") == "ball_nose"
    assert normalize_single_tool("flat-only") == "flat_end"
    with pytest.raises(OverrideError, match="unknown single_tool"):
        normalize_single_tool("drill")


def test_mesh_document_shape(session):
    doc = session.mesh_document()
    assert doc["schema"] == 1
    assert len(doc["vertices"]) == len(session.mesh.vertices)
    assert len(doc["facets"]) == len(session.mesh)
    assert len(doc["facet_normals_q16"]) == len(session.mesh)
    flat = [c for n in doc["facet_normals_q16"] for c in n]
    assert all(-32767 <= c <= 32767 for c in flat)


def test_ephemeral_contact_thresholds(session):
    base = session.contact_doc()
    relaxed = session.contact_doc(tau_flat=0.9)
    assert relaxed["config"]["tau_flat"] == 0.9
    assert base["config"]["tau_flat"] == 0.8
    # the stored config is untouched by ephemeral views
    assert session.config.tau_flat == 0.8
    assert session.revision == 0
    # ephemeral histograms really differ
    assert relaxed["histogram"]["flat"]["count"] < \
        base["histogram"]["flat"]["count"]


def test_ephemeral_direction_grid(session):
    wide = session.continuity_doc(directions="0:170:10")
    assert len(wide["directions_deg"]) == 18
    assert session.config.directions == "0:90:10"


def test_document_caching(session):
    a = session.plan_doc()
    assert session.plan_doc() is a
    b = session.contact_doc()
    assert session.contact_doc() is b
    assert session.contact_doc(tau_flat=0.9) is not b


def test_override_merge_increments_revision(session):
    seg = session.segmentation_doc()
    flats = [f["id"] for f in seg["features"] if f["class"] == "flat"]
    result = session.apply_overrides({"merge": flats[:2]})
    assert result["applied"] is True
    assert result["revision"] == 1
    assert session.revision == 1
    after = session.segmentation_doc()
    assert len(after["features"]) == len(seg["features"]) - 1


def test_override_rejection_is_atomic(session):
    before_config = session.config.to_dict()
    before_plan = canonical_json(session.plan_doc())
    with pytest.raises(OverrideError):
        session.apply_overrides({"merge": [0, 999]})
    with pytest.raises(OverrideError):
        session.apply_overrides({"definitely_not_a_field": 1})
    with pytest.raises(OverrideError):
        # valid field, invalid value: fails during trial validation
        session.apply_overrides({"tool": {"0": "no-such-tool"}})
    assert session.revision == 0
    assert session.config.to_dict() == before_config
    assert canonical_json(session.plan_doc()) == before_plan


def test_override_single_tool_and_back(session):
    session.apply_overrides({"tool": "corner-only"})
    assert session.config.single_tool == "corner_end"
    plan = session.plan_doc()
    assert {b["tool_id"] for b in plan["bindings"]} == {"CEM-D16-R2"}
    session.apply_overrides({"single_tool": None})
    assert session.config.single_tool is None
    assert session.revision == 2


def test_override_threshold_field(session):
    result = session.apply_overrides({"tau_flat": 0.85})
    assert result["config"]["tau_flat"] == 0.85
    assert session.contact_doc()["config"]["tau_flat"] == 0.85


def test_override_tech_rebinds_pitch(session):
    before = session.plan_doc()["bindings"][0]["strategy"]["pitch_mm"]
    session.apply_overrides({"tech": {
        "material": "X38CrMoV5", "roughness_Rt_um": 4.0,
        "form_tolerance_mm": 0.1}})
    after = session.plan_doc()["bindings"][0]["strategy"]["pitch_mm"]
    assert after < before  # finer scallop target, tighter pitch
    assert session.tech.roughness_rt_um == 4.0


def test_bundle_round_trip_plan_bytes(session):
    session.apply_overrides({"tau_flat": 0.85})
    original_plan = canonical_json(session.plan_doc())
    bundle = json.loads(session.bundle_json())
    assert bundle["bundle_schema"] == 1
    assert bundle["revision"] == 1

    bundle["session_id"] = "restored00001"
    restored = AnalysisSession.from_bundle(bundle)
    assert restored.id == "restored00001"
    assert restored.revision == 1
    assert restored.config.tau_flat == 0.85
    assert canonical_json(restored.plan_doc()) == original_plan


def test_bundle_rejects_bad_documents(stl):
    with pytest.raises(SessionError):
        AnalysisSession.from_bundle([])
    with pytest.raises(SessionError, match="unsupported bundle schema"):
        AnalysisSession.from_bundle({"bundle_schema": 99})
    with pytest.raises(SessionError, match="stl_b64"):
        AnalysisSession.from_bundle({"bundle_schema": 1})
    with pytest.raises(SessionError, match="stl_b64"):
        AnalysisSession.from_bundle({"bundle_schema": 1,
                                     "stl_b64": "!!! not base64 !!!"})


def test_bundle_preserves_null_compatibility(stl):
    session = AnalysisSession(stl, compatibility=None)
    assert session.compatibility is None
    restored = AnalysisSession.from_bundle(session.bundle())
    assert restored.compatibility is None


def test_store_add_get_list(stl):
    store = SessionStore()
    a = store.add(AnalysisSession(stl, name="a", session_id="aaa"))
    store.add(AnalysisSession(stl, name="b", session_id="bbb"))
    assert len(store) == 2
    assert store.get("aaa") is a
    assert [s["session_id"] for s in store.list()] == ["aaa", "bbb"]
    with pytest.raises(SessionError, match="unknown session 'zzz'"):
        store.get("zzz")
    with pytest.raises(SessionError, match="already exists"):
        store.add(AnalysisSession(stl, session_id="aaa"))
