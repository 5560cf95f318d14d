"""Analysis sessions: one uploaded mesh plus its evolving configuration.

A session owns the original STL bytes, the cleaned mesh, the pipeline
configuration and the machining context (tool library, technological data,
compatibility table). Overrides mutate the configuration atomically: the
candidate configuration is validated by actually running the affected
stages, and only then committed, so a rejected override leaves the session
exactly as it was. Results cache per configuration fingerprint and
invalidate by simply being recomputed under the new fingerprint.
"""

from __future__ import annotations

import base64
import threading
import uuid
from dataclasses import replace

import numpy as np

from .association import TIP_BALL, TIP_CORNER, TIP_FLAT, TIP_TYPES, \
    technological_data_from_dict, tool_library_from_json
from .errors import OverrideError, SchemaError, SessionError
from .mesh import CleaningOptions, TriMesh, load_stl_bytes
from .pipeline import (
    AnalysisStages,
    FeatureOp,
    PipelineConfig,
    canonical_json,
    contact_document,
    continuity_document,
    default_technological_data,
    default_tool_library,
    mesh_sha256,
    segmentation_document,
)

BUNDLE_SCHEMA_VERSION = 1

_SINGLE_TOOL_ALIASES = {
    "corner-only": TIP_CORNER, "corner_only": TIP_CORNER,
    "corner": TIP_CORNER, TIP_CORNER: TIP_CORNER,
    "ball-only": TIP_BALL, "ball_only": TIP_BALL,
    "ball": TIP_BALL, TIP_BALL: TIP_BALL,
    "flat-only": TIP_FLAT, "flat_only": TIP_FLAT,
    "flat": TIP_FLAT, TIP_FLAT: TIP_FLAT,
}


def normalize_single_tool(value) -> str | None:
    """Accept the tip type or its common aliases ('corner-only', ...)."""
    if value is None:
        return None
    name = str(value).strip().lower()
    if name in _SINGLE_TOOL_ALIASES:
        return _SINGLE_TOOL_ALIASES[name]
    raise OverrideError(
        f"unknown single_tool value {value!r}; expected one of "
        f"{list(TIP_TYPES)} or a '<tip>-only' alias")


class AnalysisSession:
    """One mesh under interactive analysis."""

    def __init__(self, stl_bytes: bytes, name: str = "",
                 session_id: str | None = None,
                 config: PipelineConfig | None = None,
                 tools=None, tech=None, compatibility=None,
                 cleaning: CleaningOptions = CleaningOptions()):
        self.id = session_id or uuid.uuid4().hex[:12]
        self.name = name or self.id
        self.stl_bytes = bytes(stl_bytes)
        self.lock = threading.RLock()
        self.revision = 0
        mesh = load_stl_bytes(self.stl_bytes, cleaning, source=self.name)
        # compatibility passes through verbatim: None means no table, and a
        # restored bundle must keep whatever the session had, default or not
        self._stages = AnalysisStages(
            mesh=mesh,
            config=config or PipelineConfig(),
            tools=list(tools) if tools is not None else default_tool_library(),
            tech=tech if tech is not None else default_technological_data(),
            compatibility=compatibility,
        )
        # keyed by (stage, fingerprint); holds the latest few ephemeral views
        self._doc_cache: dict[tuple[str, str], dict] = {}

    # -- accessors -----------------------------------------------------------

    @property
    def mesh(self) -> TriMesh:
        return self._stages.mesh

    @property
    def config(self) -> PipelineConfig:
        return self._stages.config

    @property
    def tools(self):
        return self._stages.tools

    @property
    def tech(self):
        return self._stages.tech

    @property
    def compatibility(self):
        return self._stages.compatibility

    def summary(self) -> dict:
        d = self.mesh.diagnostics
        return {
            "session_id": self.id,
            "name": self.name,
            "revision": self.revision,
            "facet_count": d.facet_count,
            "vertex_count": d.vertex_count,
            "mesh_sha256": mesh_sha256(self.mesh),
        }

    # -- documents -----------------------------------------------------------

    def _cached(self, stage: str, fingerprint: str, build) -> dict:
        key = (stage, fingerprint)
        with self.lock:
            if key not in self._doc_cache:
                if len(self._doc_cache) > 32:
                    self._doc_cache.clear()
                self._doc_cache[key] = build()
            return self._doc_cache[key]

    def _stages_for(self, config: PipelineConfig) -> AnalysisStages:
        if config is self._stages.config:
            return self._stages
        return AnalysisStages(mesh=self.mesh, config=config,
                              tools=self.tools, tech=self.tech,
                              compatibility=self.compatibility)

    def mesh_document(self) -> dict:
        """Geometry payload for rendering: 16-bit quantized facet normals."""
        mesh = self.mesh
        quant = np.round(mesh.facet_normals * 32767.0).astype(np.int16)
        return {
            "schema": 1,
            "mesh_sha256": mesh_sha256(mesh),
            "vertices": [[float(c) for c in v] for v in mesh.vertices],
            "facets": [[int(i) for i in f] for f in mesh.facets],
            "facet_normals_q16": [[int(c) for c in n] for n in quant],
            "diagnostics": mesh.diagnostics.to_dict(),
        }

    def contact_doc(self, tau_draft: float | None = None,
                    tau_flat: float | None = None) -> dict:
        with self.lock:
            config = self.config
            if tau_draft is not None or tau_flat is not None:
                config = replace(
                    config,
                    tau_draft=config.tau_draft
                    if tau_draft is None else float(tau_draft),
                    tau_flat=config.tau_flat
                    if tau_flat is None else float(tau_flat))
            stages = self._stages_for(config)
            return self._cached(
                "contact", config.fingerprint("contact"),
                lambda: contact_document(self.mesh, config,
                                         stages.indicators()))

    def continuity_doc(self, directions: str | None = None) -> dict:
        with self.lock:
            config = self.config
            if directions is not None:
                config = replace(config, directions=str(directions))
            stages = self._stages_for(config)
            return self._cached(
                "continuity", config.fingerprint("continuity"),
                lambda: continuity_document(self.mesh, config,
                                            stages.profile()))

    def segmentation_doc(self) -> dict:
        with self.lock:
            return self._cached(
                "segmentation",
                self.config.fingerprint("segmentation",
                                        extra=self._context_extra()),
                lambda: segmentation_document(self.mesh, self.config,
                                              self._stages.segmentation()))

    def plan_doc(self) -> dict:
        with self.lock:
            return self._cached(
                "plan",
                self.config.fingerprint("plan", extra=self._context_extra()),
                lambda: self._stages.plan())

    def _context_extra(self) -> dict:
        return {
            "tools": [t.to_dict() for t in self.tools],
            "tech": self.tech.to_dict(),
            "compatibility": self.compatibility,
        }

    # -- overrides -----------------------------------------------------------

    def apply_overrides(self, patch: dict) -> dict:
        """Validate and commit an override patch; reject atomically.

        The candidate configuration is exercised end to end (through
        association) before it replaces the session state, so errors like
        merging incompatible features or naming unknown tools surface here
        and leave the previous state untouched.
        """
        if not isinstance(patch, dict):
            raise OverrideError("override patch must be a JSON object")
        with self.lock:
            config_doc = self.config.to_dict()
            tools = self.tools
            tech = self.tech
            compatibility = self.compatibility
            for key, value in patch.items():
                if key == "merge":
                    pair = [int(i) for i in value]
                    config_doc["feature_ops"] = config_doc["feature_ops"] + [
                        FeatureOp("merge", tuple(pair)).to_dict()]
                elif key == "split":
                    if isinstance(value, dict):
                        op = FeatureOp("split", (int(value["feature"]),),
                                       int(value.get("ring_count", 3)))
                    else:
                        op = FeatureOp("split", (int(value),))
                    config_doc["feature_ops"] = (config_doc["feature_ops"]
                                                 + [op.to_dict()])
                elif key == "feature_ops":
                    config_doc["feature_ops"] = list(value)
                elif key == "tool":
                    if isinstance(value, dict):
                        merged = dict(config_doc["tool_overrides"])
                        merged.update({str(int(f)): str(t)
                                       for f, t in value.items()})
                        config_doc["tool_overrides"] = merged
                    else:
                        config_doc["single_tool"] = \
                            normalize_single_tool(value)
                elif key == "tool_overrides":
                    config_doc["tool_overrides"] = {
                        str(int(f)): str(t) for f, t in value.items()}
                elif key == "strategy":
                    merged = dict(config_doc["strategy_overrides"])
                    for f, v in value.items():
                        merged[str(int(f))] = {
                            "feed_kind": str(v["feed_kind"]),
                            "direction_deg": v.get("direction_deg"),
                        }
                    config_doc["strategy_overrides"] = merged
                elif key == "single_tool":
                    config_doc["single_tool"] = normalize_single_tool(value)
                elif key == "tools":
                    tools = tool_library_from_json(value)
                elif key in ("tech", "technological_data"):
                    tech = technological_data_from_dict(value)
                elif key == "compatibility":
                    compatibility = value
                elif key in config_doc:
                    config_doc[key] = value
                else:
                    raise OverrideError(f"unknown override field {key!r}")

            candidate = PipelineConfig.from_dict(config_doc)
            trial = AnalysisStages(mesh=self.mesh, config=candidate,
                                   tools=tools, tech=tech,
                                   compatibility=compatibility)
            trial.association()  # validates feature/tool references

            self._stages = trial
            self.revision += 1
            return {"applied": True, "revision": self.revision,
                    "config": candidate.to_dict()}

    # -- bundles ---------------------------------------------------------

    def bundle(self) -> dict:
        """Self-contained snapshot: restores to an identical session."""
        with self.lock:
            return {
                "bundle_schema": BUNDLE_SCHEMA_VERSION,
                "session_id": self.id,
                "name": self.name,
                "revision": self.revision,
                "stl_b64": base64.b64encode(self.stl_bytes).decode("ascii"),
                "config": self.config.to_dict(),
                "tool_library": [t.to_dict() for t in self.tools],
                "technological_data": self.tech.to_dict(),
                "compatibility": self.compatibility,
            }

    @classmethod
    def from_bundle(cls, doc: dict) -> "AnalysisSession":
        if not isinstance(doc, dict):
            raise SessionError("bundle must be a JSON object")
        if doc.get("bundle_schema") != BUNDLE_SCHEMA_VERSION:
            raise SessionError(
                f"unsupported bundle schema {doc.get('bundle_schema')!r}")
        try:
            stl = base64.b64decode(doc["stl_b64"], validate=True)
        except (KeyError, ValueError) as exc:
            raise SessionError(f"bundle has invalid stl_b64: {exc}") from exc
        session = cls(
            stl, name=str(doc.get("name", "")),
            session_id=str(doc["session_id"]) if "session_id" in doc else None,
            config=PipelineConfig.from_dict(doc.get("config", {})),
            tools=tool_library_from_json(doc["tool_library"])
            if "tool_library" in doc else None,
            tech=technological_data_from_dict(doc["technological_data"])
            if "technological_data" in doc else None,
            compatibility=doc.get("compatibility"),
        )
        session.revision = int(doc.get("revision", 0))
        return session

    def bundle_json(self) -> str:
        return canonical_json(self.bundle())


class SessionStore:
    """Threadsafe id-keyed session registry."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, AnalysisSession] = {}

    def add(self, session: AnalysisSession) -> AnalysisSession:
        with self._lock:
            if session.id in self._sessions:
                raise SessionError(f"session id {session.id!r} already exists")
            self._sessions[session.id] = session
            return session

    def get(self, session_id: str) -> AnalysisSession:
        with self._lock:
            if session_id not in self._sessions:
                raise SessionError(f"unknown session {session_id!r}")
            return self._sessions[session_id]

    def list(self) -> list[dict]:
        with self._lock:
            sessions = list(self._sessions.values())
        return [s.summary() for s in
                sorted(sessions, key=lambda s: s.id)]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)
