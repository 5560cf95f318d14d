"""Exception types shared across the toolkit.

Every error carries a short machine-readable ``code`` so the CLI and the HTTP
service can emit structured reports without string matching.
"""

from __future__ import annotations


class DiecamError(Exception):
    """Base class for all toolkit errors."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        report = {"code": self.code, "message": self.message}
        if self.details:
            report["details"] = self.details
        return report


class MeshFormatError(DiecamError):
    code = "mesh_format"


class EmptyMeshError(DiecamError):
    code = "empty_mesh"


class ThresholdError(DiecamError):
    code = "invalid_thresholds"


class DirectionGridError(DiecamError):
    code = "invalid_direction_grid"


class SchemaError(DiecamError):
    """Input document failed validation; ``path`` points at the offending field."""

    code = "schema"

    def __init__(self, message: str, path: str = "", **details):
        if path:
            details = {"path": path, **details}
        super().__init__(message, **details)


class RoughnessCriterionError(DiecamError):
    code = "unsupported_roughness_criterion"


class ToolSelectionError(DiecamError):
    code = "tool_selection"


class PitchDomainError(DiecamError):
    code = "pitch_domain"


class JunctionRelationError(DiecamError):
    code = "junction_relation"


class PlanningError(DiecamError):
    code = "planning"


class ArtifactError(DiecamError):
    """Missing or inconsistent pipeline artifact on disk."""

    code = "artifact"


class OverrideError(DiecamError):
    code = "invalid_override"


class SessionError(DiecamError):
    code = "session"
