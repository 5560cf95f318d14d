"""Machining sequences and process ordering.

A sequence is an uninterrupted series of trajectories run with one tool, one
approach and one clearance: fast initial approach, initial trajectory,
intermediate trajectories, final trajectory, fast final clearance. The
process orders sequences to minimize tool changes, then machines top-down
within each tool group.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .association import (
    STRATEGY_PARALLEL_PLANES,
    STRATEGY_ZLEVEL,
    CuttingTool,
    MachiningFeature,
    MachiningStrategy,
)
from .errors import PlanningError
from .indicators import FeedDirection, ToolAxis
from .mesh import TriMesh

logger = logging.getLogger(__name__)

PARKING_MARGIN_MM = 10.0


@dataclass(frozen=True)
class SequenceEstimates:
    pass_count: int
    pass_length_mm: float
    machining_length_mm: float

    def to_dict(self) -> dict:
        return {
            "pass_count": self.pass_count,
            "pass_length_mm": self.pass_length_mm,
            "machining_length_mm": self.machining_length_mm,
        }


@dataclass
class MachiningSequence:
    id: str
    feature_id: int
    tool_id: str
    strategy: MachiningStrategy
    parking_point: tuple[float, float, float]
    estimates: SequenceEstimates
    interference_notes: list[str] = field(default_factory=list)
    mean_z: float = 0.0
    top_z: float = 0.0

    def to_dict(self) -> dict:
        passes = self.estimates.pass_count
        descriptor = {
            "fast_initial_approach": {
                "from": "parking_point",
                "to": "initial_trajectory_start",
                "clearance": "above_stock",
            },
            "initial_trajectory": {
                "approach_path": "plunge_to_contact",
                "machining_path": self.strategy.feed_kind,
                "clearance_path": "retract_normal",
            },
            "intermediate_trajectory_count": max(passes - 2, 0),
            "transitions": {
                "mode": self.strategy.sweeping_mode,
                "cutting_mode": self.strategy.cutting_mode,
                "step_mm": self.strategy.pitch_mm,
                "count": max(passes - 1, 0),
            },
            "final_trajectory": {
                "approach_path": "continue_sweep",
                "machining_path": self.strategy.feed_kind,
                "clearance_path": "retract_normal",
            },
            "fast_final_clearance": {
                "from": "final_trajectory_end",
                "to": "parking_point",
            },
        }
        return {
            "id": self.id,
            "feature_id": self.feature_id,
            "tool_id": self.tool_id,
            "strategy": self.strategy.to_dict(),
            "structure": descriptor,
            "parking_point": list(self.parking_point),
            "interference_notes": list(self.interference_notes),
            "estimates": self.estimates.to_dict(),
        }


def _planar_extent(mesh: TriMesh, facet_ids, axis: ToolAxis,
                   direction_deg: float) -> float:
    """Feature width perpendicular to the feed direction, in the axis plane."""
    u, v = axis.plane_basis()
    rad = math.radians((direction_deg + 90.0) % 180.0)
    perp = math.cos(rad) * np.asarray(u) + math.sin(rad) * np.asarray(v)
    verts = np.unique(mesh.facets[list(facet_ids)])
    coords = mesh.vertices[verts] @ perp
    return float(coords.max() - coords.min())


def build_sequence(mf: MachiningFeature, tool: CuttingTool,
                   strategy: MachiningStrategy, mesh: TriMesh,
                   axis: ToolAxis = ToolAxis(),
                   parking_margin_mm: float = PARKING_MARGIN_MM,
                   clearance_mm: float = 5.0) -> MachiningSequence:
    """Assemble the trajectory-set descriptor and effort estimates.

    pass_count covers the extent transverse to the sweep (width for parallel
    planes, height for z-level) at the strategy pitch; the mean pass length
    is area / extent. Extents clamp below at the machining tolerance: a
    feature is never flatter than its tolerance band, which keeps z-level
    passes over near-flat features finite and costs them honestly high.
    """
    feature = mf.geometric
    if feature.area <= 0.0 or not feature.facet_ids:
        raise PlanningError(f"feature {feature.id} has zero extent")
    pitch = strategy.pitch_mm
    if pitch <= 0.0:
        raise PlanningError(f"feature {feature.id}: strategy pitch must be > 0")

    floor = max(strategy.machining_tolerance_mm, 1e-6)
    if strategy.feed_kind == STRATEGY_ZLEVEL:
        extent = feature.z_range[1] - feature.z_range[0]
    else:
        extent = _planar_extent(mesh, feature.facet_ids, axis,
                                strategy.direction_deg or 0.0)
    extent = max(extent, floor)
    pass_count = max(1, math.ceil(extent / pitch - 1e-12))
    pass_length = feature.area / extent
    machining_length = pass_count * pass_length

    top = mesh.z_max
    parking_z = top + max(parking_margin_mm, clearance_mm)
    parking = (feature.centroid[0], feature.centroid[1], parking_z)

    notes = [w.note for w in mf.waivers if w.container_id == feature.id]

    return MachiningSequence(
        id=f"seq-{feature.id:03d}",
        feature_id=feature.id,
        tool_id=tool.id,
        strategy=strategy,
        parking_point=parking,
        estimates=SequenceEstimates(
            pass_count=pass_count,
            pass_length_mm=float(pass_length),
            machining_length_mm=float(machining_length),
        ),
        interference_notes=notes,
        mean_z=feature.mean_z,
        top_z=feature.z_range[1],
    )


@dataclass
class MachiningProcess:
    order: list[str]
    tool_change_count: int
    total_machining_length_mm: float
    rationale: list[str]

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "tool_change_count": self.tool_change_count,
            "total_machining_length_mm": self.total_machining_length_mm,
            "rationale": list(self.rationale),
        }


def order_process(sequences: list[MachiningSequence],
                  waivers=(), order_by: str = "tool") -> MachiningProcess:
    """Order sequences into a process.

    Default policy groups sequences by tool to minimize tool changes; the
    group holding the topmost feature runs first, groups then descend by
    their topmost feature. Within a group, decreasing feature mean height,
    ties by feature id. Containment waivers state that the contained feature
    may run after its container regardless of height order, so they never
    constrain this ordering; they are surfaced in the rationale.
    ``order_by="z"`` ignores tooling and orders purely top-down.
    """
    if order_by not in ("tool", "z"):
        raise PlanningError(f"unknown ordering policy {order_by!r}")
    rationale: list[str] = []
    if not sequences:
        return MachiningProcess([], 0, 0.0, ["empty feature list: nothing to order"])

    seqs = list(sequences)
    if order_by == "z":
        seqs.sort(key=lambda s: (-s.mean_z, s.feature_id))
        rationale.append("ordering policy z: pure top-down by feature mean height")
    else:
        groups: dict[str, list[MachiningSequence]] = {}
        for s in seqs:
            groups.setdefault(s.tool_id, []).append(s)
        group_rank = {
            tool_id: max(s.top_z for s in members)
            for tool_id, members in groups.items()
        }
        ordered_tools = sorted(groups, key=lambda t: (-group_rank[t], t))
        rationale.append(
            "ordering policy tool: one block per tool to minimize tool changes; "
            f"tool {ordered_tools[0]!r} first (holds the topmost feature, "
            f"z = {group_rank[ordered_tools[0]]:g})")
        seqs = []
        for tool_id in ordered_tools:
            members = sorted(groups[tool_id],
                             key=lambda s: (-s.mean_z, s.feature_id))
            for m in members:
                rationale.append(
                    f"{m.id}: tool {tool_id!r}, feature mean z {m.mean_z:g}")
            seqs.extend(members)

    waiver_list = list(waivers)
    contained_ids = {w.contained_id for w in waiver_list}
    for w in waiver_list:
        rationale.append(
            f"waiver: feature {w.contained_id} does not exceed feature "
            f"{w.container_id}; height order relaxed between them")
    if contained_ids:
        logger.debug("ordering saw %d containment waivers", len(waiver_list))

    changes = sum(1 for a, b in zip(seqs, seqs[1:]) if a.tool_id != b.tool_id)
    total = float(sum(s.estimates.machining_length_mm for s in seqs))
    return MachiningProcess(
        order=[s.id for s in seqs],
        tool_change_count=changes,
        total_machining_length_mm=total,
        rationale=rationale,
    )
