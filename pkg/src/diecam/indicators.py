"""Per-facet machinability indicators and continuity analysis.

Two scalars drive everything downstream. For a unit facet normal n and unit
tool axis a:

    orientation indicator   omega = n . a
    contact-area indicator  kappa = |n - omega a|

They satisfy omega^2 + kappa^2 = 1, so kappa is the sine of the facet's
slope against the axis and omega its cosine. Thresholds on omega split
facets into contact classes; the horizontal component n_H = n - omega a
measures, per candidate feed direction f, how far the facet is from being
millable by planes parallel to f:

    rho(facet, f) = kappa - |n_H . f|

rho is zero exactly when n_H is parallel to f (the facet lies "in plane"
for that feed) and grows to kappa when n_H is orthogonal to f.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DirectionGridError, ThresholdError
from .mesh import TriMesh

logger = logging.getLogger(__name__)

DEFAULT_TAU_DRAFT = 0.15
DEFAULT_TAU_FLAT = 0.8

CLASS_FLAT = "flat"
CLASS_DRAFT = "draft"
CLASS_TRANSITION = "transition"
CLASS_UNDERCUT = "undercut"
CONTACT_CLASSES = (CLASS_FLAT, CLASS_DRAFT, CLASS_TRANSITION, CLASS_UNDERCUT)

KIND_INDIFFERENT = "indifferent"
KIND_ORIENTED = "oriented"
KIND_ZLEVEL = "z_level"
KIND_UNDEFINED = "undefined"


@dataclass(frozen=True)
class ToolAxis:
    """Unit tool axis; default machine vertical (0, 0, 1)."""

    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        v = np.asarray(self.direction, dtype=np.float64)
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            raise ValueError(f"tool axis must be unit length, |v| = {norm}")

    @classmethod
    def from_vector(cls, vector) -> "ToolAxis":
        v = np.asarray(vector, dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm <= 0.0 or not np.isfinite(norm):
            raise ValueError("tool axis vector must be non-zero")
        v = v / norm
        return cls((float(v[0]), float(v[1]), float(v[2])))

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=np.float64)

    def plane_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic orthonormal basis (u, v) of the plane normal to the axis."""
        a = self.vector
        seed = np.array([1.0, 0.0, 0.0])
        if abs(a @ seed) > 0.9:
            seed = np.array([0.0, 1.0, 0.0])
        u = seed - (seed @ a) * a
        u /= np.linalg.norm(u)
        v = np.cross(a, u)
        return u, v


@dataclass(frozen=True)
class ContactMapConfig:
    """Classification thresholds on the orientation indicator."""

    tau_draft: float = DEFAULT_TAU_DRAFT
    tau_flat: float = DEFAULT_TAU_FLAT
    axis: ToolAxis = ToolAxis()

    def __post_init__(self):
        if not (0.0 <= self.tau_draft < self.tau_flat <= 1.0):
            raise ThresholdError(
                "thresholds must satisfy 0 <= tau_draft < tau_flat <= 1, "
                f"got tau_draft={self.tau_draft}, tau_flat={self.tau_flat}")

    def to_dict(self) -> dict:
        return {
            "tool_axis": list(self.axis.direction),
            "tau_draft": self.tau_draft,
            "tau_flat": self.tau_flat,
        }


@dataclass
class FacetIndicators:
    """Vectorized indicator values, one entry per facet."""

    omega: np.ndarray
    kappa: np.ndarray
    axis: ToolAxis
    contact_class: np.ndarray | None = None  # array of class-name strings

    @property
    def undercut_mask(self) -> np.ndarray:
        return self.omega < 0.0


def compute_indicators(mesh: TriMesh, axis: ToolAxis = ToolAxis()) -> FacetIndicators:
    """Orientation and contact-area indicators for every facet."""
    normals = mesh.facet_normals
    a = axis.vector
    omega = normals @ a
    horizontal = normals - omega[:, None] * a
    kappa = np.linalg.norm(horizontal, axis=1)
    return FacetIndicators(omega=omega, kappa=kappa, axis=axis)


def classify_contact(indicators: FacetIndicators,
                     config: ContactMapConfig) -> FacetIndicators:
    """Fill per-facet contact classes from the threshold pair.

    Flat       omega >= tau_flat
    Transition tau_draft < omega < tau_flat
    Draft      0 <= omega <= tau_draft
    Undercut   omega < 0
    """
    omega = indicators.omega
    classes = np.where(
        omega < 0.0, CLASS_UNDERCUT,
        np.where(omega >= config.tau_flat, CLASS_FLAT,
                 np.where(omega > config.tau_draft, CLASS_TRANSITION, CLASS_DRAFT)))
    indicators.contact_class = classes
    return indicators


def contact_map(mesh: TriMesh, indicators: FacetIndicators,
                config: ContactMapConfig) -> dict:
    """Assemble the contact map document (fixed field order)."""
    if indicators.contact_class is None:
        classify_contact(indicators, config)
    classes = indicators.contact_class
    areas = mesh.facet_areas
    histogram = {}
    for name in CONTACT_CLASSES:
        mask = classes == name
        histogram[name] = {
            "count": int(np.count_nonzero(mask)),
            "area_mm2": float(areas[mask].sum()),
        }
    per_facet = [
        {"omega": float(o), "kappa": float(k), "class": str(c)}
        for o, k, c in zip(indicators.omega, indicators.kappa, classes)
    ]
    return {
        "config": config.to_dict(),
        "per_facet": per_facet,
        "histogram": histogram,
        "undercuts": [int(i) for i in np.nonzero(indicators.undercut_mask)[0]],
    }


# -- feed directions -------------------------------------------------------

@dataclass(frozen=True)
class FeedDirection:
    """Candidate feed direction in the plane normal to the tool axis.

    Directions are undirected lines, so angles live in [0, 180).
    """

    angle_deg: float
    vector: tuple[float, float, float]

    @classmethod
    def from_angle(cls, angle_deg: float, axis: ToolAxis = ToolAxis()) -> "FeedDirection":
        angle = float(angle_deg) % 180.0
        u, v = axis.plane_basis()
        rad = np.deg2rad(angle)
        vec = np.cos(rad) * u + np.sin(rad) * v
        return cls(angle, (float(vec[0]), float(vec[1]), float(vec[2])))


def parse_direction_spec(spec: str) -> list[float]:
    """Parse a ``start:stop:step`` angle grid (degrees, stop inclusive).

    Angles are reduced mod 180; duplicates after reduction are dropped, so
    ``0:180:30`` yields {0, 30, 60, 90, 120, 150}.
    """
    parts = spec.split(":")
    if len(parts) != 3:
        raise DirectionGridError(
            f"direction spec must be start:stop:step, got {spec!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise DirectionGridError(f"non-numeric direction spec {spec!r}") from exc
    if step <= 0.0:
        raise DirectionGridError(f"direction step must be > 0, got {step}")
    if stop < start:
        raise DirectionGridError(
            f"empty direction range: stop {stop} < start {start}")
    angles: list[float] = []
    seen: set[float] = set()
    k = 0
    while True:
        angle = start + k * step
        if angle > stop + 1e-9:
            break
        reduced = round(angle % 180.0, 9)
        if reduced not in seen:
            seen.add(reduced)
            angles.append(reduced)
        k += 1
    if not angles:
        raise DirectionGridError(f"direction spec {spec!r} produced no angles")
    return angles


def default_directions(axis: ToolAxis = ToolAxis(),
                       spec: str | None = None) -> list[FeedDirection]:
    """Tested feed directions; default grid is 0..90 degrees in steps of 10."""
    angles = parse_direction_spec(spec) if spec else [float(a) for a in range(0, 91, 10)]
    return [FeedDirection.from_angle(a, axis) for a in angles]


@dataclass(frozen=True)
class ContinuityParams:
    """Tolerances for the per-region continuity classification."""

    epsilon_pp: float = 0.05      # in-plane residual bound
    coverage_min: float = 0.95    # area fraction that must be in-plane
    epsilon_z: float = 0.05       # kappa spread bound for z-level regions
    tau_zmin: float = 0.3         # minimum mean kappa for z-level regions

    def to_dict(self) -> dict:
        return {
            "epsilon_pp": self.epsilon_pp,
            "coverage_min": self.coverage_min,
            "epsilon_z": self.epsilon_z,
            "tau_zmin": self.tau_zmin,
        }


@dataclass
class ContinuityProfile:
    """Residuals of every facet against every tested feed direction.

    ``rho`` has shape (facets, directions). Undercut facets are excluded
    from all region statistics but keep their rows so facet ids stay stable.
    """

    directions: list[FeedDirection]
    rho: np.ndarray
    kappa: np.ndarray
    areas: np.ndarray
    undercut_mask: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        return np.array([d.angle_deg for d in self.directions])

    def region_coverage(self, facet_ids, epsilon_pp: float) -> np.ndarray:
        """Area-weighted in-plane coverage of a facet set, per direction."""
        ids = self._effective(facet_ids)
        if ids.size == 0:
            return np.zeros(len(self.directions))
        w = self.areas[ids]
        total = w.sum()
        if total <= 0.0:
            return np.zeros(len(self.directions))
        in_plane = self.rho[ids] <= epsilon_pp
        return (w[:, None] * in_plane).sum(axis=0) / total

    def region_mean_rho(self, facet_ids) -> np.ndarray:
        ids = self._effective(facet_ids)
        if ids.size == 0:
            return np.full(len(self.directions), np.inf)
        w = self.areas[ids]
        total = w.sum()
        return (w[:, None] * self.rho[ids]).sum(axis=0) / total

    def region_kappa_stats(self, facet_ids) -> tuple[float, float]:
        """Area-weighted (mean, stddev) of kappa over a facet set."""
        ids = self._effective(facet_ids)
        if ids.size == 0:
            return 0.0, 0.0
        w = self.areas[ids]
        total = w.sum()
        k = self.kappa[ids]
        mean = float((w * k).sum() / total)
        var = float((w * (k - mean) ** 2).sum() / total)
        return mean, float(np.sqrt(max(var, 0.0)))

    def _effective(self, facet_ids) -> np.ndarray:
        ids = np.asarray(list(facet_ids), dtype=np.int64)
        if ids.size == 0:
            return ids
        return ids[~self.undercut_mask[ids]]


def continuity_residuals(mesh: TriMesh, indicators: FacetIndicators,
                         directions: list[FeedDirection]) -> ContinuityProfile:
    """Residual rho = kappa - |n_H . f| for every facet and feed direction."""
    if not directions:
        raise DirectionGridError("at least one feed direction is required")
    a = indicators.axis.vector
    normals = mesh.facet_normals
    horizontal = normals - indicators.omega[:, None] * a
    f = np.array([d.vector for d in directions])  # (D, 3)
    proj = np.abs(horizontal @ f.T)               # (F, D)
    rho = indicators.kappa[:, None] - proj
    np.clip(rho, 0.0, None, out=rho)
    return ContinuityProfile(
        directions=list(directions),
        rho=rho,
        kappa=indicators.kappa.copy(),
        areas=mesh.facet_areas.copy(),
        undercut_mask=indicators.undercut_mask.copy(),
    )


@dataclass(frozen=True)
class ContinuityClass:
    """Continuity verdict for a region.

    kind is one of indifferent / oriented / z_level / undefined. Oriented
    regions carry the selected feed angle and the contiguous band of grid
    angles that passed the coverage test.
    """

    kind: str
    direction_deg: float | None = None
    band_deg: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "direction_deg": self.direction_deg,
            "band_deg": list(self.band_deg),
        }


def _contiguous_bands(passing: np.ndarray, angles: np.ndarray) -> list[list[int]]:
    """Group passing grid indices into contiguous runs.

    When the grid spans the whole 180-degree period the first and last
    entries are treated as adjacent (a band may wrap through 0).
    """
    idx = np.nonzero(passing)[0]
    if idx.size == 0:
        return []
    runs: list[list[int]] = [[int(idx[0])]]
    for i in idx[1:]:
        if i == runs[-1][-1] + 1:
            runs[-1].append(int(i))
        else:
            runs.append([int(i)])
    if len(angles) >= 2:
        step = angles[1] - angles[0]
        full_circle = (angles[-1] - angles[0] + step) >= 180.0 - 1e-9
        if (full_circle and len(runs) > 1
                and runs[0][0] == 0 and runs[-1][-1] == len(angles) - 1):
            runs[0] = runs.pop() + runs[0]
    return runs


def classify_continuity(facet_ids, profile: ContinuityProfile,
                        params: ContinuityParams = ContinuityParams()) -> ContinuityClass:
    """Classify a region's continuity against the tested feed directions.

    Priority order:

    1. indifferent: coverage >= coverage_min for every direction;
    2. oriented: exactly one contiguous band of at most three grid angles
       passes; the reported direction is the band member with maximal
       coverage, ties resolved by minimal mean residual, then smaller angle;
    3. z_level: kappa spread <= epsilon_z and mean kappa >= tau_zmin;
    4. undefined otherwise.
    """
    angles = profile.angles
    coverage = profile.region_coverage(facet_ids, params.epsilon_pp)
    passing = coverage >= params.coverage_min

    if passing.all() and passing.size > 0:
        return ContinuityClass(KIND_INDIFFERENT)

    bands = _contiguous_bands(passing, angles)
    if len(bands) == 1 and len(bands[0]) <= 3:
        band = bands[0]
        mean_rho = profile.region_mean_rho(facet_ids)
        best = min(band, key=lambda i: (-coverage[i], mean_rho[i], angles[i]))
        return ContinuityClass(
            KIND_ORIENTED,
            direction_deg=float(angles[best]),
            band_deg=tuple(float(angles[i]) for i in band))

    mean_kappa, std_kappa = profile.region_kappa_stats(facet_ids)
    if std_kappa <= params.epsilon_z and mean_kappa >= params.tau_zmin:
        return ContinuityClass(KIND_ZLEVEL)
    return ContinuityClass(KIND_UNDEFINED)


# -- effective tool radius -------------------------------------------------

def effective_radius(kappa: float, tool) -> float:
    """Radius of the tool's actual cutting contact for a given kappa.

    Ball nose: the contact point sits kappa * D/2 off the axis. Corner end
    mill: the flat annulus radius (D/2 - r) plus the corner arc contribution
    r * kappa. Flat end mill: full D/2 regardless of slope.
    """
    from .association import TIP_BALL, TIP_CORNER, TIP_FLAT  # local to avoid cycle

    if not (0.0 <= kappa <= 1.0 + 1e-12):
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
    if tool.tip_type == TIP_BALL:
        return 0.5 * tool.diameter_mm * kappa
    if tool.tip_type == TIP_CORNER:
        return (0.5 * tool.diameter_mm - tool.corner_radius_mm) \
            + tool.corner_radius_mm * kappa
    if tool.tip_type == TIP_FLAT:
        return 0.5 * tool.diameter_mm
    raise ValueError(f"unknown tool tip type {tool.tip_type!r}")
