// Shapes of the documents the analysis service serves. Field names follow
// the wire format verbatim so responses can be used without reshaping.

export type ContactClass = "flat" | "transition" | "draft" | "undercut";

export type ContinuityKind = "indifferent" | "oriented" | "z_level" | "undefined";

export type FeedKind = "parallel_planes" | "parallel_curves" | "z_level";

export type Rgb = [number, number, number];

export interface SessionSummary {
    session_id: string;
    name: string;
    revision: number;
    facet_count: number;
    vertex_count: number;
    mesh_sha256: string;
}

// One stop of a piecewise-linear scale: [position in [0, 1], [r, g, b]].
export type ScaleStop = [number, Rgb];

export interface ScaleDefinition {
    scales: Record<string, { description: string; stops: ScaleStop[] }>;
    out_of_range: Rgb;
    feature_palette: Rgb[];
}

export interface MeshDiagnostics {
    facet_count: number;
    vertex_count: number;
    vertices_merged: number;
    degenerate_removed: number;
    flipped_facets: number;
    boundary_edge_count: number;
    non_manifold_edge_count: number;
    non_manifold_edges: number[][];
    undercut_facet_count: number;
    bounding_box: [number[], number[]];
}

export interface MeshDocument {
    schema: number;
    mesh_sha256: string;
    vertices: number[][];
    facets: number[][];
    // Unit normals quantized to signed 16-bit; divide by 32767 to decode.
    facet_normals_q16: number[][];
    diagnostics: MeshDiagnostics;
}

export interface ContactFacet {
    class: ContactClass;
    omega: number;
    kappa: number;
}

export interface HistogramEntry {
    count: number;
    area_mm2: number;
}

export interface ContactDocument {
    schema: number;
    mesh_sha256: string;
    config: { tau_draft: number; tau_flat: number; tool_axis: number[] };
    per_facet: ContactFacet[];
    histogram: Record<ContactClass, HistogramEntry>;
    undercuts: number[];
}

export interface ContinuityDocument {
    schema: number;
    mesh_sha256: string;
    config: Record<string, unknown>;
    directions_deg: number[];
    kappa: number[];
    // Keyed by direction angle (stringified); one 0/1 flag per facet.
    in_plane: Record<string, number[]>;
}

export interface FeatureContinuity {
    kind: ContinuityKind;
    direction_deg: number | null;
    band_deg: number[];
}

export interface FeatureDoc {
    id: number;
    class: ContactClass;
    continuity: FeatureContinuity;
    facet_ids: number[];
    area: number;
    centroid: number[];
    mean_z: number;
    z_range: [number, number];
    depth_from_top: number;
    principal_direction: number | null;
}

export interface FeatureRelation {
    feature_a: number;
    feature_b: number;
    kind: string;
    min_distance: number;
    shared_edge_length: number;
}

export interface Waiver {
    contained_id: number;
    container_id: number;
    note: string;
}

export interface SegmentationDocument {
    schema: number;
    mesh_sha256: string;
    config: Record<string, unknown>;
    facet_feature: number[];
    features: FeatureDoc[];
    relations: FeatureRelation[];
    waivers: Waiver[];
}

export interface StrategyDoc {
    feed_kind: FeedKind;
    direction_deg: number | null;
    sweeping_mode: string;
    cutting_mode: string;
    pitch_mm: number;
    machining_tolerance_mm: number;
}

export interface ToolDoc {
    id: string;
    tip_type: string;
    diameter_mm: number;
    corner_radius_mm: number;
    tool_length_mm: number;
    overall_length_mm: number;
    material: string;
}

export interface BindingDoc {
    feature_id: number;
    tool_id: string;
    strategy: StrategyDoc;
    technological: Record<string, number | string>;
    machining: Record<string, number>;
}

export interface JunctionCheck {
    feature_a: number;
    feature_b: number;
    status: "ok" | "degrade";
    mismatch_mm: number;
    tolerance_mm: number;
    reason: string;
}

export interface SequenceEstimates {
    pass_count: number;
    pass_length_mm: number;
    machining_length_mm: number;
}

export interface SequenceDoc {
    id: string;
    feature_id: number;
    tool_id: string;
    strategy: StrategyDoc;
    parking_point: number[];
    estimates: SequenceEstimates;
    structure: Record<string, unknown>;
    interference_notes: string[];
}

export interface ProcessDoc {
    order: string[];
    tool_change_count: number;
    total_machining_length_mm: number;
    rationale: string[];
}

export interface PlanDocument {
    plan_schema: number;
    mesh_summary: { sha256: string; facet_count: number; bounding_box: [number[], number[]] };
    config: Record<string, unknown>;
    technological_data: Record<string, unknown>;
    tool_library: ToolDoc[];
    compatibility: Record<string, string[]> | null;
    features: FeatureDoc[];
    relations: FeatureRelation[];
    waivers: Waiver[];
    bindings: BindingDoc[];
    junction_checks: JunctionCheck[];
    sequences: SequenceDoc[];
    process: ProcessDoc;
    warnings: string[];
}

// Body of a POST .../overrides request. Keys mirror the service contract:
// "tool" takes either a single-tool alias or a {feature id: tool id} map.
export type OverridePatch = Record<string, unknown>;

export interface OverrideResponse {
    applied: boolean;
    revision: number;
    config: Record<string, unknown>;
}

export interface ServiceErrorBody {
    error: { code: string; message: string; details?: unknown };
}
