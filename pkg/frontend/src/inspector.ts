// Feature inspector card. Every value is lifted field for field from the
// segmentation and plan documents; the only logic here is looking up the
// binding and tool rows that belong to the feature.

import type {
    ContactClass,
    ContinuityKind,
    OverridePatch,
    PlanDocument,
    SegmentationDocument,
    StrategyDoc,
    ToolDoc,
} from "./types.js";

export const UNREACHABLE_NOTE = "unreachable (3-axis)";

export interface ToolCheck {
    toolId: string;
    tipType: string;
    toolLengthMm: number;
    overallLengthMm: number;
    depthFromTopMm: number;
    clearanceMm: number | null;
    // TL covers the feature depth; OL covers depth plus the clearance the
    // plan was computed with. Both compare served numbers only.
    toolLengthOk: boolean;
    overallLengthOk: boolean;
}

export interface FeatureCard {
    featureId: number;
    contactClass: ContactClass;
    continuityKind: ContinuityKind;
    detectedDirectionDeg: number | null;
    bandDeg: number[];
    facetCount: number;
    areaMm2: number;
    meanZ: number;
    zRange: [number, number];
    depthFromTopMm: number;
    reachability: "reachable" | typeof UNREACHABLE_NOTE;
    toolId: string | null;
    strategy: StrategyDoc | null;
    pitchMm: number | null;
    toolCheck: ToolCheck | null;
}

function findTool(plan: PlanDocument, toolId: string): ToolDoc | null {
    return plan.tool_library.find((t) => t.id === toolId) ?? null;
}

export function buildFeatureCard(
    featureId: number,
    seg: SegmentationDocument,
    plan: PlanDocument | null,
): FeatureCard {
    const feature = seg.features.find((f) => f.id === featureId);
    if (!feature) {
        throw new Error(`unknown feature ${featureId}`);
    }
    const card: FeatureCard = {
        featureId,
        contactClass: feature.class,
        continuityKind: feature.continuity.kind,
        detectedDirectionDeg: feature.continuity.direction_deg,
        bandDeg: feature.continuity.band_deg,
        facetCount: feature.facet_ids.length,
        areaMm2: feature.area,
        meanZ: feature.mean_z,
        zRange: feature.z_range,
        depthFromTopMm: feature.depth_from_top,
        reachability: feature.class === "undercut" ? UNREACHABLE_NOTE : "reachable",
        toolId: null,
        strategy: null,
        pitchMm: null,
        toolCheck: null,
    };
    if (!plan || card.reachability === UNREACHABLE_NOTE) {
        return card;
    }
    const binding = plan.bindings.find((b) => b.feature_id === featureId);
    if (!binding) {
        return card;
    }
    card.toolId = binding.tool_id;
    card.strategy = binding.strategy;
    card.pitchMm = binding.strategy.pitch_mm;
    const tool = findTool(plan, binding.tool_id);
    if (tool) {
        const clearanceRaw = plan.config["clearance_mm"];
        const clearance = typeof clearanceRaw === "number" ? clearanceRaw : null;
        card.toolCheck = {
            toolId: tool.id,
            tipType: tool.tip_type,
            toolLengthMm: tool.tool_length_mm,
            overallLengthMm: tool.overall_length_mm,
            depthFromTopMm: feature.depth_from_top,
            clearanceMm: clearance,
            toolLengthOk: tool.tool_length_mm >= feature.depth_from_top,
            overallLengthOk: clearance === null
                ? tool.overall_length_mm >= feature.depth_from_top
                : tool.overall_length_mm >= feature.depth_from_top + clearance,
        };
    }
    return card;
}

/** Patch assigning one tool to one feature. */
export function toolOverrideBody(featureId: number, toolId: string): OverridePatch {
    return { tool: { [String(featureId)]: toolId } };
}

/** Patch switching the whole plan to a single tool class, or back. */
export function singleToolBody(alias: string | null): OverridePatch {
    return { tool: alias };
}

/** Patch forcing a strategy, e.g. "parallel_planes@45" or "z_level". */
export function strategyOverrideBody(featureId: number, descriptor: string): OverridePatch {
    return { strategy: { [String(featureId)]: descriptor } };
}
