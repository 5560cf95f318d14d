// What this tests
// ---------------
// The feature card is a field-for-field lift of the service documents:
// every value on it equals the corresponding field in the segmentation
// response or the plan's binding and tool rows, with no local rederiving.
// Undercut features short-circuit to the 3-axis reachability note.

import { describe, expect, it } from "vitest";

import {
    buildFeatureCard,
    singleToolBody,
    strategyOverrideBody,
    toolOverrideBody,
    UNREACHABLE_NOTE,
} from "../src/inspector.js";
import { mergePatch } from "../src/state.js";
import type { PlanDocument, SegmentationDocument } from "../src/types.js";
import { fixture } from "./helpers.js";

const seg = fixture<SegmentationDocument>("segmentation.json");
const plan = fixture<PlanDocument>("plan_base.json");

describe("buildFeatureCard", () => {
    it("equals the segmentation fields for every feature", () => {
        for (const feature of seg.features) {
            const card = buildFeatureCard(feature.id, seg, plan);
            expect(card.featureId).toBe(feature.id);
            expect(card.contactClass).toBe(feature.class);
            expect(card.continuityKind).toBe(feature.continuity.kind);
            expect(card.detectedDirectionDeg).toBe(feature.continuity.direction_deg);
            expect(card.bandDeg).toEqual(feature.continuity.band_deg);
            expect(card.facetCount).toBe(feature.facet_ids.length);
            expect(card.areaMm2).toBe(feature.area);
            expect(card.meanZ).toBe(feature.mean_z);
            expect(card.zRange).toEqual(feature.z_range);
            expect(card.depthFromTopMm).toBe(feature.depth_from_top);
        }
    });

    it("equals the plan's binding and tool fields for a bound feature", () => {
        const binding = plan.bindings.find((b) => b.feature_id === 2)!;
        const tool = plan.tool_library.find((t) => t.id === binding.tool_id)!;
        const card = buildFeatureCard(2, seg, plan);

        expect(card.toolId).toBe(binding.tool_id);
        expect(card.strategy).toEqual(binding.strategy);
        expect(card.pitchMm).toBe(binding.strategy.pitch_mm);

        const check = card.toolCheck!;
        expect(check.toolId).toBe(tool.id);
        expect(check.tipType).toBe(tool.tip_type);
        expect(check.toolLengthMm).toBe(tool.tool_length_mm);
        expect(check.overallLengthMm).toBe(tool.overall_length_mm);
        expect(check.depthFromTopMm).toBe(seg.features[2]!.depth_from_top);
        expect(check.clearanceMm).toBe(plan.config["clearance_mm"]);
        // The service only binds tools that pass its accessibility rule,
        // so the served numbers must agree with the displayed result.
        expect(check.toolLengthOk).toBe(true);
        expect(check.overallLengthOk).toBe(true);
    });

    it("pins the benchmark values for the cavity floor", () => {
        const card = buildFeatureCard(2, seg, plan);
        expect(card.contactClass).toBe("flat");
        expect(card.continuityKind).toBe("indifferent");
        expect(card.detectedDirectionDeg).toBeNull();
        expect(card.depthFromTopMm).toBe(30.0);
        expect(card.toolId).toBe("CEM-D16-R2");
        expect(card.strategy!.feed_kind).toBe("parallel_planes");
        expect(card.pitchMm).toBeCloseTo(0.504951482817904, 12);
    });

    it("marks undercut features unreachable and binds nothing", () => {
        const undercutSeg: SegmentationDocument = {
            ...seg,
            features: [
                {
                    id: 0,
                    class: "undercut",
                    continuity: { kind: "undefined", direction_deg: null, band_deg: [] },
                    facet_ids: [0, 1],
                    area: 10.0,
                    centroid: [0, 0, 0],
                    mean_z: -1.0,
                    z_range: [-2.0, 0.0],
                    depth_from_top: 42.0,
                    principal_direction: null,
                },
            ],
        };
        const card = buildFeatureCard(0, undercutSeg, plan);
        expect(card.reachability).toBe(UNREACHABLE_NOTE);
        expect(card.reachability).toBe("unreachable (3-axis)");
        expect(card.toolId).toBeNull();
        expect(card.strategy).toBeNull();
        expect(card.toolCheck).toBeNull();
    });

    it("rejects a feature id the segmentation does not contain", () => {
        expect(() => buildFeatureCard(99, seg, plan)).toThrow(/unknown feature 99/);
    });

    it("works without a plan, leaving the binding side empty", () => {
        const card = buildFeatureCard(3, seg, null);
        expect(card.contactClass).toBe("draft");
        expect(card.toolId).toBeNull();
        expect(card.pitchMm).toBeNull();
        expect(card.toolCheck).toBeNull();
    });
});

describe("override bodies", () => {
    it("builds the per-feature tool patch", () => {
        expect(toolOverrideBody(2, "BN-D10")).toEqual({ tool: { "2": "BN-D10" } });
    });

    it("builds the single-tool patch and its reset", () => {
        expect(singleToolBody("corner-only")).toEqual({ tool: "corner-only" });
        expect(singleToolBody(null)).toEqual({ tool: null });
    });

    it("builds the strategy patch", () => {
        expect(strategyOverrideBody(4, "parallel_planes@45")).toEqual({
            strategy: { "4": "parallel_planes@45" },
        });
    });

    it("merges per-feature patches and lets a later scalar replace a map", () => {
        const a = mergePatch(toolOverrideBody(2, "BN-D10"), toolOverrideBody(3, "CEM-D16-R2"));
        expect(a).toEqual({ tool: { "2": "BN-D10", "3": "CEM-D16-R2" } });
        const b = mergePatch(a, singleToolBody("corner-only"));
        expect(b).toEqual({ tool: "corner-only" });
    });
});
