// What this tests
// ---------------
// The tool override round trip: queued patches post to the service
// exactly as built, the session revision follows the response, and the
// plan panel then shows the refreshed plan the service computed, not a
// locally edited one. Responses are verbatim captures of the service
// handling these same patches.

import { describe, expect, it } from "vitest";

import { ServiceError } from "../src/api.js";
import { singleToolBody, toolOverrideBody } from "../src/inspector.js";
import { StudioStore } from "../src/state.js";
import type {
    ContactDocument,
    OverridePatch,
    OverrideResponse,
    PlanDocument,
    SegmentationDocument,
    SessionSummary,
} from "../src/types.js";
import { fakeService, fixture, makeClock } from "./helpers.js";

const summary = fixture<SessionSummary>("session.json");
const contact80 = fixture<ContactDocument>("contact_tau_080.json");
const segmentation = fixture<SegmentationDocument>("segmentation.json");
const planBase = fixture<PlanDocument>("plan_base.json");

interface Harness {
    store: StudioStore;
    posted: OverridePatch[];
}

async function harness(
    response: OverrideResponse,
    planAfter: PlanDocument,
): Promise<Harness> {
    const posted: OverridePatch[] = [];
    let applied = false;
    const store = new StudioStore(
        fakeService({
            contactMap: async () => contact80,
            segmentation: async () => segmentation,
            plan: async () => (applied ? planAfter : planBase),
            postOverrides: async (_id, patch) => {
                posted.push(patch);
                applied = true;
                return response;
            },
        }),
        { scheduler: makeClock() },
    );
    await store.openSession(summary);
    await store.ensurePlan();
    return { store, posted };
}

describe("single-tool override round trip", () => {
    it("posts the patch verbatim and adopts the refreshed plan", async () => {
        const response = fixture<OverrideResponse>("override_corner_response.json");
        const planCorner = fixture<PlanDocument>("plan_corner.json");
        const { store, posted } = await harness(response, planCorner);

        expect(store.state.plan).toEqual(planBase);
        expect(new Set(planBase.bindings.map((b) => b.tool_id)).size).toBe(2);

        store.queueOverride(singleToolBody("corner-only"));
        const ok = await store.applyOverrides();

        expect(ok).toBe(true);
        expect(posted).toEqual([{ tool: "corner-only" }]);
        expect(store.state.pendingOverrides).toEqual({});
        expect(store.state.session!.revision).toBe(response.revision);
        expect(store.state.errorBanner).toBeNull();

        // The plan on screen is the service's recomputed document.
        const plan = store.state.plan!;
        expect(plan).toEqual(planCorner);
        expect(new Set(plan.bindings.map((b) => b.tool_id))).toEqual(new Set(["CEM-D16-R2"]));
        expect(new Set(plan.sequences.map((s) => s.strategy.feed_kind))).toEqual(new Set(["z_level"]));
        expect(plan.process.tool_change_count).toBe(0);
    });
});

describe("per-feature override round trip", () => {
    it("rebinds exactly the targeted feature in the refreshed plan", async () => {
        const response = fixture<OverrideResponse>("override_feature_response.json");
        const planAfter = fixture<PlanDocument>("plan_feature_override.json");
        const { store, posted } = await harness(response, planAfter);

        const before = store.state.plan!.bindings.find((b) => b.feature_id === 2)!;
        expect(before.tool_id).toBe("CEM-D16-R2");

        store.queueOverride(toolOverrideBody(2, "BN-D10"));
        await store.applyOverrides();

        expect(posted).toEqual([{ tool: { "2": "BN-D10" } }]);
        const plan = store.state.plan!;
        expect(plan).toEqual(planAfter);
        const binding = plan.bindings.find((b) => b.feature_id === 2)!;
        expect(binding.tool_id).toBe("BN-D10");
        expect(binding.strategy.pitch_mm).toBeCloseTo(0.799359743794995, 12);
        // Other features keep their original tools.
        expect(plan.bindings.find((b) => b.feature_id === 0)!.tool_id).toBe("CEM-D16-R2");
        expect(plan.bindings.find((b) => b.feature_id === 5)!.tool_id).toBe("CEM-D16-R2");
    });
});

describe("rejected overrides", () => {
    it("keeps the queue and the old plan, and raises the banner", async () => {
        const posted: OverridePatch[] = [];
        const store = new StudioStore(
            fakeService({
                contactMap: async () => contact80,
                segmentation: async () => segmentation,
                plan: async () => planBase,
                postOverrides: async (_id, patch) => {
                    posted.push(patch);
                    throw new ServiceError(
                        "invalid_override", "unknown tool id 'XX-99'", 422);
                },
            }),
            { scheduler: makeClock() },
        );
        await store.openSession(summary);
        await store.ensurePlan();

        store.queueOverride(toolOverrideBody(2, "XX-99"));
        const ok = await store.applyOverrides();

        expect(ok).toBe(false);
        expect(posted).toHaveLength(1);
        expect(store.state.pendingOverrides).toEqual({ tool: { "2": "XX-99" } });
        expect(store.state.plan).toEqual(planBase);
        expect(store.state.session!.revision).toBe(summary.revision);
        expect(store.state.errorBanner).toContain("invalid_override");
    });

    it("does nothing when the queue is empty", async () => {
        const store = new StudioStore(
            fakeService({ contactMap: async () => contact80 }),
            { scheduler: makeClock() },
        );
        await store.openSession(summary);
        expect(await store.applyOverrides()).toBe(false);
    });
});
