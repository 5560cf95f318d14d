// What this tests
// ---------------
// The contact legend is a pure projection of the served document: its
// thresholds are the exact values the service echoed back for the current
// sliders, and its counts and areas are lifted from the histogram without
// any recounting.

import { describe, expect, it } from "vitest";

import { contactLegend } from "../src/legend.js";
import type { ContactDocument, ScaleDefinition } from "../src/types.js";
import { fixture } from "./helpers.js";

const definition = fixture<ScaleDefinition>("colorscale.json");

describe("contactLegend", () => {
    it("carries the document thresholds through unchanged", () => {
        const doc = fixture<ContactDocument>("contact_tau_085.json");
        const legend = contactLegend(doc, definition);
        expect(legend.tauDraft).toBe(doc.config.tau_draft);
        expect(legend.tauFlat).toBe(doc.config.tau_flat);
        expect(legend.tauFlat).toBe(0.85);
    });

    it("lifts counts and areas field for field from the histogram", () => {
        const doc = fixture<ContactDocument>("contact_tau_080.json");
        const legend = contactLegend(doc, definition);
        expect(legend.rows.map((r) => r.cls)).toEqual([
            "flat", "transition", "draft", "undercut",
        ]);
        for (const row of legend.rows) {
            expect(row.count).toBe(doc.histogram[row.cls].count);
            expect(row.areaMm2).toBe(doc.histogram[row.cls].area_mm2);
        }
        // Total conservation: every facet lands in exactly one class.
        const total = legend.rows.reduce((acc, r) => acc + r.count, 0);
        expect(total).toBe(doc.per_facet.length);
    });

    it("renders threshold text from the echoed values", () => {
        const doc = fixture<ContactDocument>("contact_tau_090.json");
        const legend = contactLegend(doc, definition);
        expect(legend.rows[0]!.rangeText).toBe("omega >= 0.9");
        expect(legend.rows[1]!.rangeText).toBe("0.15 < omega < 0.9");
        expect(legend.rows[2]!.rangeText).toBe("0 <= omega <= 0.15");
    });

    it("uses the out-of-range color for the undercut swatch", () => {
        const doc = fixture<ContactDocument>("contact_tau_080.json");
        const legend = contactLegend(doc, definition);
        expect(legend.rows[3]!.swatch).toEqual(definition.out_of_range);
    });
});
