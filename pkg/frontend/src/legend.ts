// Contact map legend. Thresholds come verbatim from the document the
// service computed for the current slider values; counts and areas come
// from its histogram. Nothing here re-derives a classification.

import { scalarToRgb } from "./colorscale.js";
import type { ContactClass, ContactDocument, Rgb, ScaleDefinition } from "./types.js";

export interface LegendRow {
    cls: ContactClass;
    rangeText: string;
    count: number;
    areaMm2: number;
    swatch: Rgb;
}

export interface ContactLegend {
    tauDraft: number;
    tauFlat: number;
    rows: LegendRow[];
}

function fmt(x: number): string {
    // Trim trailing zeros so 0.80 renders as 0.8, matching slider labels.
    return String(Number(x.toPrecision(6)));
}

export function contactLegend(doc: ContactDocument, definition: ScaleDefinition): ContactLegend {
    const tauDraft = doc.config.tau_draft;
    const tauFlat = doc.config.tau_flat;
    // Swatches sample the shared scale at each class range midpoint; the
    // undercut swatch is the out-of-range color, same as the rendered map.
    const mids = [
        (tauFlat + 1) / 2,
        (tauDraft + tauFlat) / 2,
        tauDraft / 2,
        null,
    ];
    const colors = scalarToRgb(mids, definition);
    const ranges: Record<ContactClass, string> = {
        flat: `omega >= ${fmt(tauFlat)}`,
        transition: `${fmt(tauDraft)} < omega < ${fmt(tauFlat)}`,
        draft: `0 <= omega <= ${fmt(tauDraft)}`,
        undercut: "omega < 0",
    };
    const order: ContactClass[] = ["flat", "transition", "draft", "undercut"];
    return {
        tauDraft,
        tauFlat,
        rows: order.map((cls, i) => ({
            cls,
            rangeText: ranges[cls],
            count: doc.histogram[cls].count,
            areaMm2: doc.histogram[cls].area_mm2,
            swatch: colors[i]!,
        })),
    };
}
