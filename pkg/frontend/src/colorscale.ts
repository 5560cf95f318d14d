// Scalar-to-color mapping. The scale definition is fetched from the
// service and applied here exactly the way the core applies it, so a map
// rendered in the studio matches a PLY exported next to it stop for stop.

import type { Rgb, ScaleDefinition, ScaleStop } from "./types.js";

export class UnknownScaleError extends Error {
    constructor(scale: string) {
        super(`unknown color scale '${scale}'`);
        this.name = "UnknownScaleError";
    }
}

// Linear interpolation with the same arithmetic order the core uses:
// slope * (x - x0) + y0, ends clamped to the outer stops.
function interpChannel(x: number, stops: ScaleStop[], channel: number): number {
    const first = stops[0]!;
    const last = stops[stops.length - 1]!;
    if (x <= first[0]) {
        return first[1][channel]!;
    }
    if (x >= last[0]) {
        return last[1][channel]!;
    }
    for (let i = 0; i < stops.length - 1; i += 1) {
        const [x0, c0] = stops[i]!;
        const [x1, c1] = stops[i + 1]!;
        if (x <= x1) {
            const slope = (c1[channel]! - c0[channel]!) / (x1 - x0);
            return slope * (x - x0) + c0[channel]!;
        }
    }
    return last[1][channel]!;
}

/**
 * Map scalars in [0, 1] onto a named scale from the served definition.
 *
 * Entries outside [0, 1] are clamped; null and non-finite entries take the
 * definition's out-of-range color. Channel rounding is floor(x + 0.5).
 */
export function scalarToRgb(
    values: ReadonlyArray<number | null>,
    definition: ScaleDefinition,
    scale: string = "rainbow",
): Rgb[] {
    const entry = definition.scales[scale];
    if (!entry) {
        throw new UnknownScaleError(scale);
    }
    const stops = entry.stops;
    const fallback: Rgb = [...definition.out_of_range];
    return values.map((raw) => {
        if (raw === null || !Number.isFinite(raw)) {
            return [...fallback] as Rgb;
        }
        const x = Math.min(1, Math.max(0, raw));
        const out: Rgb = [0, 0, 0];
        for (let c = 0; c < 3; c += 1) {
            out[c] = Math.floor(interpChannel(x, stops, c) + 0.5);
        }
        return out;
    });
}

/** Qualitative palette color for a feature id (cycled). */
export function featureColor(featureId: number, definition: ScaleDefinition): Rgb {
    const palette = definition.feature_palette;
    const entry = palette[((featureId % palette.length) + palette.length) % palette.length]!;
    return [...entry] as Rgb;
}

export function rgbCss([r, g, b]: Rgb): string {
    return `rgb(${r}, ${g}, ${b})`;
}
