// Plan panel view model: the service's sequence order flattened into rows
// a table can bind to, plus the headline numbers.

import type { PlanDocument } from "./types.js";

export interface PlanRow {
    position: number;
    sequenceId: string;
    featureId: number;
    toolId: string;
    toolChange: boolean;
    feedKind: string;
    directionDeg: number | null;
    pitchMm: number;
    passCount: number;
    machiningLengthMm: number;
}

export interface PlanSummary {
    sequenceCount: number;
    toolChangeCount: number;
    totalMachiningLengthMm: number;
    warnings: string[];
    rationale: string[];
}

export function planRows(plan: PlanDocument): PlanRow[] {
    const byId = new Map(plan.sequences.map((s) => [s.id, s]));
    let previousTool: string | null = null;
    return plan.process.order.map((sequenceId, i) => {
        const seq = byId.get(sequenceId);
        if (!seq) {
            throw new Error(`plan order references unknown sequence '${sequenceId}'`);
        }
        const toolChange = previousTool !== null && previousTool !== seq.tool_id;
        previousTool = seq.tool_id;
        return {
            position: i + 1,
            sequenceId,
            featureId: seq.feature_id,
            toolId: seq.tool_id,
            toolChange,
            feedKind: seq.strategy.feed_kind,
            directionDeg: seq.strategy.direction_deg,
            pitchMm: seq.strategy.pitch_mm,
            passCount: seq.estimates.pass_count,
            machiningLengthMm: seq.estimates.machining_length_mm,
        };
    });
}

export function planSummary(plan: PlanDocument): PlanSummary {
    return {
        sequenceCount: plan.sequences.length,
        toolChangeCount: plan.process.tool_change_count,
        totalMachiningLengthMm: plan.process.total_machining_length_mm,
        warnings: plan.warnings,
        rationale: plan.process.rationale,
    };
}
