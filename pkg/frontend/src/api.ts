// Thin HTTP client for the analysis service. Every domain value shown in
// the studio comes back through one of these calls; nothing is derived
// locally beyond presentation.

import type {
    ContactDocument,
    ContinuityDocument,
    MeshDocument,
    OverridePatch,
    OverrideResponse,
    PlanDocument,
    ScaleDefinition,
    SegmentationDocument,
    ServiceErrorBody,
    SessionSummary,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
    readonly code: string;
    readonly status: number;
    readonly details: unknown;

    constructor(code: string, message: string, status: number, details?: unknown) {
        super(message);
        this.name = "ServiceError";
        this.code = code;
        this.status = status;
        this.details = details;
    }
}

async function raiseForStatus(res: Response): Promise<void> {
    if (res.ok) {
        return;
    }
    let code = "error";
    let message = `service responded ${res.status}`;
    let details: unknown;
    try {
        const body = (await res.json()) as ServiceErrorBody;
        if (body && typeof body === "object" && body.error) {
            code = body.error.code ?? code;
            message = body.error.message ?? message;
            details = body.error.details;
        }
    } catch {
        // Non-JSON error body; keep the generic message.
    }
    throw new ServiceError(code, message, res.status, details);
}

export interface ContactQuery {
    tauDraft?: number;
    tauFlat?: number;
}

export class StudioClient {
    private readonly base: string;
    private readonly fetchImpl: FetchLike;

    constructor(baseUrl: string, fetchImpl?: FetchLike) {
        this.base = baseUrl.replace(/\/+$/, "");
        this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
    }

    private async getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
        const res = await this.fetchImpl(this.base + path, { signal: signal ?? null });
        await raiseForStatus(res);
        return (await res.json()) as T;
    }

    health(): Promise<{ service: string; sessions: number }> {
        return this.getJson("/");
    }

    colorscale(): Promise<ScaleDefinition> {
        return this.getJson("/meta/colorscale");
    }

    async createSession(name: string, stl: ArrayBuffer | Uint8Array): Promise<SessionSummary> {
        const payload = stl instanceof Uint8Array
            ? stl.slice().buffer
            : stl;
        const res = await this.fetchImpl(
            `${this.base}/sessions?name=${encodeURIComponent(name)}`,
            {
                method: "POST",
                headers: { "content-type": "application/octet-stream" },
                body: payload,
            },
        );
        await raiseForStatus(res);
        return (await res.json()) as SessionSummary;
    }

    listSessions(): Promise<SessionSummary[]> {
        return this.getJson("/sessions");
    }

    session(id: string): Promise<SessionSummary> {
        return this.getJson(`/sessions/${id}`);
    }

    mesh(id: string): Promise<MeshDocument> {
        return this.getJson(`/sessions/${id}/mesh`);
    }

    contactMap(id: string, query?: ContactQuery, signal?: AbortSignal): Promise<ContactDocument> {
        const params = new URLSearchParams();
        if (query?.tauDraft !== undefined) {
            params.set("tau_draft", String(query.tauDraft));
        }
        if (query?.tauFlat !== undefined) {
            params.set("tau_flat", String(query.tauFlat));
        }
        const qs = params.toString();
        return this.getJson(`/sessions/${id}/contact-map${qs ? "?" + qs : ""}`, signal);
    }

    continuity(id: string, directions?: string, signal?: AbortSignal): Promise<ContinuityDocument> {
        const qs = directions ? `?directions=${encodeURIComponent(directions)}` : "";
        return this.getJson(`/sessions/${id}/continuity${qs}`, signal);
    }

    segmentation(id: string): Promise<SegmentationDocument> {
        return this.getJson(`/sessions/${id}/segmentation`);
    }

    plan(id: string): Promise<PlanDocument> {
        return this.getJson(`/sessions/${id}/plan`);
    }

    async postOverrides(id: string, patch: OverridePatch): Promise<OverrideResponse> {
        const res = await this.fetchImpl(`${this.base}/sessions/${id}/overrides`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(patch),
        });
        await raiseForStatus(res);
        return (await res.json()) as OverrideResponse;
    }
}
