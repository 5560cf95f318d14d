// Studio state. One store owns the session, the slider thresholds, the
// displayed documents, the override queue and the plan panel. All domain
// values round-trip through the service; the store only decides when to
// fetch and which response is current.

import { ServiceError } from "./api.js";
import type {
    ContactDocument,
    ContinuityDocument,
    OverridePatch,
    OverrideResponse,
    PlanDocument,
    SegmentationDocument,
    SessionSummary,
} from "./types.js";

export type ActiveMap =
    | { kind: "contact" }
    | { kind: "continuity"; directionDeg: number }
    | { kind: "features" };

// The slice of the HTTP client the store depends on; tests substitute it.
export interface MapService {
    contactMap(
        id: string,
        query?: { tauDraft?: number; tauFlat?: number },
        signal?: AbortSignal,
    ): Promise<ContactDocument>;
    continuity(id: string, directions?: string, signal?: AbortSignal): Promise<ContinuityDocument>;
    segmentation(id: string): Promise<SegmentationDocument>;
    plan(id: string): Promise<PlanDocument>;
    postOverrides(id: string, patch: OverridePatch): Promise<OverrideResponse>;
}

export interface Scheduler {
    schedule(fn: () => void, ms: number): unknown;
    cancel(handle: unknown): void;
}

const defaultScheduler: Scheduler = {
    schedule: (fn, ms) => setTimeout(fn, ms),
    cancel: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export const DEBOUNCE_MS = 300;

// Smallest slider increment; the clamp keeps tau_draft < tau_flat by at
// least this much, so the moved slider can never cross the other one.
export const SLIDER_STEP = 0.01;

export interface StudioState {
    session: SessionSummary | null;
    activeMap: ActiveMap;
    tauDraft: number;
    tauFlat: number;
    displayedContact: ContactDocument | null;
    continuity: ContinuityDocument | null;
    segmentation: SegmentationDocument | null;
    plan: PlanDocument | null;
    selectedFeatureId: number | null;
    pendingOverrides: OverridePatch;
    planPanelOpen: boolean;
    errorBanner: string | null;
    busy: boolean;
}

function isAbort(err: unknown): boolean {
    return err instanceof Error && err.name === "AbortError";
}

function errorText(err: unknown): string {
    if (err instanceof ServiceError) {
        return `${err.code}: ${err.message}`;
    }
    return err instanceof Error ? err.message : String(err);
}

/** Deep-merge an override patch into the pending queue. */
export function mergePatch(pending: OverridePatch, patch: OverridePatch): OverridePatch {
    const out: OverridePatch = { ...pending };
    for (const [key, value] of Object.entries(patch)) {
        const prev = out[key];
        if (
            value !== null && typeof value === "object" && !Array.isArray(value) &&
            prev !== null && typeof prev === "object" && !Array.isArray(prev)
        ) {
            out[key] = { ...(prev as object), ...(value as object) };
        } else {
            out[key] = value;
        }
    }
    return out;
}

export class StudioStore {
    readonly state: StudioState;

    private readonly service: MapService;
    private readonly scheduler: Scheduler;
    private readonly debounceMs: number;
    private readonly listeners = new Set<() => void>();

    private debounceHandle: unknown = null;
    private fetchSeq = 0;
    private inflightController: AbortController | null = null;
    private inflight: Promise<void> | null = null;

    constructor(service: MapService, opts?: { scheduler?: Scheduler; debounceMs?: number }) {
        this.service = service;
        this.scheduler = opts?.scheduler ?? defaultScheduler;
        this.debounceMs = opts?.debounceMs ?? DEBOUNCE_MS;
        this.state = {
            session: null,
            activeMap: { kind: "contact" },
            tauDraft: 0.15,
            tauFlat: 0.8,
            displayedContact: null,
            continuity: null,
            segmentation: null,
            plan: null,
            selectedFeatureId: null,
            pendingOverrides: {},
            planPanelOpen: false,
            errorBanner: null,
            busy: false,
        };
    }

    subscribe(listener: () => void): () => void {
        this.listeners.add(listener);
        return () => this.listeners.delete(listener);
    }

    private notify(): void {
        for (const listener of this.listeners) {
            listener();
        }
    }

    /** Resolves when the most recent scheduled or running fetch settles. */
    idle(): Promise<void> {
        return this.inflight ?? Promise.resolve();
    }

    private sessionId(): string {
        const s = this.state.session;
        if (!s) {
            throw new Error("no session open");
        }
        return s.session_id;
    }

    /**
     * Open a session and take the initial thresholds from the service's
     * first contact map response, so the sliders start on stored values.
     */
    async openSession(summary: SessionSummary): Promise<void> {
        this.fetchSeq += 1;
        this.inflightController?.abort();
        this.inflightController = null;
        const st = this.state;
        st.session = summary;
        st.activeMap = { kind: "contact" };
        st.displayedContact = null;
        st.continuity = null;
        st.segmentation = null;
        st.plan = null;
        st.selectedFeatureId = null;
        st.pendingOverrides = {};
        st.errorBanner = null;
        this.notify();
        try {
            const doc = await this.service.contactMap(summary.session_id);
            st.tauDraft = doc.config.tau_draft;
            st.tauFlat = doc.config.tau_flat;
            st.displayedContact = doc;
        } catch (err) {
            st.errorBanner = errorText(err);
        }
        this.notify();
    }

    setTauDraft(value: number): void {
        let v = Math.min(Math.max(value, 0), 1);
        if (v >= this.state.tauFlat) {
            v = this.state.tauFlat - SLIDER_STEP;
        }
        if (v !== this.state.tauDraft) {
            this.state.tauDraft = v;
            this.scheduleContactRefresh();
            this.notify();
        }
    }

    setTauFlat(value: number): void {
        let v = Math.min(Math.max(value, 0), 1);
        if (v <= this.state.tauDraft) {
            v = this.state.tauDraft + SLIDER_STEP;
        }
        if (v !== this.state.tauFlat) {
            this.state.tauFlat = v;
            this.scheduleContactRefresh();
            this.notify();
        }
    }

    private scheduleContactRefresh(): void {
        if (this.debounceHandle !== null) {
            this.scheduler.cancel(this.debounceHandle);
        }
        this.debounceHandle = this.scheduler.schedule(() => {
            this.debounceHandle = null;
            this.inflight = this.refreshContact();
        }, this.debounceMs);
    }

    /**
     * Fetch the contact map for the current sliders. A newer request wins:
     * the previous in-flight fetch is aborted and its late response, if it
     * arrives anyway, is dropped.
     */
    async refreshContact(): Promise<void> {
        const seq = ++this.fetchSeq;
        this.inflightController?.abort();
        const controller = new AbortController();
        this.inflightController = controller;
        const st = this.state;
        st.busy = true;
        this.notify();
        try {
            const doc = await this.service.contactMap(
                this.sessionId(),
                { tauDraft: st.tauDraft, tauFlat: st.tauFlat },
                controller.signal,
            );
            if (seq !== this.fetchSeq) {
                return;
            }
            st.displayedContact = doc;
            st.errorBanner = null;
        } catch (err) {
            if (seq !== this.fetchSeq || isAbort(err)) {
                return;
            }
            // Keep the stale map on screen; only the banner changes.
            st.errorBanner = errorText(err);
        } finally {
            if (seq === this.fetchSeq) {
                st.busy = false;
                this.notify();
            }
        }
    }

    async setActiveMap(map: ActiveMap): Promise<void> {
        this.state.activeMap = map;
        this.notify();
        if (map.kind === "continuity") {
            await this.ensureContinuity();
        } else if (map.kind === "features") {
            await this.ensureSegmentation();
        }
    }

    async ensureContinuity(): Promise<ContinuityDocument | null> {
        if (this.state.continuity) {
            return this.state.continuity;
        }
        try {
            this.state.continuity = await this.service.continuity(this.sessionId());
            this.state.errorBanner = null;
        } catch (err) {
            this.state.errorBanner = errorText(err);
        }
        this.notify();
        return this.state.continuity;
    }

    async ensureSegmentation(): Promise<SegmentationDocument | null> {
        if (this.state.segmentation) {
            return this.state.segmentation;
        }
        try {
            this.state.segmentation = await this.service.segmentation(this.sessionId());
            this.state.errorBanner = null;
        } catch (err) {
            this.state.errorBanner = errorText(err);
        }
        this.notify();
        return this.state.segmentation;
    }

    async ensurePlan(): Promise<PlanDocument | null> {
        if (this.state.plan) {
            return this.state.plan;
        }
        try {
            this.state.plan = await this.service.plan(this.sessionId());
            this.state.errorBanner = null;
        } catch (err) {
            this.state.errorBanner = errorText(err);
        }
        this.notify();
        return this.state.plan;
    }

    selectFeature(featureId: number | null): void {
        this.state.selectedFeatureId = featureId;
        this.notify();
    }

    /** Resolve a picked facet to its feature via the served lookup table. */
    selectFacet(facetIndex: number): void {
        const seg = this.state.segmentation;
        if (!seg) {
            return;
        }
        const fid = seg.facet_feature[facetIndex];
        this.selectFeature(fid === undefined || fid < 0 ? null : fid);
    }

    queueOverride(patch: OverridePatch): void {
        this.state.pendingOverrides = mergePatch(this.state.pendingOverrides, patch);
        this.notify();
    }

    clearPendingOverrides(): void {
        this.state.pendingOverrides = {};
        this.notify();
    }

    togglePlanPanel(): void {
        this.state.planPanelOpen = !this.state.planPanelOpen;
        this.notify();
        if (this.state.planPanelOpen) {
            void this.ensurePlan();
        }
    }

    setErrorBanner(message: string | null): void {
        this.state.errorBanner = message;
        this.notify();
    }

    /**
     * Post the queued overrides, then re-fetch every document the change
     * can invalidate. Sliders resync to the stored thresholds the service
     * echoes back, so the displayed map and the plan share one config.
     */
    async applyOverrides(): Promise<boolean> {
        const st = this.state;
        if (Object.keys(st.pendingOverrides).length === 0) {
            return false;
        }
        st.busy = true;
        this.notify();
        try {
            const resp = await this.service.postOverrides(this.sessionId(), st.pendingOverrides);
            st.pendingOverrides = {};
            if (st.session) {
                st.session = { ...st.session, revision: resp.revision };
            }
            const draft = resp.config["tau_draft"];
            const flat = resp.config["tau_flat"];
            if (typeof draft === "number" && typeof flat === "number") {
                st.tauDraft = draft;
                st.tauFlat = flat;
            }
            st.errorBanner = null;
            st.segmentation = null;
            st.plan = null;
            const sid = this.sessionId();
            const [contact, segmentation, plan] = await Promise.all([
                this.service.contactMap(sid, { tauDraft: st.tauDraft, tauFlat: st.tauFlat }),
                this.service.segmentation(sid),
                this.service.plan(sid),
            ]);
            st.displayedContact = contact;
            st.segmentation = segmentation;
            st.plan = plan;
            st.continuity = null;
            return true;
        } catch (err) {
            // A rejected patch leaves the queue intact for correction.
            st.errorBanner = errorText(err);
            return false;
        } finally {
            st.busy = false;
            this.notify();
        }
    }
}
