// DOM wiring. Everything testable lives in the other modules; this file
// connects them to the page and the canvas.

import { ServiceError, StudioClient } from "./api.js";
import { featureColor, rgbCss, scalarToRgb } from "./colorscale.js";
import { buildFeatureCard, singleToolBody, toolOverrideBody, UNREACHABLE_NOTE } from "./inspector.js";
import { contactLegend } from "./legend.js";
import { planRows, planSummary } from "./plan.js";
import {
    buildFrame,
    contactScalars,
    continuityScalars,
    defaultCamera,
    MapPayloadError,
    orbit,
    pan,
    pickFacet,
    zoom,
    type Camera,
    type Frame,
} from "./render.js";
import { StudioStore } from "./state.js";
import type { MeshDocument, Rgb, ScaleDefinition, SessionSummary } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) {
        throw new Error(`missing element #${id}`);
    }
    return node as T;
}

const serviceBase = new URLSearchParams(location.search).get("service") ?? "/api";
const client = new StudioClient(serviceBase);
const store = new StudioStore(client);

const canvas = el<HTMLCanvasElement>("viewport");
const ctx = canvas.getContext("2d")!;
const legendBox = el<HTMLDivElement>("legend");
const banner = el<HTMLDivElement>("error-banner");
const busy = el<HTMLDivElement>("busy-indicator");
const statusLine = el<HTMLSpanElement>("status-line");
const inspectorBox = el<HTMLDivElement>("inspector");
const planPanel = el<HTMLDivElement>("plan-panel");
const planToggle = el<HTMLButtonElement>("plan-toggle");
const sliderDraft = el<HTMLInputElement>("slider-draft");
const sliderFlat = el<HTMLInputElement>("slider-flat");
const sliderDraftValue = el<HTMLSpanElement>("slider-draft-value");
const sliderFlatValue = el<HTMLSpanElement>("slider-flat-value");
const directionSelect = el<HTMLSelectElement>("direction-select");
const sessionSelect = el<HTMLSelectElement>("session-select");
const mapTabs = {
    contact: el<HTMLButtonElement>("map-tab-contact"),
    continuity: el<HTMLButtonElement>("map-tab-continuity"),
    features: el<HTMLButtonElement>("map-tab-features"),
};

let scaleDefinition: ScaleDefinition | null = null;
let mesh: MeshDocument | null = null;
let camera: Camera | null = null;
let lastFrame: Frame | null = null;
let renderQueued = false;

function requestRender(): void {
    if (renderQueued) {
        return;
    }
    renderQueued = true;
    requestAnimationFrame(() => {
        renderQueued = false;
        drawScene();
        renderPanels();
    });
}

function facetColors(): Rgb[] | null {
    const st = store.state;
    if (!mesh || !scaleDefinition) {
        return null;
    }
    if (st.activeMap.kind === "contact") {
        if (!st.displayedContact) {
            return null;
        }
        return scalarToRgb(contactScalars(st.displayedContact), scaleDefinition);
    }
    if (st.activeMap.kind === "continuity") {
        if (!st.continuity) {
            return null;
        }
        return scalarToRgb(
            continuityScalars(st.continuity, st.activeMap.directionDeg),
            scaleDefinition,
        );
    }
    if (!st.segmentation) {
        return null;
    }
    const selected = st.selectedFeatureId;
    return st.segmentation.facet_feature.map((fid) => {
        const base = fid >= 0
            ? featureColor(fid, scaleDefinition!)
            : ([...scaleDefinition!.out_of_range] as Rgb);
        if (selected !== null && fid === selected) {
            return [
                Math.round((base[0] + 255) / 2),
                Math.round((base[1] + 255) / 2),
                Math.round((base[2] + 255) / 2),
            ] as Rgb;
        }
        return base;
    });
}

function drawScene(): void {
    const dpr = window.devicePixelRatio || 1;
    const w = canvas.clientWidth;
    const h = canvas.clientHeight;
    if (canvas.width !== w * dpr || canvas.height !== h * dpr) {
        canvas.width = w * dpr;
        canvas.height = h * dpr;
    }
    ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
    ctx.clearRect(0, 0, w, h);
    if (!mesh || !camera) {
        lastFrame = null;
        return;
    }
    const colors = facetColors();
    if (!colors) {
        lastFrame = null;
        return;
    }
    try {
        lastFrame = buildFrame(mesh, colors, camera, { width: w, height: h });
    } catch (err) {
        if (err instanceof MapPayloadError) {
            // Stale frame stays on screen; only the banner reports it.
            store.setErrorBanner(err.message);
            return;
        }
        throw err;
    }
    for (const t of lastFrame.triangles) {
        ctx.beginPath();
        ctx.moveTo(t.xs[0], t.ys[0]);
        ctx.lineTo(t.xs[1], t.ys[1]);
        ctx.lineTo(t.xs[2], t.ys[2]);
        ctx.closePath();
        ctx.fillStyle = rgbCss(t.fill);
        ctx.fill();
    }
}

function renderLegend(): void {
    const st = store.state;
    if (st.activeMap.kind === "contact" && st.displayedContact && scaleDefinition) {
        const model = contactLegend(st.displayedContact, scaleDefinition);
        const rows = model.rows.map((r) => `
            <tr>
                <td><span class="swatch" style="background:${rgbCss(r.swatch)}"></span> ${r.cls}</td>
                <td class="muted">${r.rangeText}</td>
                <td class="num">${r.count}</td>
                <td class="num">${r.areaMm2.toFixed(1)} mm2</td>
            </tr>`).join("");
        legendBox.innerHTML = `<table>${rows}</table>`;
        legendBox.style.display = "block";
        return;
    }
    if (st.activeMap.kind === "continuity" && st.continuity) {
        legendBox.innerHTML = `<span class="muted">kappa where in plane for ` +
            `${st.activeMap.directionDeg} deg; gray facets are out of plane</span>`;
        legendBox.style.display = "block";
        return;
    }
    if (st.activeMap.kind === "features" && st.segmentation && scaleDefinition) {
        const rows = st.segmentation.features.map((f) => `
            <tr data-feature="${f.id}">
                <td><span class="swatch" style="background:${rgbCss(featureColor(f.id, scaleDefinition!))}"></span>
                    feature ${f.id}</td>
                <td class="muted">${f.class}</td>
                <td class="num">${f.facet_ids.length}</td>
            </tr>`).join("");
        legendBox.innerHTML = `<table>${rows}</table>`;
        legendBox.style.display = "block";
        return;
    }
    legendBox.style.display = "none";
}

function renderInspector(): void {
    const st = store.state;
    if (st.selectedFeatureId === null || !st.segmentation) {
        inspectorBox.innerHTML = `<span class="muted">click the model to select a feature</span>`;
        return;
    }
    let card;
    try {
        card = buildFeatureCard(st.selectedFeatureId, st.segmentation, st.plan);
    } catch {
        inspectorBox.innerHTML = `<span class="muted">feature ${st.selectedFeatureId} not in the current segmentation</span>`;
        return;
    }
    const dirText = card.detectedDirectionDeg === null
        ? "none"
        : `${card.detectedDirectionDeg} deg`;
    const toolLine = card.reachability === UNREACHABLE_NOTE
        ? `<dd class="warn">${UNREACHABLE_NOTE}</dd>`
        : `<dd>${card.toolId ?? "(open the plan to bind tools)"}</dd>`;
    const check = card.toolCheck;
    const checkLine = check
        ? `<dt>reach check</dt><dd>
            <span class="${check.toolLengthOk ? "ok" : "warn"}">TL ${check.toolLengthMm} >= depth ${check.depthFromTopMm}</span><br>
            <span class="${check.overallLengthOk ? "ok" : "warn"}">OL ${check.overallLengthMm} >= depth + clearance</span>
        </dd>`
        : "";
    inspectorBox.innerHTML = `
        <dl class="kv">
            <dt>feature</dt><dd>${card.featureId}</dd>
            <dt>class</dt><dd>${card.contactClass}</dd>
            <dt>continuity</dt><dd>${card.continuityKind}</dd>
            <dt>direction</dt><dd>${dirText}</dd>
            <dt>depth</dt><dd>${card.depthFromTopMm.toFixed(3)} mm</dd>
            <dt>area</dt><dd>${card.areaMm2.toFixed(1)} mm2</dd>
            <dt>tool</dt>${toolLine}
            ${checkLine}
            <dt>strategy</dt><dd>${card.strategy ? card.strategy.feed_kind : "n/a"}</dd>
            <dt>pitch</dt><dd>${card.pitchMm === null ? "n/a" : card.pitchMm.toFixed(4) + " mm"}</dd>
        </dl>
        <div class="row" id="override-row"></div>
        <div class="row" id="override-actions"></div>`;
    const overrideRow = el<HTMLDivElement>("override-row");
    if (st.plan && card.reachability !== UNREACHABLE_NOTE) {
        const select = document.createElement("select");
        for (const tool of st.plan.tool_library) {
            const opt = document.createElement("option");
            opt.value = tool.id;
            opt.textContent = `${tool.id} (${tool.tip_type})`;
            if (tool.id === card.toolId) {
                opt.selected = true;
            }
            select.appendChild(opt);
        }
        const queueBtn = document.createElement("button");
        queueBtn.type = "button";
        queueBtn.textContent = "queue tool override";
        queueBtn.addEventListener("click", () => {
            store.queueOverride(toolOverrideBody(card.featureId, select.value));
        });
        const singleBtn = document.createElement("button");
        singleBtn.type = "button";
        singleBtn.textContent = "single tool: corner";
        singleBtn.addEventListener("click", () => {
            store.queueOverride(singleToolBody("corner-only"));
        });
        overrideRow.append(select, queueBtn, singleBtn);
    }
    const actions = el<HTMLDivElement>("override-actions");
    const pendingKeys = Object.keys(st.pendingOverrides);
    if (pendingKeys.length > 0) {
        const note = document.createElement("span");
        note.className = "muted";
        note.textContent = `pending: ${JSON.stringify(st.pendingOverrides)}`;
        const apply = document.createElement("button");
        apply.type = "button";
        apply.textContent = "apply overrides";
        apply.addEventListener("click", () => {
            void store.applyOverrides();
        });
        const discard = document.createElement("button");
        discard.type = "button";
        discard.textContent = "discard";
        discard.addEventListener("click", () => store.clearPendingOverrides());
        actions.append(note, apply, discard);
    }
}

function renderPlanPanel(): void {
    const st = store.state;
    planToggle.textContent = st.planPanelOpen ? "hide plan" : "show plan";
    planPanel.classList.toggle("open", st.planPanelOpen);
    if (!st.planPanelOpen) {
        return;
    }
    if (!st.plan) {
        planPanel.innerHTML = `<span class="muted">loading plan...</span>`;
        return;
    }
    const summary = planSummary(st.plan);
    const rows = planRows(st.plan).map((r) => `
        <tr class="${r.toolChange ? "tool-change" : ""}" data-feature="${r.featureId}">
            <td>${r.position}</td>
            <td>${r.sequenceId}</td>
            <td>${r.featureId}</td>
            <td>${r.toolId}</td>
            <td>${r.feedKind}${r.directionDeg === null ? "" : " @ " + r.directionDeg}</td>
            <td class="num">${r.pitchMm.toFixed(3)}</td>
            <td class="num">${r.machiningLengthMm.toFixed(0)}</td>
        </tr>`).join("");
    const warnings = summary.warnings.length
        ? `<div class="warnings">${summary.warnings.map((w) => `<div>warning: ${w}</div>`).join("")}</div>`
        : "";
    planPanel.innerHTML = `
        <div class="muted">${summary.sequenceCount} sequences, ${summary.toolChangeCount} tool changes,
            ${summary.totalMachiningLengthMm.toFixed(1)} mm total</div>
        ${warnings}
        <table>
            <thead><tr><th>#</th><th>seq</th><th>feat</th><th>tool</th><th>strategy</th><th>pitch</th><th>length</th></tr></thead>
            <tbody>${rows}</tbody>
        </table>`;
    planPanel.querySelectorAll("tbody tr").forEach((tr) => {
        tr.addEventListener("click", () => {
            const fid = Number((tr as HTMLTableRowElement).dataset["feature"]);
            void store.ensureSegmentation().then(() => store.selectFeature(fid));
        });
    });
}

function renderPanels(): void {
    const st = store.state;
    banner.textContent = st.errorBanner ?? "";
    banner.classList.toggle("visible", st.errorBanner !== null);
    busy.classList.toggle("visible", st.busy);
    sliderDraft.value = String(st.tauDraft);
    sliderFlat.value = String(st.tauFlat);
    sliderDraftValue.textContent = st.tauDraft.toFixed(2);
    sliderFlatValue.textContent = st.tauFlat.toFixed(2);
    for (const [kind, button] of Object.entries(mapTabs)) {
        button.classList.toggle("active", st.activeMap.kind === kind);
    }
    directionSelect.disabled = st.activeMap.kind !== "continuity";
    if (st.continuity && directionSelect.options.length !== st.continuity.directions_deg.length) {
        directionSelect.innerHTML = "";
        for (const d of st.continuity.directions_deg) {
            const opt = document.createElement("option");
            opt.value = String(d);
            opt.textContent = `${d} deg`;
            directionSelect.appendChild(opt);
        }
    }
    if (st.session) {
        statusLine.textContent =
            `${st.session.name} (${st.session.facet_count} facets, rev ${st.session.revision})`;
    } else {
        statusLine.textContent = "no session open";
    }
    renderLegend();
    renderInspector();
    renderPlanPanel();
}

async function refreshSessionList(selected?: string): Promise<void> {
    try {
        const sessions = await client.listSessions();
        sessionSelect.innerHTML = `<option value="">(no session)</option>`;
        for (const s of sessions) {
            const opt = document.createElement("option");
            opt.value = s.session_id;
            opt.textContent = `${s.name} (${s.facet_count})`;
            if (s.session_id === selected) {
                opt.selected = true;
            }
            sessionSelect.appendChild(opt);
        }
    } catch (err) {
        store.setErrorBanner(err instanceof Error ? err.message : String(err));
    }
}

async function openSession(summary: SessionSummary): Promise<void> {
    mesh = null;
    camera = null;
    await store.openSession(summary);
    try {
        mesh = await client.mesh(summary.session_id);
        camera = defaultCamera(mesh.diagnostics.bounding_box);
    } catch (err) {
        store.setErrorBanner(err instanceof Error ? err.message : String(err));
    }
    requestRender();
}

el<HTMLInputElement>("upload-input").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) {
        return;
    }
    try {
        const summary = await client.createSession(
            file.name.replace(/\.stl$/i, ""),
            await file.arrayBuffer(),
        );
        await refreshSessionList(summary.session_id);
        await openSession(summary);
    } catch (err) {
        store.setErrorBanner(
            err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err),
        );
    } finally {
        input.value = "";
    }
});

sessionSelect.addEventListener("change", async () => {
    const id = sessionSelect.value;
    if (!id) {
        return;
    }
    try {
        await openSession(await client.session(id));
    } catch (err) {
        store.setErrorBanner(err instanceof Error ? err.message : String(err));
    }
});

el<HTMLButtonElement>("refresh-sessions").addEventListener("click", () => {
    void refreshSessionList(store.state.session?.session_id);
});

sliderDraft.addEventListener("input", () => store.setTauDraft(Number(sliderDraft.value)));
sliderFlat.addEventListener("input", () => store.setTauFlat(Number(sliderFlat.value)));

mapTabs.contact.addEventListener("click", () => void store.setActiveMap({ kind: "contact" }));
mapTabs.continuity.addEventListener("click", () => {
    const d = Number(directionSelect.value || "0");
    void store.setActiveMap({ kind: "continuity", directionDeg: d });
});
mapTabs.features.addEventListener("click", () => void store.setActiveMap({ kind: "features" }));
directionSelect.addEventListener("change", () => {
    if (store.state.activeMap.kind === "continuity") {
        void store.setActiveMap({
            kind: "continuity",
            directionDeg: Number(directionSelect.value),
        });
    }
});

planToggle.addEventListener("click", () => store.togglePlanPanel());

// Orbit on drag, pan with shift, wheel to zoom, click to pick.
let dragging = false;
let dragMoved = 0;
let lastX = 0;
let lastY = 0;

canvas.addEventListener("pointerdown", (ev) => {
    dragging = true;
    dragMoved = 0;
    lastX = ev.clientX;
    lastY = ev.clientY;
    canvas.classList.add("dragging");
    canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
    if (!dragging || !camera) {
        return;
    }
    const dx = ev.clientX - lastX;
    const dy = ev.clientY - lastY;
    lastX = ev.clientX;
    lastY = ev.clientY;
    dragMoved += Math.abs(dx) + Math.abs(dy);
    if (ev.shiftKey) {
        const scale = camera.distance / canvas.clientHeight;
        camera = pan(camera, -dx * scale, dy * scale);
    } else {
        camera = orbit(camera, -dx * 0.4, -dy * 0.4);
    }
    requestRender();
});
canvas.addEventListener("pointerup", (ev) => {
    canvas.classList.remove("dragging");
    if (!dragging) {
        return;
    }
    dragging = false;
    if (dragMoved > 4 || !lastFrame) {
        return;
    }
    const rect = canvas.getBoundingClientRect();
    const facet = pickFacet(lastFrame, ev.clientX - rect.left, ev.clientY - rect.top);
    if (facet !== null) {
        void store.ensureSegmentation().then(() => {
            store.selectFacet(facet);
        });
    }
});
canvas.addEventListener("wheel", (ev) => {
    if (!camera) {
        return;
    }
    ev.preventDefault();
    camera = zoom(camera, ev.deltaY > 0 ? 1.12 : 1 / 1.12);
    requestRender();
}, { passive: false });

window.addEventListener("resize", requestRender);
store.subscribe(requestRender);

async function boot(): Promise<void> {
    try {
        scaleDefinition = await client.colorscale();
    } catch (err) {
        store.setErrorBanner(
            `cannot reach the analysis service at ${serviceBase}: ` +
            (err instanceof Error ? err.message : String(err)),
        );
        return;
    }
    await refreshSessionList();
    requestRender();
}

void boot();
