// Shared test plumbing: fixture loading, a manual clock that stands in for
// setTimeout, deferred promises, and a strict fake of the service surface.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import type { MapService, Scheduler } from "../src/state.js";

const fixturesDir = fileURLToPath(new URL("./fixtures", import.meta.url));

// Every fixture is a verbatim service response captured by
// fixtures/capture.py; re-run that script after changing the service.
export function fixture<T>(name: string): T {
    return JSON.parse(readFileSync(join(fixturesDir, name), "utf8")) as T;
}

export function jsonResponse(doc: unknown, status = 200): Response {
    return new Response(JSON.stringify(doc), {
        status,
        headers: { "content-type": "application/json" },
    });
}

export interface TestClock extends Scheduler {
    advance(ms: number): void;
    pendingCount(): number;
}

export function makeClock(): TestClock {
    let now = 0;
    let nextId = 1;
    const tasks = new Map<number, { at: number; fn: () => void }>();
    return {
        schedule(fn, ms) {
            const id = nextId;
            nextId += 1;
            tasks.set(id, { at: now + ms, fn });
            return id;
        },
        cancel(handle) {
            tasks.delete(handle as number);
        },
        advance(ms) {
            now += ms;
            const due = [...tasks.entries()]
                .filter(([, t]) => t.at <= now)
                .sort((a, b) => a[1].at - b[1].at);
            for (const [id, task] of due) {
                tasks.delete(id);
                task.fn();
            }
        },
        pendingCount: () => tasks.size,
    };
}

export interface Deferred<T> {
    promise: Promise<T>;
    resolve: (value: T) => void;
    reject: (err: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
    let resolve!: (value: T) => void;
    let reject!: (err: unknown) => void;
    const promise = new Promise<T>((res, rej) => {
        resolve = res;
        reject = rej;
    });
    return { promise, resolve, reject };
}

/** Service fake whose unimplemented methods fail loudly. */
export function fakeService(partial: Partial<MapService>): MapService {
    const missing = (name: string) => () => {
        throw new Error(`unexpected service call: ${name}`);
    };
    return {
        contactMap: partial.contactMap ?? missing("contactMap"),
        continuity: partial.continuity ?? missing("continuity"),
        segmentation: partial.segmentation ?? missing("segmentation"),
        plan: partial.plan ?? missing("plan"),
        postOverrides: partial.postOverrides ?? missing("postOverrides"),
    };
}

/** Let queued microtasks (settled promise callbacks) run. */
export function flushMicrotasks(): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, 0));
}
