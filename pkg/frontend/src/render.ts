// Software renderer: orbit camera, perspective projection, painter-sorted
// triangles for a 2D canvas, and screen-space picking. Colors arrive
// precomputed per facet; this module never classifies anything.

import type { ContactDocument, ContinuityDocument, MeshDocument, Rgb } from "./types.js";

export type Vec3 = [number, number, number];

export interface Camera {
    target: Vec3;
    distance: number;
    yawDeg: number;
    pitchDeg: number;
    fovDeg: number;
}

export interface Viewport {
    width: number;
    height: number;
}

export class MapPayloadError extends Error {
    constructor(message: string) {
        super(message);
        this.name = "MapPayloadError";
    }
}

const PITCH_LIMIT_DEG = 89;
const MIN_DISTANCE = 1e-3;

function deg2rad(d: number): number {
    return (d * Math.PI) / 180;
}

function sub(a: Vec3, b: Vec3): Vec3 {
    return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function dot(a: Vec3, b: Vec3): number {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: Vec3, b: Vec3): Vec3 {
    return [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
}

function normalize(a: Vec3): Vec3 {
    const n = Math.hypot(a[0], a[1], a[2]);
    if (n === 0) {
        return [0, 0, 1];
    }
    return [a[0] / n, a[1] / n, a[2] / n];
}

/** Frame a bounding box: look at its center from a comfortable distance. */
export function defaultCamera(bbox: [number[], number[]]): Camera {
    const [lo, hi] = bbox;
    const target: Vec3 = [
        ((lo[0] ?? 0) + (hi[0] ?? 0)) / 2,
        ((lo[1] ?? 0) + (hi[1] ?? 0)) / 2,
        ((lo[2] ?? 0) + (hi[2] ?? 0)) / 2,
    ];
    const span = Math.hypot(
        (hi[0] ?? 0) - (lo[0] ?? 0),
        (hi[1] ?? 0) - (lo[1] ?? 0),
        (hi[2] ?? 0) - (lo[2] ?? 0),
    );
    return {
        target,
        distance: Math.max(span * 1.6, MIN_DISTANCE),
        yawDeg: 35,
        pitchDeg: -30,
        fovDeg: 40,
    };
}

export function orbit(cam: Camera, dYawDeg: number, dPitchDeg: number): Camera {
    const pitch = Math.min(
        PITCH_LIMIT_DEG,
        Math.max(-PITCH_LIMIT_DEG, cam.pitchDeg + dPitchDeg),
    );
    let yaw = (cam.yawDeg + dYawDeg) % 360;
    if (yaw < 0) {
        yaw += 360;
    }
    return { ...cam, yawDeg: yaw, pitchDeg: pitch };
}

export function zoom(cam: Camera, factor: number): Camera {
    return { ...cam, distance: Math.max(cam.distance * factor, MIN_DISTANCE) };
}

export interface CameraBasis {
    eye: Vec3;
    right: Vec3;
    up: Vec3;
    forward: Vec3;
}

export function cameraBasis(cam: Camera): CameraBasis {
    const yaw = deg2rad(cam.yawDeg);
    const pitch = deg2rad(cam.pitchDeg);
    // Orbit around the mesh z axis; pitch tilts toward the tool axis.
    const dir: Vec3 = [
        Math.cos(pitch) * Math.cos(yaw),
        Math.cos(pitch) * Math.sin(yaw),
        Math.sin(pitch),
    ];
    const eye: Vec3 = [
        cam.target[0] - dir[0] * cam.distance,
        cam.target[1] - dir[1] * cam.distance,
        cam.target[2] - dir[2] * cam.distance,
    ];
    const forward = normalize(dir);
    const right = normalize(cross(forward, [0, 0, 1]));
    const up = cross(right, forward);
    return { eye, right, up, forward };
}

/** Shift the look-at target along the view plane (screen right and up). */
export function pan(cam: Camera, dxMm: number, dyMm: number): Camera {
    const { right, up } = cameraBasis(cam);
    return {
        ...cam,
        target: [
            cam.target[0] + right[0] * dxMm + up[0] * dyMm,
            cam.target[1] + right[1] * dxMm + up[1] * dyMm,
            cam.target[2] + right[2] * dxMm + up[2] * dyMm,
        ],
    };
}

export interface ProjectedPoint {
    x: number;
    y: number;
    depth: number;
}

export function projectPoint(p: Vec3, cam: Camera, viewport: Viewport): ProjectedPoint | null {
    const basis = cameraBasis(cam);
    const rel = sub(p, basis.eye);
    const depth = dot(rel, basis.forward);
    if (depth <= MIN_DISTANCE) {
        return null;
    }
    const focal = viewport.height / (2 * Math.tan(deg2rad(cam.fovDeg) / 2));
    const x = viewport.width / 2 + (dot(rel, basis.right) / depth) * focal;
    const y = viewport.height / 2 - (dot(rel, basis.up) / depth) * focal;
    return { x, y, depth };
}

export interface ScreenTriangle {
    facet: number;
    xs: [number, number, number];
    ys: [number, number, number];
    depth: number;
    fill: Rgb;
}

export interface Frame {
    // Sorted far to near so a canvas can paint them in order.
    triangles: ScreenTriangle[];
}

/**
 * Project every facet and sort back to front. Shading scales each facet's
 * color by its served normal against a fixed headlight.
 */
export function buildFrame(
    mesh: MeshDocument,
    colors: ReadonlyArray<Rgb>,
    cam: Camera,
    viewport: Viewport,
): Frame {
    if (colors.length !== mesh.facets.length) {
        throw new MapPayloadError(
            `map payload has ${colors.length} facet colors for ${mesh.facets.length} facets`,
        );
    }
    const basis = cameraBasis(cam);
    const focal = viewport.height / (2 * Math.tan(deg2rad(cam.fovDeg) / 2));
    const triangles: ScreenTriangle[] = [];
    for (let f = 0; f < mesh.facets.length; f += 1) {
        const facet = mesh.facets[f]!;
        const xs: number[] = [];
        const ys: number[] = [];
        let depthSum = 0;
        let behind = false;
        for (let k = 0; k < 3; k += 1) {
            const v = mesh.vertices[facet[k]!]!;
            const rel: Vec3 = [
                v[0]! - basis.eye[0],
                v[1]! - basis.eye[1],
                v[2]! - basis.eye[2],
            ];
            const depth = dot(rel, basis.forward);
            if (depth <= MIN_DISTANCE) {
                behind = true;
                break;
            }
            xs.push(viewport.width / 2 + (dot(rel, basis.right) / depth) * focal);
            ys.push(viewport.height / 2 - (dot(rel, basis.up) / depth) * focal);
            depthSum += depth;
        }
        if (behind) {
            continue;
        }
        const q = mesh.facet_normals_q16[f]!;
        const n: Vec3 = [q[0]! / 32767, q[1]! / 32767, q[2]! / 32767];
        // Headlight along the view direction, floor keeps faces readable.
        const lambert = Math.max(0, -dot(n, basis.forward));
        const shade = 0.45 + 0.55 * lambert;
        const base = colors[f]!;
        triangles.push({
            facet: f,
            xs: xs as [number, number, number],
            ys: ys as [number, number, number],
            depth: depthSum / 3,
            fill: [
                Math.round(base[0] * shade),
                Math.round(base[1] * shade),
                Math.round(base[2] * shade),
            ],
        });
    }
    triangles.sort((a, b) => b.depth - a.depth);
    return { triangles };
}

function inTriangle(px: number, py: number, xs: [number, number, number], ys: [number, number, number]): boolean {
    const s1 = (xs[1] - xs[0]) * (py - ys[0]) - (ys[1] - ys[0]) * (px - xs[0]);
    const s2 = (xs[2] - xs[1]) * (py - ys[1]) - (ys[2] - ys[1]) * (px - xs[1]);
    const s3 = (xs[0] - xs[2]) * (py - ys[2]) - (ys[0] - ys[2]) * (px - xs[2]);
    const hasNeg = s1 < 0 || s2 < 0 || s3 < 0;
    const hasPos = s1 > 0 || s2 > 0 || s3 > 0;
    return !(hasNeg && hasPos);
}

/** Facet under a screen point: topmost painted triangle that contains it. */
export function pickFacet(frame: Frame, x: number, y: number): number | null {
    for (let i = frame.triangles.length - 1; i >= 0; i -= 1) {
        const t = frame.triangles[i]!;
        if (inTriangle(x, y, t.xs, t.ys)) {
            return t.facet;
        }
    }
    return null;
}

/**
 * Contact map scalars, mirroring the core's export: omega clipped to
 * [0, 1], undercut facets pushed to the out-of-range color via null.
 */
export function contactScalars(doc: ContactDocument): Array<number | null> {
    return doc.per_facet.map((f) => {
        if (f.class === "undercut") {
            return null;
        }
        return Math.min(1, Math.max(0, f.omega));
    });
}

/**
 * Continuity map scalars for one direction: kappa where the facet is
 * in plane for that feed direction, out-of-range everywhere else.
 */
export function continuityScalars(doc: ContinuityDocument, directionDeg: number): Array<number | null> {
    const mask = doc.in_plane[String(directionDeg)];
    if (!mask) {
        throw new MapPayloadError(`no in-plane mask for direction ${directionDeg}`);
    }
    if (mask.length !== doc.kappa.length) {
        throw new MapPayloadError(
            `in-plane mask has ${mask.length} entries for ${doc.kappa.length} facets`,
        );
    }
    return doc.kappa.map((k, i) => (mask[i] ? k : null));
}
