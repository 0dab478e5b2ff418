/**
 * Client for the mitodg worker: exposes the three hot-path operations
 * (augment, samplePatch, optimizeThreshold) to training-loop code.
 *
 * Image buffers are exchanged as raw (height, width, 3) uint8 bytes with no
 * re-encoding on either side; the subprocess pipe is the only copy the host
 * permits. Results are bit-identical to direct in-process library calls
 * with the same seed.
 */

import { existsSync, mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { Frame } from "./protocol.js";
import { WorkerOptions, WorkerProcess } from "./worker.js";

export type Category = "mitotic_figure" | "imposter";

export interface AnnotationRecord {
    id: number;
    image_id: number;
    bbox: [number, number, number, number];
    center?: [number, number];
    category: Category;
}

export interface DetectionRecord {
    image_id: number;
    cx: number;
    cy: number;
    x_min: number;
    y_min: number;
    x_max: number;
    y_max: number;
    label: Category;
    confidence: number;
}

/** Plain mapping mirroring the policy config schema. */
export interface PolicyMapping {
    pool?: string[];
    max_strength?: number;
    flip_h_prob?: number;
    flip_v_prob?: number;
    channel_permute?: boolean;
}

export interface AugmentationLog {
    flipped_h: boolean;
    flipped_v: boolean;
    channel_perm: [number, number, number];
    chosen: string;
    strength: number;
    inner_draws: [string, number][];
}

export interface AugmentResult {
    image: Buffer;
    width: number;
    height: number;
    boxes: AnnotationRecord[];
    log: AugmentationLog;
    /** Worker-side compute time, excluding the boundary. */
    computeNs: number;
}

export interface PatchSpecMapping {
    size?: number;
    require_full_annotation?: boolean;
    stratify_classes?: boolean;
}

export interface SamplePatchResult {
    image: Buffer;
    width: number;
    height: number;
    annotations: AnnotationRecord[];
    provenance: {
        image_id: number;
        annotation_id: number;
        origin: [number, number];
        skipped_images: number[];
    };
}

export interface EvalReport {
    tp: number;
    fp: number;
    fn: number;
    precision: number;
    recall: number;
    f1: number;
    threshold: number;
}

export class PolicyParseError extends Error {}
export class ShapeError extends Error {}
export class WorkerError extends Error {
    constructor(readonly code: string, message: string) {
        super(message);
    }
}

function throwTyped(header: Record<string, unknown>): never {
    const code = String(header.error ?? "WorkerError");
    const message = String(header.message ?? "worker call failed");
    if (code === "PolicyParseError") {
        throw new PolicyParseError(message);
    }
    if (code === "ShapeError") {
        throw new ShapeError(message);
    }
    throw new WorkerError(code, message);
}

function unwrap(frame: Frame): Record<string, unknown> {
    if (!frame.header.ok) {
        throwTyped(frame.header);
    }
    return frame.header;
}

export class MitodgClient {
    private constructor(
        private worker: WorkerProcess,
        private scratchDir: string | null,
        private ownsScratch: boolean,
    ) {}

    /**
     * Spawn a worker and wait until it answers a ping. Unless disabled by
     * passing scratchDir: "", a tmpfs scratch directory is negotiated so
     * image payloads come back in one read.
     */
    static async start(options: WorkerOptions = {}): Promise<MitodgClient> {
        let scratch = options.scratchDir ?? null;
        let owns = false;
        if (scratch === null) {
            const base = existsSync("/dev/shm") ? "/dev/shm" : tmpdir();
            scratch = mkdtempSync(join(base, "mitodg-"));
            owns = true;
        } else if (scratch === "") {
            scratch = null;
        }
        const worker = new WorkerProcess({ ...options, scratchDir: scratch ?? undefined });
        const client = new MitodgClient(worker, scratch, owns);
        await client.ping();
        return client;
    }

    async ping(): Promise<string> {
        const request: Record<string, unknown> = { op: "ping" };
        if (this.scratchDir !== null) {
            request.scratch = this.scratchDir;
        }
        const header = unwrap(await this.worker.request(request));
        return String(header.version);
    }

    /**
     * Run the single-draw augmentation pipeline on a (height, width, 3)
     * uint8 buffer. Byte-identical to the native library for the same seed.
     */
    async augment(
        image: Uint8Array,
        width: number,
        height: number,
        boxes: AnnotationRecord[],
        policy: PolicyMapping,
        seed: number,
    ): Promise<AugmentResult> {
        if (image.byteLength !== width * height * 3) {
            throw new ShapeError(
                `buffer is ${image.byteLength} bytes, expected ${width}x${height}x3 = ${width * height * 3}`,
            );
        }
        const frame = await this.worker.request(
            { op: "augment", seed, width, height, boxes, policy },
            image,
        );
        const header = unwrap(frame);
        return {
            image: frame.payload,
            width: Number(header.width),
            height: Number(header.height),
            boxes: header.boxes as AnnotationRecord[],
            log: header.log as unknown as AugmentationLog,
            computeNs: Number(header.compute_ns),
        };
    }

    /** Draw one annotation-centered training patch from a manifest. */
    async samplePatch(
        manifestPath: string,
        split: number[],
        seed: number,
        spec: PatchSpecMapping = {},
    ): Promise<SamplePatchResult> {
        const frame = await this.worker.request({
            op: "sample_patch",
            manifest: manifestPath,
            split,
            seed,
            spec,
        });
        const header = unwrap(frame);
        return {
            image: frame.payload,
            width: Number(header.width),
            height: Number(header.height),
            annotations: header.annotations as AnnotationRecord[],
            provenance: header.provenance as SamplePatchResult["provenance"],
        };
    }

    /** Exact best-F1 confidence threshold for a detection set. */
    async optimizeThreshold(
        detections: DetectionRecord[],
        groundTruth: AnnotationRecord[],
        radius = 30.0,
    ): Promise<EvalReport> {
        const frame = await this.worker.request({
            op: "optimize_threshold",
            detections,
            ground_truth: groundTruth,
            radius,
        });
        return unwrap(frame).report as unknown as EvalReport;
    }

    async close(): Promise<void> {
        await this.worker.shutdown();
        if (this.ownsScratch && this.scratchDir !== null) {
            rmSync(this.scratchDir, { recursive: true, force: true });
        }
    }
}

export { WorkerOptions } from "./worker.js";
