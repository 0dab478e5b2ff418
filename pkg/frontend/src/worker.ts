/**
 * Lifecycle and request/response plumbing for one worker subprocess.
 *
 * The protocol is strictly request -> response, so calls are queued and
 * dispatched one at a time; the worker itself is single-threaded. Spawn
 * several workers for parallelism.
 */

import { ChildProcess, spawn } from "node:child_process";
import { readFileSync, unlinkSync } from "node:fs";
import { basename, join } from "node:path";

import { encodeHeader, Frame, FrameParser } from "./protocol.js";

export interface WorkerOptions {
    /** Command to start the worker (default: python3 -m mitodg.cli serve). */
    command?: string;
    args?: string[];
    env?: NodeJS.ProcessEnv;
    /**
     * Writable directory (ideally tmpfs) for large response payloads; the
     * worker deposits files there and the client collects them with a
     * single read instead of draining the pipe chunk by chunk.
     */
    scratchDir?: string;
}

interface Pending {
    resolve: (frame: Frame) => void;
    reject: (err: Error) => void;
}

export class WorkerProcess {
    private child: ChildProcess;
    private parser = new FrameParser();
    private pending: Pending[] = [];
    private exited = false;
    readonly scratchDir: string | null;

    constructor(options: WorkerOptions = {}) {
        const command = options.command ?? "python3";
        const args = options.args ?? ["-m", "mitodg.cli", "serve"];
        this.scratchDir = options.scratchDir ?? null;
        this.child = spawn(command, args, {
            stdio: ["pipe", "pipe", "inherit"],
            env: options.env ?? process.env,
        });
        this.child.stdout!.on("data", (chunk: Buffer) => {
            for (const frame of this.parser.feed(chunk)) {
                const waiter = this.pending.shift();
                if (waiter) {
                    waiter.resolve(this.materialize(frame));
                }
            }
        });
        this.child.on("exit", (code) => {
            this.exited = true;
            const err = new Error(`worker exited with code ${code}`);
            for (const waiter of this.pending.splice(0)) {
                waiter.reject(err);
            }
        });
        this.child.on("error", (err) => {
            this.exited = true;
            for (const waiter of this.pending.splice(0)) {
                waiter.reject(err);
            }
        });
    }

    /** Swap a payload_file reference for the file's bytes. */
    private materialize(frame: Frame): Frame {
        const file = frame.header.payload_file;
        if (typeof file !== "string" || this.scratchDir === null) {
            return frame;
        }
        const path = join(this.scratchDir, basename(file));
        const payload = readFileSync(path);
        unlinkSync(path);
        return { header: frame.header, payload };
    }

    request(header: Record<string, unknown>, payload?: Uint8Array): Promise<Frame> {
        if (this.exited) {
            return Promise.reject(new Error("worker is not running"));
        }
        return new Promise((resolve, reject) => {
            this.pending.push({ resolve, reject });
            const stdin = this.child.stdin!;
            stdin.write(encodeHeader(header, payload ? payload.byteLength : 0));
            if (payload && payload.byteLength > 0) {
                // raw view, no re-encode or copy on our side
                stdin.write(Buffer.from(payload.buffer, payload.byteOffset, payload.byteLength));
            }
        });
    }

    async shutdown(): Promise<void> {
        if (this.exited) {
            return;
        }
        try {
            await this.request({ op: "shutdown" });
        } catch {
            // racing an exit is fine
        }
        this.child.stdin!.end();
    }

    kill(): void {
        this.child.kill();
    }
}
