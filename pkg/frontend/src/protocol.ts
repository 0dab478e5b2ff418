/**
 * Wire framing for the worker protocol.
 *
 * Each frame is: u32 LE header length | header JSON | u32 LE payload
 * length | payload. Pixel buffers travel as the raw payload, never
 * re-encoded.
 */

export interface Frame {
    header: Record<string, unknown>;
    payload: Buffer;
}

/** Encode only the fixed-size prefix + header; payloads are written raw. */
export function encodeHeader(header: Record<string, unknown>, payloadLength: number): Buffer {
    const head = Buffer.from(JSON.stringify(header), "utf8");
    const out = Buffer.allocUnsafe(8 + head.length);
    out.writeUInt32LE(head.length, 0);
    head.copy(out, 4);
    out.writeUInt32LE(payloadLength, 4 + head.length);
    return out;
}

export function encodeFrame(header: Record<string, unknown>, payload?: Uint8Array): Buffer {
    const prefix = encodeHeader(header, payload ? payload.byteLength : 0);
    return payload && payload.byteLength > 0
        ? Buffer.concat([prefix, Buffer.from(payload.buffer, payload.byteOffset, payload.byteLength)])
        : prefix;
}

/**
 * Incremental parser. Chunks are held in a list and joined once per frame,
 * so a 600 KB response arriving in a dozen pipe chunks costs one copy.
 */
export class FrameParser {
    private chunks: Buffer[] = [];
    private total = 0;

    feed(chunk: Buffer): Frame[] {
        this.chunks.push(chunk);
        this.total += chunk.length;
        const frames: Frame[] = [];
        for (;;) {
            const frame = this.tryParse();
            if (frame === null) {
                return frames;
            }
            frames.push(frame);
        }
    }

    private peek(n: number): Buffer | null {
        if (this.total < n) {
            return null;
        }
        if (this.chunks[0].length >= n) {
            return this.chunks[0];
        }
        // join everything; subsequent peeks hit the fast path
        this.chunks = [Buffer.concat(this.chunks)];
        return this.chunks[0];
    }

    private tryParse(): Frame | null {
        let head = this.peek(4);
        if (head === null) {
            return null;
        }
        const headerLength = head.readUInt32LE(0);
        head = this.peek(8 + headerLength);
        if (head === null) {
            return null;
        }
        const payloadLength = head.readUInt32LE(4 + headerLength);
        const total = 8 + headerLength + payloadLength;
        const all = this.peek(total);
        if (all === null) {
            return null;
        }
        const header = JSON.parse(all.subarray(4, 4 + headerLength).toString("utf8"));
        const payload = all.subarray(8 + headerLength, total);
        const rest = all.subarray(total);
        const extra = this.chunks.slice(1);
        this.chunks = rest.length > 0 ? [rest, ...extra] : extra;
        this.total -= total;
        return { header, payload };
    }
}
