/**
 * Binary framing shared by every transport. All integers are u32
 * little-endian, floats are IEEE-754 little-endian. Frames:
 *
 *   handshake  "DNS1" | u32 T | f64 betaStart | f64 betaEnd   (client -> server)
 *   ack        "ACK1"                                         (server -> client)
 *   request    "REQ1" | u32 t | u32 H | u32 W | u32 C | H*W*C f32 (channel-major)
 *   response   "RSP1" | same header | score payload
 *   error      "ERR1" | u32 byteLength | UTF-8 message
 */

export const MAGIC_HANDSHAKE = "DNS1";
export const MAGIC_ACK = "ACK1";
export const MAGIC_REQUEST = "REQ1";
export const MAGIC_RESPONSE = "RSP1";
export const MAGIC_ERROR = "ERR1";

export const HANDSHAKE_BODY_BYTES = 4 + 8 + 8;
export const REQUEST_HEADER_BYTES = 4 * 4;

export interface Handshake {
  steps: number;
  betaStart: number;
  betaEnd: number;
}

export interface RequestHeader {
  t: number;
  height: number;
  width: number;
  channels: number;
}

export function decodeHandshakeBody(body: Buffer): Handshake {
  return {
    steps: body.readUInt32LE(0),
    betaStart: body.readDoubleLE(4),
    betaEnd: body.readDoubleLE(12),
  };
}

export function decodeRequestHeader(header: Buffer): RequestHeader {
  return {
    t: header.readUInt32LE(0),
    height: header.readUInt32LE(4),
    width: header.readUInt32LE(8),
    channels: header.readUInt32LE(12),
  };
}

export function encodeResponse(header: RequestHeader, score: Float32Array): Buffer {
  const head = Buffer.alloc(4 + REQUEST_HEADER_BYTES);
  head.write(MAGIC_RESPONSE, 0, "ascii");
  head.writeUInt32LE(header.t, 4);
  head.writeUInt32LE(header.height, 8);
  head.writeUInt32LE(header.width, 12);
  head.writeUInt32LE(header.channels, 16);
  const payload = Buffer.from(score.buffer, score.byteOffset, score.byteLength);
  return Buffer.concat([head, payload]);
}

export function encodeError(message: string): Buffer {
  const body = Buffer.from(message, "utf-8");
  const head = Buffer.alloc(8);
  head.write(MAGIC_ERROR, 0, "ascii");
  head.writeUInt32LE(body.length, 4);
  return Buffer.concat([head, body]);
}

export function encodeAck(): Buffer {
  return Buffer.from(MAGIC_ACK, "ascii");
}

/** Payload bytes -> little-endian float32 view (copies to align). */
export function payloadToFloats(payload: Buffer): Float32Array {
  const copy = Buffer.from(payload); // ensure alignment independent of pool offset
  return new Float32Array(copy.buffer, copy.byteOffset, copy.length / 4);
}

/**
 * Buffered reader over an async byte stream. readExact resolves once the
 * requested count is available and rejects on end-of-stream.
 */
export class FrameReader {
  private chunks: Buffer[] = [];
  private length = 0;
  private ended = false;
  private waiter: (() => void) | null = null;

  push(chunk: Buffer): void {
    this.chunks.push(chunk);
    this.length += chunk.length;
    this.waiter?.();
  }

  end(): void {
    this.ended = true;
    this.waiter?.();
  }

  /** Bytes currently buffered (for end-of-stream diagnostics). */
  get buffered(): number {
    return this.length;
  }

  async readExact(count: number): Promise<Buffer | null> {
    while (this.length < count) {
      if (this.ended) {
        return null;
      }
      await new Promise<void>((resolve) => {
        this.waiter = resolve;
      });
      this.waiter = null;
    }
    const out = Buffer.allocUnsafe(count);
    let offset = 0;
    while (offset < count) {
      const head = this.chunks[0];
      const take = Math.min(head.length, count - offset);
      head.copy(out, offset, 0, take);
      if (take === head.length) {
        this.chunks.shift();
      } else {
        this.chunks[0] = head.subarray(take);
      }
      offset += take;
    }
    this.length -= count;
    return out;
  }
}
