/**
 * Frame loop: answer the handshake, then serve request frames until
 * end-of-stream. A malformed frame (unknown magic or a bad header) yields an
 * ERR1 response and the loop continues at the next frame boundary; a failed
 * handshake terminates the connection with an error.
 */

import {
  FrameReader,
  HANDSHAKE_BODY_BYTES,
  MAGIC_HANDSHAKE,
  MAGIC_REQUEST,
  REQUEST_HEADER_BYTES,
  decodeHandshakeBody,
  decodeRequestHeader,
  encodeAck,
  encodeError,
  encodeResponse,
  payloadToFloats,
} from "./protocol";
import { Schedule, ScoreFn, linearSchedule } from "./priors";

const MAX_PIXELS = 1 << 26; // header sanity bound against stream corruption

export class HandshakeError extends Error {}

export type Write = (data: Buffer) => void;
export type MakeScore = (schedule: Schedule) => ScoreFn;

export async function serveConnection(
  reader: FrameReader,
  write: Write,
  makeScore: MakeScore
): Promise<number> {
  const magic = await reader.readExact(4);
  if (magic === null) {
    throw new HandshakeError("stream closed before handshake");
  }
  if (magic.toString("ascii") !== MAGIC_HANDSHAKE) {
    throw new HandshakeError(`bad handshake magic ${JSON.stringify(magic.toString("ascii"))}`);
  }
  const body = await reader.readExact(HANDSHAKE_BODY_BYTES);
  if (body === null) {
    throw new HandshakeError("stream closed inside handshake");
  }
  const handshake = decodeHandshakeBody(body);
  let score: ScoreFn;
  try {
    score = makeScore(linearSchedule(handshake.steps, handshake.betaStart, handshake.betaEnd));
  } catch (err) {
    throw new HandshakeError(`cannot serve schedule: ${(err as Error).message}`);
  }
  write(encodeAck());

  let served = 0;
  for (;;) {
    const frameMagic = await reader.readExact(4);
    if (frameMagic === null) {
      return served; // clean end-of-stream
    }
    if (frameMagic.toString("ascii") !== MAGIC_REQUEST) {
      write(encodeError(`unknown frame magic ${JSON.stringify(frameMagic.toString("latin1"))}`));
      continue;
    }
    const headerBytes = await reader.readExact(REQUEST_HEADER_BYTES);
    if (headerBytes === null) {
      write(encodeError("stream ended inside request header"));
      return served;
    }
    const header = decodeRequestHeader(headerBytes);
    const pixels = header.height * header.width * header.channels;
    if (header.channels !== 3 || pixels === 0 || pixels > MAX_PIXELS) {
      write(
        encodeError(
          `bad request header: t=${header.t} H=${header.height} W=${header.width} C=${header.channels}`
        )
      );
      continue;
    }
    const payload = await reader.readExact(pixels * 4);
    if (payload === null) {
      write(encodeError("stream ended inside request payload"));
      return served;
    }
    if (header.t < 1) {
      write(encodeError(`timestep ${header.t} out of range`));
      continue;
    }
    try {
      const image = Float64Array.from(payloadToFloats(payload));
      const result = score(image, header.t, header.height, header.width, header.channels);
      write(encodeResponse(header, Float32Array.from(result)));
      served += 1;
    } catch (err) {
      write(encodeError((err as Error).message));
    }
  }
}
