#!/usr/bin/env node
/**
 * Score-server entry point.
 *
 *   --mode identity | gaussianShrink[=strength] | neural=path/to/weights.json
 *   --transport stdio | socket
 *   --port N          (socket transport)
 *
 * stdio serves one connection on stdin/stdout; socket accepts any number of
 * connections, each with its own handshake. Responses are stateless, so
 * request order never matters.
 */

import * as net from "net";

import { loadNeuralScore } from "./neural";
import { gaussianShrinkScore, identityScore } from "./priors";
import { FrameReader } from "./protocol";
import { HandshakeError, MakeScore, serveConnection } from "./server";

function parseArgs(argv: string[]): { mode: string; transport: string; port: number } {
  const out = { mode: "identity", transport: "stdio", port: 0 };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--mode") out.mode = argv[++i] ?? "";
    else if (arg === "--transport") out.transport = argv[++i] ?? "";
    else if (arg === "--port") out.port = Number(argv[++i] ?? "0");
    else {
      process.stderr.write(`unknown argument ${arg}\n`);
      process.exit(2);
    }
  }
  return out;
}

function makeScoreFactory(mode: string): MakeScore {
  if (mode === "identity") {
    return () => identityScore();
  }
  if (mode === "gaussianShrink" || mode.startsWith("gaussianShrink=")) {
    const strength = mode.includes("=") ? Number(mode.split("=", 2)[1]) : 1.0;
    if (!(strength > 0)) {
      process.stderr.write(`bad gaussianShrink strength in ${mode}\n`);
      process.exit(2);
    }
    return (schedule) => gaussianShrinkScore(strength, schedule);
  }
  if (mode.startsWith("neural=")) {
    const weightsPath = mode.split("=", 2)[1];
    return (schedule) => loadNeuralScore(weightsPath, schedule);
  }
  process.stderr.write(`unknown mode ${mode}\n`);
  process.exit(2);
}

function serveStdio(makeScore: MakeScore): void {
  const reader = new FrameReader();
  process.stdin.on("data", (chunk: Buffer) => reader.push(chunk));
  process.stdin.on("end", () => reader.end());
  serveConnection(reader, (data) => process.stdout.write(data), makeScore)
    .then(() => process.exit(0))
    .catch((err) => {
      process.stderr.write(`${err.message}\n`);
      process.exit(err instanceof HandshakeError ? 3 : 1);
    });
}

function serveSocket(makeScore: MakeScore, port: number): void {
  const server = net.createServer((socket) => {
    const reader = new FrameReader();
    socket.on("data", (chunk: Buffer) => reader.push(chunk));
    socket.on("end", () => reader.end());
    socket.on("error", () => reader.end());
    serveConnection(reader, (data) => socket.write(data), makeScore)
      .then(() => socket.end())
      .catch((err) => {
        process.stderr.write(`${err.message}\n`);
        socket.destroy();
      });
  });
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address() as net.AddressInfo;
    // machine-readable so callers can bind port 0 and discover the port
    process.stdout.write(`LISTENING ${addr.port}\n`);
  });
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  const makeScore = makeScoreFactory(args.mode);
  if (args.transport === "stdio") {
    serveStdio(makeScore);
  } else if (args.transport === "socket") {
    serveSocket(makeScore, args.port);
  } else {
    process.stderr.write(`unknown transport ${args.transport}\n`);
    process.exit(2);
  }
}

main();
