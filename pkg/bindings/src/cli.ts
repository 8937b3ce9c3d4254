/** Subprocess plumbing: every operation pipes volume bytes through `vkt`. */

import { spawnSync } from "node:child_process";

import { VktError, VktUsageError } from "./errors.js";

/** Mirror of the toolkit's per-context execution settings. */
export interface ExecutionPolicy {
  device?: "cpu" | "emulated";
  workers?: number;
  timings?: boolean;
}

let currentPolicy: ExecutionPolicy = {};

/** Applied as global flags to every subsequent CLI invocation. */
export function setExecutionPolicy(policy: ExecutionPolicy): void {
  currentPolicy = { ...policy };
}

export function getExecutionPolicy(): ExecutionPolicy {
  return { ...currentPolicy };
}

/** Binary to invoke; override with the VKT_BIN environment variable. */
export function vktBinary(): string {
  return process.env.VKT_BIN ?? "vkt";
}

function policyFlags(): string[] {
  const flags: string[] = [];
  if (currentPolicy.device) flags.push("--device", currentPolicy.device);
  if (currentPolicy.workers !== undefined) flags.push("--workers", String(currentPolicy.workers));
  if (currentPolicy.timings) flags.push("--timings");
  return flags;
}

const ERROR_LINE = /^error: ([A-Za-z]+): (.*)$/m;

/**
 * Run one vkt subcommand, feeding `input` to stdin and returning stdout.
 *
 * Exit code 1 raises VktUsageError; exit code 2 raises a VktError named
 * after the toolkit error parsed from stderr.
 */
export function runVkt(args: string[], input?: Buffer): Buffer {
  const result = spawnSync(vktBinary(), [...policyFlags(), ...args], {
    input,
    maxBuffer: 1 << 30,
  });
  if (result.error) {
    throw new VktError("IoFailure", `cannot invoke ${vktBinary()}: ${result.error.message}`);
  }
  const stderr = result.stderr?.toString() ?? "";
  if (result.status !== 0) {
    const match = ERROR_LINE.exec(stderr);
    if (result.status === 2 && match) {
      throw new VktError(match[1], match[2]);
    }
    if (result.status === 1) {
      throw new VktUsageError(stderr.trim() || "usage error");
    }
    throw new VktError("IoFailure", stderr.trim() || `vkt exited with ${result.status}`);
  }
  if (currentPolicy.timings && stderr) {
    process.stderr.write(stderr);
  }
  return result.stdout;
}
