/**
 * Invocation of the native toolkit CLI. The binary is resolved from the
 * LIDARBEV_CLI environment variable (which may carry arguments, e.g.
 * "python3 -m lidarbev.cli") and defaults to `lidarbev` on PATH.
 */

import { execFileSync } from "node:child_process";

export function cliCommand(): string[] {
  const override = process.env.LIDARBEV_CLI;
  if (override && override.trim()) {
    return override.trim().split(/\s+/);
  }
  return ["lidarbev"];
}

export function runCli(args: string[]): string {
  const [exe, ...prefix] = cliCommand();
  try {
    return execFileSync(exe, [...prefix, ...args], {
      encoding: "utf-8",
      stdio: ["ignore", "pipe", "pipe"],
    });
  } catch (err) {
    const e = err as { status?: number; stderr?: string };
    throw new Error(
      `lidarbev ${args[0]} failed (exit ${e.status}): ${e.stderr ?? ""}`.trim(),
    );
  }
}
