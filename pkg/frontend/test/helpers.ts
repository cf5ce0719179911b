/** Spawns the planner's session service for live tests and waits for it to
 * accept websocket connections. */

import { ChildProcess, spawn } from "node:child_process";
import WebSocket from "ws";

export interface LiveService {
  port: number;
  url: string;
  proc: ChildProcess;
  stderr: string[];
  stop(): Promise<void>;
}

export async function startService(params = "P2"): Promise<LiveService> {
  const port = 20000 + Math.floor(Math.random() * 15000);
  const proc = spawn(
    "python3",
    ["-m", "steadyarm.cli", "serve", "--host", "127.0.0.1", "--port", String(port), "--params", params],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  const stderr: string[] = [];
  proc.stderr!.on("data", (chunk: Buffer) => {
    stderr.push(chunk.toString());
    if (stderr.length > 200) stderr.shift();
  });

  const url = `ws://127.0.0.1:${port}/session`;
  const deadline = Date.now() + 60_000;
  for (;;) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early (${proc.exitCode}):\n${stderr.join("")}`);
    }
    const ok = await new Promise<boolean>((resolve) => {
      const probe = new WebSocket(url);
      probe.onopen = () => {
        probe.close();
        resolve(true);
      };
      probe.onerror = () => resolve(false);
    });
    if (ok) break;
    if (Date.now() > deadline) {
      proc.kill("SIGKILL");
      throw new Error(`service did not come up on port ${port}:\n${stderr.join("")}`);
    }
    await sleep(250);
  }

  return {
    port,
    url,
    proc,
    stderr,
    stop: async () => {
      proc.kill("SIGTERM");
      await new Promise<void>((resolve) => {
        const t = setTimeout(() => {
          proc.kill("SIGKILL");
          resolve();
        }, 5_000);
        proc.once("exit", () => {
          clearTimeout(t);
          resolve();
        });
      });
    },
  };
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
