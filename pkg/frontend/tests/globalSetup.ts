/**
 * Spawns the Python query service on a free port, preloading the fixture
 * CSVs, and hands its URL to the live-contract tests. When the service
 * cannot start (no Python or the engine is not installed), liveUrl stays
 * empty and those tests skip.
 */

import { type ChildProcess, spawn } from "node:child_process";
import { createServer } from "node:net";
import { fileURLToPath } from "node:url";
import path from "node:path";

import type { TestProject } from "vitest/node";

const FIXTURES = path.join(path.dirname(fileURLToPath(import.meta.url)), "fixtures");

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      const port = typeof address === "object" && address ? address.port : 0;
      probe.close(() => resolve(port));
    });
  });
}

async function waitUp(url: string, timeoutMs: number): Promise<boolean> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${url}/datasets`);
      if (response.ok) return true;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  return false;
}

let child: ChildProcess | undefined;

export default async function setup(project: TestProject): Promise<() => void> {
  let liveUrl = "";
  try {
    const port = await freePort();
    const url = `http://127.0.0.1:${port}`;
    child = spawn(
      "python3",
      ["-m", "paql.cli", "serve", "--addr", `127.0.0.1:${port}`, "--data-dir", FIXTURES],
      { stdio: "ignore" },
    );
    child.on("error", () => {
      child = undefined;
    });
    if (await waitUp(url, 15_000)) {
      liveUrl = url;
    } else {
      child?.kill();
      child = undefined;
    }
  } catch {
    liveUrl = "";
  }
  if (!liveUrl) {
    console.warn("[globalSetup] live query service unavailable; live tests will skip");
  }
  project.provide("liveUrl", liveUrl);
  return () => {
    child?.kill();
  };
}

declare module "vitest" {
  export interface ProvidedContext {
    liveUrl: string;
  }
}
