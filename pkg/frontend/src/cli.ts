#!/usr/bin/env node
/**
 * export    --video DIR --query "text" [--out DIR] [--config PATH]
 * make-clip --out DIR [--frames N] [--seed N]
 */
import { exportTrace, loadConfig } from "./export.js";
import { makeClip } from "./video.js";

function parseArgs(argv: string[]): { cmd: string; flags: Map<string, string[]> } {
  const [cmd, ...rest] = argv;
  const flags = new Map<string, string[]>();
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument: ${arg}`);
    const key = arg.slice(2);
    const value = rest[i + 1];
    if (value === undefined || value.startsWith("--")) throw new Error(`--${key} needs a value`);
    i++;
    const bucket = flags.get(key) ?? [];
    bucket.push(value);
    flags.set(key, bucket);
  }
  return { cmd, flags };
}

function one(flags: Map<string, string[]>, key: string, fallback?: string): string {
  const values = flags.get(key);
  if (!values) {
    if (fallback !== undefined) return fallback;
    throw new Error(`missing --${key}`);
  }
  return values[values.length - 1];
}

function main(argv: string[]): number {
  const { cmd, flags } = parseArgs(argv);
  switch (cmd) {
    case "export": {
      const video = one(flags, "video");
      const queries = flags.get("query") ?? [];
      if (queries.length === 0) throw new Error("missing --query");
      const out = one(flags, "out", "trace_out");
      const cfg = loadConfig(flags.get("config")?.[0]);
      const result = exportTrace(video, queries, out, cfg);
      console.log(
        `exported ${result.framesWritten} frames, ${result.proposalsWritten} proposals -> ${result.manifestPath}`
      );
      return 0;
    }
    case "make-clip": {
      const out = one(flags, "out");
      const frames = parseInt(one(flags, "frames", "60"), 10);
      const seed = parseInt(one(flags, "seed", "1"), 10);
      makeClip(out, frames, seed);
      console.log(`wrote ${frames} frames to ${out}`);
      return 0;
    }
    default:
      console.error("usage: cli.js export|make-clip [flags]");
      return 2;
  }
}

try {
  process.exit(main(process.argv.slice(2)));
} catch (e) {
  console.error(`error: ${e instanceof Error ? e.message : e}`);
  process.exit(2);
}
