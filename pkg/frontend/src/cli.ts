#!/usr/bin/env node
/**
 * clap-export: run a frozen audio/text dual-encoder over caption lists and
 * audio folders, writing capgap-compatible embedding files and manifests.
 *
 *   clap-export text  --captions captions.jsonl --out text_embeddings.bin
 *                     [--backend mock|clap] [--checkpoint <id-or-path>]
 *                     [--dataset clotho --split train] [--batch-size 32]
 *                     [--dim 64] [--seed 0] [--jsonl]
 *   clap-export audio --dir wavs/ --out audio_embeddings.bin
 *                     [... same flags ...] [--sample-rate 32000]
 *                     [--window-seconds 10] [--stride-seconds 10]
 *   clap-export verify --text text.bin --audio audio.bin
 *                     --captions captions.jsonl [--manifest file.manifest.json]
 *
 * Exit codes: 0 ok, 1 runtime failure, 2 usage.
 */

import process from "node:process";

import { ClapBackend } from "./backends/clap.js";
import { MockClapBackend } from "./backends/mock.js";
import { DEFAULT_OPTIONS, exportAudio, exportText, manifestPath, type ExportOptions } from "./export.js";
import { pairedSimilarity, recordInManifest } from "./verify.js";
import type { EncoderBackend } from "./types.js";

function parseArgs(argv: string[]): { command: string; flags: Map<string, string> } {
  const [command, ...rest] = argv;
  const flags = new Map<string, string>();
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i];
    if (!arg.startsWith("--")) throw new UsageError(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    if (key === "jsonl") {
      flags.set(key, "true");
    } else {
      const value = rest[++i];
      if (value === undefined) throw new UsageError(`flag --${key} needs a value`);
      flags.set(key, value);
    }
  }
  return { command: command ?? "", flags };
}

class UsageError extends Error {}

function need(flags: Map<string, string>, key: string): string {
  const v = flags.get(key);
  if (v === undefined) throw new UsageError(`missing required flag --${key}`);
  return v;
}

async function makeBackend(flags: Map<string, string>): Promise<EncoderBackend> {
  const kind = flags.get("backend") ?? "mock";
  if (kind === "mock") {
    return new MockClapBackend(Number(flags.get("dim") ?? 64), Number(flags.get("seed") ?? 0));
  }
  if (kind === "clap") {
    return await ClapBackend.load(need(flags, "checkpoint"));
  }
  throw new UsageError(`unknown backend ${kind} (expected mock or clap)`);
}

function exportOptions(flags: Map<string, string>, backend: EncoderBackend): ExportOptions {
  return {
    backend,
    checkpoint: flags.get("checkpoint") ?? `${backend.name}:dim=${backend.dim}`,
    dataset: flags.get("dataset") ?? DEFAULT_OPTIONS.dataset,
    split: flags.get("split") ?? DEFAULT_OPTIONS.split,
    batchSize: Number(flags.get("batch-size") ?? DEFAULT_OPTIONS.batchSize),
    jsonl: flags.get("jsonl") === "true",
    sampleRate: Number(flags.get("sample-rate") ?? DEFAULT_OPTIONS.sampleRate),
    windowSeconds: Number(flags.get("window-seconds") ?? DEFAULT_OPTIONS.windowSeconds),
    strideSeconds: Number(flags.get("stride-seconds") ?? DEFAULT_OPTIONS.strideSeconds),
  };
}

export async function main(argv: string[]): Promise<number> {
  let parsed: { command: string; flags: Map<string, string> };
  try {
    parsed = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  const { command, flags } = parsed;
  try {
    if (command === "text") {
      const backend = await makeBackend(flags);
      const manifest = await exportText(need(flags, "captions"), need(flags, "out"),
                                        exportOptions(flags, backend));
      console.log(`exported ${manifest.count} text embeddings (dim ${manifest.dim})`);
      return 0;
    }
    if (command === "audio") {
      const backend = await makeBackend(flags);
      const manifest = await exportAudio(need(flags, "dir"), need(flags, "out"),
                                         exportOptions(flags, backend));
      console.log(`exported ${manifest.count} audio embeddings (dim ${manifest.dim})`);
      return 0;
    }
    if (command === "verify") {
      const diag = await pairedSimilarity(need(flags, "text"), need(flags, "audio"),
                                          need(flags, "captions"));
      const target = flags.get("manifest") ?? manifestPath(need(flags, "audio"));
      await recordInManifest(target, diag);
      console.log(`paired cosine ${diag.mean_paired_cosine.toFixed(6)} vs ` +
                  `random ${diag.mean_random_cosine.toFixed(6)} over ${diag.n_pairs} pairs`);
      return 0;
    }
    console.error(`usage error: unknown command ${command || "(none)"} (expected text, audio or verify)`);
    return 2;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
