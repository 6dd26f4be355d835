/**
 * Export orchestration: batch the inputs through a frozen encoder backend
 * and emit capgap embedding files plus a provenance manifest.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import { readCaptions, writeEmbeddingsBinary, writeEmbeddingsJsonl, writeManifest } from "./formats.js";
import type { EncoderBackend, ExportManifest } from "./types.js";
import { parseWav, resample, windowPlan } from "./wav.js";

export interface ExportOptions {
  backend: EncoderBackend;
  checkpoint: string;
  dataset: string;
  split: string;
  batchSize: number;
  jsonl: boolean;
  /** Audio: encoder input rate and window policy for long clips. */
  sampleRate: number;
  windowSeconds: number;
  strideSeconds: number;
}

export const DEFAULT_OPTIONS = {
  dataset: "unspecified",
  split: "unspecified",
  batchSize: 32,
  jsonl: false,
  sampleRate: 32_000,
  windowSeconds: 10,
  strideSeconds: 10,
};

/**
 * Run `fn` over batches; on failure, halve the batch and retry, so a batch
 * that exhausts memory degrades to smaller inferences before giving up.
 */
export async function batched<T, R>(
  items: T[],
  batchSize: number,
  fn: (chunk: T[]) => Promise<R[]>,
): Promise<R[]> {
  const out: R[] = [];
  let i = 0;
  let size = Math.max(1, batchSize);
  while (i < items.length) {
    const chunk = items.slice(i, i + size);
    try {
      const got = await fn(chunk);
      if (got.length !== chunk.length) {
        throw new Error(`backend returned ${got.length} embeddings for ${chunk.length} inputs`);
      }
      out.push(...got);
      i += size;
    } catch (err) {
      if (size === 1) throw err;
      size = Math.max(1, Math.floor(size / 2));
    }
  }
  return out;
}

function meanOfRows(rows: Float64Array[]): Float64Array {
  const dim = rows[0].length;
  const acc = new Float64Array(dim);
  for (const row of rows) {
    for (let j = 0; j < dim; j++) acc[j] += row[j];
  }
  for (let j = 0; j < dim; j++) acc[j] /= rows.length;
  return acc;
}

export async function exportText(
  captionsPath: string,
  outPath: string,
  opts: ExportOptions,
): Promise<ExportManifest> {
  const records = await readCaptions(captionsPath);
  const vectors = await batched(records, opts.batchSize, (chunk) =>
    opts.backend.embedText(chunk.map((r) => r.text)));
  const ids = records.map((r) => r.id);
  const write = opts.jsonl ? writeEmbeddingsJsonl : writeEmbeddingsBinary;
  await write(outPath, ids, vectors, "text", opts.backend.normalized);
  const manifest: ExportManifest = {
    format_version: 1,
    kind: "export_manifest",
    checkpoint: opts.checkpoint,
    backend: opts.backend.name,
    dataset: opts.dataset,
    split: opts.split,
    modality: "text",
    count: ids.length,
    dim: opts.backend.dim,
    normalized: opts.backend.normalized,
  };
  await writeManifest(manifestPath(outPath), manifest);
  return manifest;
}

export async function exportAudio(
  audioDir: string,
  outPath: string,
  opts: ExportOptions,
): Promise<ExportManifest> {
  const names = (await fs.readdir(audioDir)).filter((n) => n.toLowerCase().endsWith(".wav")).sort();
  if (names.length === 0) throw new Error(`no .wav files under ${audioDir}`);
  const windowSamples = Math.round(opts.windowSeconds * opts.sampleRate);
  const strideSamples = Math.round(opts.strideSeconds * opts.sampleRate);

  const ids: string[] = [];
  const clipWindows: Float32Array[] = [];
  const windowsPerClip: number[] = [];
  for (const name of names) {
    const wav = parseWav(await fs.readFile(path.join(audioDir, name)));
    const samples = resample(wav.samples, wav.sampleRate, opts.sampleRate);
    const starts = windowPlan(samples.length, windowSamples, strideSamples);
    for (const s of starts) clipWindows.push(samples.subarray(s, s + windowSamples));
    windowsPerClip.push(starts.length);
    ids.push(name.replace(/\.wav$/i, ""));
  }
  const windowVecs = await batched(clipWindows, opts.batchSize, (chunk) =>
    opts.backend.embedAudio(chunk, opts.sampleRate));

  // long clips: average the fixed-stride window embeddings
  const vectors: Float64Array[] = [];
  let cursor = 0;
  for (const n of windowsPerClip) {
    vectors.push(meanOfRows(windowVecs.slice(cursor, cursor + n)));
    cursor += n;
  }
  const write = opts.jsonl ? writeEmbeddingsJsonl : writeEmbeddingsBinary;
  await write(outPath, ids, vectors, "audio", false);
  const manifest: ExportManifest = {
    format_version: 1,
    kind: "export_manifest",
    checkpoint: opts.checkpoint,
    backend: opts.backend.name,
    dataset: opts.dataset,
    split: opts.split,
    modality: "audio",
    count: ids.length,
    dim: opts.backend.dim,
    normalized: false,
    audio: {
      sample_rate: opts.sampleRate,
      window_seconds: opts.windowSeconds,
      window_stride_seconds: opts.strideSeconds,
      aggregation: "mean-of-window-embeddings",
    },
  };
  await writeManifest(manifestPath(outPath), manifest);
  return manifest;
}

export function manifestPath(outPath: string): string {
  return outPath.replace(/\.(jsonl|bin)$/i, "") + ".manifest.json";
}
