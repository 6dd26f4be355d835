/**
 * Paired-similarity diagnostic: with text and audio exports of the same
 * dataset, the mean cosine between paired caption/audio embeddings should
 * clearly exceed the mean cosine of mismatched pairs. Written into the
 * manifest as a sanity record of each export.
 */

import { readCaptions, readEmbeddings, writeManifest } from "./formats.js";
import type { ExportManifest } from "./types.js";

function cosine(a: Float64Array, b: Float64Array): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (Math.sqrt(na) * Math.sqrt(nb));
}

export interface PairedSimilarity {
  mean_paired_cosine: number;
  mean_random_cosine: number;
  n_pairs: number;
}

/**
 * Pairs are formed through the caption file: each caption id maps to a text
 * embedding, each caption group id to an audio embedding. The random
 * baseline rotates the pairing by half the corpus.
 */
export async function pairedSimilarity(
  textPath: string,
  audioPath: string,
  captionsPath: string,
): Promise<PairedSimilarity> {
  const text = await readEmbeddings(textPath);
  const audio = await readEmbeddings(audioPath);
  const captions = await readCaptions(captionsPath);
  const textByIds = new Map(text.ids.map((id, i) => [id, text.vectors[i]]));
  const audioByIds = new Map(audio.ids.map((id, i) => [id, audio.vectors[i]]));

  const pairs: Array<[Float64Array, Float64Array]> = [];
  for (const rec of captions) {
    const t = textByIds.get(rec.id);
    const a = audioByIds.get(rec.groupId);
    if (t && a) pairs.push([t, a]);
  }
  if (pairs.length < 2) throw new Error("need at least 2 matched caption/audio pairs");
  const paired = pairs.reduce((acc, [t, a]) => acc + cosine(t, a), 0) / pairs.length;
  const offset = Math.floor(pairs.length / 2);
  let random = 0;
  for (let i = 0; i < pairs.length; i++) {
    random += cosine(pairs[i][0], pairs[(i + offset) % pairs.length][1]);
  }
  random /= pairs.length;
  return { mean_paired_cosine: paired, mean_random_cosine: random, n_pairs: pairs.length };
}

/** Attach the diagnostic to an existing manifest file. */
export async function recordInManifest(
  manifestFile: string,
  diagnostic: PairedSimilarity,
): Promise<void> {
  const { promises: fs } = await import("node:fs");
  const manifest: ExportManifest = JSON.parse(await fs.readFile(manifestFile, "utf-8"));
  manifest.paired_similarity = diagnostic;
  await writeManifest(manifestFile, manifest);
}
