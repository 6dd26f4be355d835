/**
 * Deterministic stand-in encoder for tests and offline dry runs.
 *
 * Text: the L2-normalized mean of per-word code vectors (words sharing
 * captions land near each other, loosely mimicking a semantic encoder).
 * Audio: a code vector derived from coarse PCM statistics per window.
 * Everything is a pure function of (seed, input) — same input, same vector.
 */

import type { EncoderBackend } from "../types.js";

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: tiny deterministic PRNG. */
function prng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianVector(dim: number, seed: number): Float64Array {
  const next = prng(seed);
  const out = new Float64Array(dim);
  for (let i = 0; i < dim; i += 2) {
    // Box-Muller
    const u = Math.max(next(), 1e-12);
    const v = next();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v);
    if (i + 1 < dim) out[i + 1] = r * Math.sin(2 * Math.PI * v);
  }
  return out;
}

function normalize(vec: Float64Array): Float64Array {
  let sq = 0;
  for (const x of vec) sq += x * x;
  const norm = Math.sqrt(sq) || 1;
  return vec.map((x) => x / norm) as Float64Array;
}

export class MockClapBackend implements EncoderBackend {
  readonly name = "mock";
  readonly normalized = true;

  constructor(readonly dim: number = 64, private readonly seed: number = 0) {}

  private wordCode(word: string): Float64Array {
    return gaussianVector(this.dim, fnv1a(`${this.seed}:w:${word}`));
  }

  async embedText(texts: string[]): Promise<Float64Array[]> {
    return texts.map((text) => {
      const words = text.toLowerCase().replace(/[^\p{L}\p{N}\s]/gu, "").split(/\s+/).filter(Boolean);
      const acc = new Float64Array(this.dim);
      const source = words.length > 0 ? words : [text];
      for (const w of source) {
        const code = this.wordCode(w);
        for (let i = 0; i < this.dim; i++) acc[i] += code[i];
      }
      for (let i = 0; i < this.dim; i++) acc[i] /= source.length;
      return normalize(acc);
    });
  }

  async embedAudio(clips: Float32Array[], sampleRate: number): Promise<Float64Array[]> {
    return clips.map((samples) => {
      // coarse per-clip statistics -> stable code, insensitive to tiny jitter
      let energy = 0;
      let zeroCrossings = 0;
      for (let i = 0; i < samples.length; i++) {
        energy += samples[i] * samples[i];
        if (i > 0 && samples[i - 1] < 0 !== samples[i] < 0) zeroCrossings++;
      }
      const stats = [
        samples.length,
        Math.round(1e4 * Math.sqrt(energy / Math.max(1, samples.length))),
        Math.round((1e4 * zeroCrossings) / Math.max(1, samples.length)),
        sampleRate,
      ].join(",");
      return normalize(gaussianVector(this.dim, fnv1a(`${this.seed}:a:${stats}`)));
    });
  }
}
