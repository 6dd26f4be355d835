/**
 * Minimal RIFF/WAVE reader (PCM16 / PCM24 / PCM32 / float32, mono or multi-
 * channel downmixed to mono) plus the fixed-stride window plan used for
 * clips longer than the encoder's input window.
 */

export interface WavData {
  sampleRate: number;
  /** Mono samples in [-1, 1]. */
  samples: Float32Array;
}

export class WavError extends Error {}

export function parseWav(buf: Buffer): WavData {
  if (buf.length < 44 || buf.toString("ascii", 0, 4) !== "RIFF" ||
      buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavError("not a RIFF/WAVE file");
  }
  let offset = 12;
  let fmt: { audioFormat: number; channels: number; sampleRate: number; bits: number } | null = null;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const chunkId = buf.toString("ascii", offset, offset + 4);
    const chunkLen = buf.readUInt32LE(offset + 4);
    const body = buf.subarray(offset + 8, offset + 8 + chunkLen);
    if (chunkId === "fmt ") {
      fmt = {
        audioFormat: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        sampleRate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (chunkId === "data") {
      data = body;
    }
    offset += 8 + chunkLen + (chunkLen % 2); // chunks are word-aligned
  }
  if (!fmt || !data) throw new WavError("missing fmt or data chunk");
  const { audioFormat, channels, sampleRate, bits } = fmt;
  const bytesPer = bits / 8;
  const frames = Math.floor(data.length / (bytesPer * channels));
  const mono = new Float32Array(frames);
  for (let i = 0; i < frames; i++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) {
      const at = (i * channels + c) * bytesPer;
      let v: number;
      if (audioFormat === 3 && bits === 32) {
        v = data.readFloatLE(at);
      } else if (audioFormat === 1 && bits === 16) {
        v = data.readInt16LE(at) / 32768;
      } else if (audioFormat === 1 && bits === 24) {
        const u = data[at] | (data[at + 1] << 8) | (data[at + 2] << 16);
        v = (u >= 0x800000 ? u - 0x1000000 : u) / 8388608;
      } else if (audioFormat === 1 && bits === 32) {
        v = data.readInt32LE(at) / 2147483648;
      } else {
        throw new WavError(`unsupported encoding: format ${audioFormat}, ${bits}-bit`);
      }
      acc += v;
    }
    mono[i] = acc / channels;
  }
  return { sampleRate, samples: mono };
}

/**
 * Start offsets (in samples) of fixed-stride windows covering a clip.
 *
 * Clips no longer than one window yield a single window starting at 0; the
 * final window is pulled back so it ends exactly at the clip end rather than
 * running past it. The caller averages the per-window embeddings.
 */
export function windowPlan(nSamples: number, windowSamples: number, strideSamples: number): number[] {
  if (windowSamples <= 0 || strideSamples <= 0) {
    throw new WavError("window and stride must be positive");
  }
  if (nSamples <= windowSamples) return [0];
  const starts: number[] = [];
  for (let s = 0; s + windowSamples < nSamples; s += strideSamples) {
    starts.push(s);
  }
  starts.push(nSamples - windowSamples);
  return starts;
}

/** Naive linear resampler; adequate for a batch export tool. */
export function resample(samples: Float32Array, fromRate: number, toRate: number): Float32Array {
  if (fromRate === toRate) return samples;
  const outLen = Math.max(1, Math.round((samples.length * toRate) / fromRate));
  const out = new Float32Array(outLen);
  const scale = (samples.length - 1) / Math.max(1, outLen - 1);
  for (let i = 0; i < outLen; i++) {
    const x = i * scale;
    const lo = Math.floor(x);
    const hi = Math.min(samples.length - 1, lo + 1);
    out[i] = samples[lo] + (samples[hi] - samples[lo]) * (x - lo);
  }
  return out;
}
