/**
 * Dual-encoder backend driven by transformers.js.
 *
 * The dependency is optional and loaded lazily: a checkpoint id or local
 * path (any audio/text contrastive dual encoder exported for
 * transformers.js) is resolved at construction time, and the model stays
 * frozen; the exporter never trains anything. Install `@xenova/transformers`
 * to use it. Without it, construction fails with a clear message and the
 * mock backend remains available.
 */

import type { EncoderBackend } from "../types.js";

export class ClapBackend implements EncoderBackend {
  readonly name = "clap";
  readonly normalized = true;

  private constructor(
    readonly checkpoint: string,
    readonly dim: number,
    private readonly model: any,
    private readonly tokenizer: any,
    private readonly processor: any,
  ) {}

  static async load(checkpoint: string): Promise<ClapBackend> {
    let tf: any;
    try {
      const moduleName = "@xenova/transformers"; // optional dep, resolved at runtime
      tf = await import(moduleName);
    } catch {
      throw new Error(
        "backend 'clap' needs the optional dependency @xenova/transformers; " +
        "install it (and point --checkpoint at a local or hub model) or use --backend mock",
      );
    }
    const model = await tf.ClapModel.from_pretrained(checkpoint, { quantized: false });
    const tokenizer = await tf.AutoTokenizer.from_pretrained(checkpoint);
    const processor = await tf.AutoProcessor.from_pretrained(checkpoint);
    const dim = model.config?.projection_dim ?? 512;
    return new ClapBackend(checkpoint, dim, model, tokenizer, processor);
  }

  async embedText(texts: string[]): Promise<Float64Array[]> {
    const inputs = this.tokenizer(texts, { padding: true, truncation: true });
    const { text_embeds } = await this.model(inputs);
    return this.rows(text_embeds, texts.length);
  }

  async embedAudio(clips: Float32Array[], sampleRate: number): Promise<Float64Array[]> {
    const out: Float64Array[] = [];
    for (const clip of clips) {
      const features = await this.processor(clip, { sampling_rate: sampleRate });
      const { audio_embeds } = await this.model(features);
      out.push(...this.rows(audio_embeds, 1));
    }
    return out;
  }

  private rows(tensor: any, count: number): Float64Array[] {
    const flat: Float64Array = Float64Array.from(tensor.data);
    const dim = flat.length / count;
    const out: Float64Array[] = [];
    for (let i = 0; i < count; i++) {
      let vec = flat.subarray(i * dim, (i + 1) * dim);
      let sq = 0;
      for (const x of vec) sq += x * x;
      const norm = Math.sqrt(sq) || 1;
      out.push(Float64Array.from(vec, (x) => x / norm));
    }
    return out;
  }
}
