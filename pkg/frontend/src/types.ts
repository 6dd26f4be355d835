/** Shared types for the exporter. */

/** One caption record from a capgap caption file. */
export interface CaptionRecord {
  id: string;
  groupId: string;
  text: string;
}

/** Header of a capgap embedding file (JSONL line 1 / binary header JSON). */
export interface EmbeddingHeader {
  format_version: number;
  kind: "embeddings";
  dim: number;
  count: number;
  modality: "audio" | "text";
  normalized: boolean;
}

/** A parsed embedding file. */
export interface EmbeddingFileContent {
  header: EmbeddingHeader;
  ids: string[];
  /** Row-major (count x dim). */
  vectors: Float64Array[];
}

/**
 * Provenance record written next to every export. Counts and dim must match
 * the emitted file; the checkpoint identifier records exactly which frozen
 * encoders produced the vectors.
 */
export interface ExportManifest {
  format_version: number;
  kind: "export_manifest";
  checkpoint: string;
  backend: string;
  dataset: string;
  split: string;
  modality: "audio" | "text";
  count: number;
  dim: number;
  normalized: boolean;
  /** Audio only: resample rate and window policy used for long clips. */
  audio?: {
    sample_rate: number;
    window_seconds: number;
    window_stride_seconds: number;
    aggregation: "mean-of-window-embeddings";
  };
  /** Optional paired-similarity diagnostic (see `verify`). */
  paired_similarity?: {
    mean_paired_cosine: number;
    mean_random_cosine: number;
    n_pairs: number;
  };
}

/** Encoder backend contract: a frozen model that embeds text and audio. */
export interface EncoderBackend {
  readonly name: string;
  readonly dim: number;
  /** True when the checkpoint emits unit-norm embeddings. */
  readonly normalized: boolean;
  embedText(texts: string[]): Promise<Float64Array[]>;
  /** Each entry is one clip as mono PCM in [-1, 1] at `sampleRate`. */
  embedAudio(clips: Float32Array[], sampleRate: number): Promise<Float64Array[]>;
}
