/**
 * Readers/writers for the capgap file formats.
 *
 * The byte layouts are pinned by the consumer toolkit:
 *  - JSONL embeddings: one compact-JSON header line
 *    {"format_version":1,"kind":"embeddings","dim":..,"count":..,"modality":..,"normalized":..}
 *    followed by one {"id":..,"vector":[..]} line per record, "\n"-terminated.
 *  - Binary embeddings: magic "EMB\0", uint32-LE header length, the same
 *    header JSON extended with "ids":[..], then count*dim little-endian
 *    float32 values.
 *  - Captions: compact-JSON header {"format_version":1,"kind":"captions","count":N}
 *    followed by {"id":..,"group_id":..,"text":..} lines.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import type { CaptionRecord, EmbeddingFileContent, EmbeddingHeader, ExportManifest } from "./types.js";

export const FORMAT_VERSION = 1;
const BINARY_MAGIC = Buffer.from([0x45, 0x4d, 0x42, 0x00]); // "EMB\0"

export class FileFormatError extends Error {}

/** Write via a temp file and rename, so partial exports never look valid. */
export async function atomicWrite(filePath: string, data: Buffer | string): Promise<void> {
  const dir = path.dirname(path.resolve(filePath));
  const tmp = path.join(dir, `.${path.basename(filePath)}.${process.pid}.tmp`);
  await fs.writeFile(tmp, data);
  await fs.rename(tmp, filePath);
}

function headerJson(header: EmbeddingHeader, ids?: string[]): string {
  // key order matters for byte-stable output; keep it fixed
  const obj: Record<string, unknown> = {
    format_version: header.format_version,
    kind: header.kind,
    dim: header.dim,
    count: header.count,
    modality: header.modality,
    normalized: header.normalized,
  };
  if (ids) obj.ids = ids;
  return JSON.stringify(obj);
}

export async function writeEmbeddingsBinary(
  filePath: string,
  ids: string[],
  vectors: Float64Array[],
  modality: "audio" | "text",
  normalized: boolean,
): Promise<void> {
  const dim = vectors.length > 0 ? vectors[0].length : 0;
  const header: EmbeddingHeader = {
    format_version: FORMAT_VERSION, kind: "embeddings",
    dim, count: ids.length, modality, normalized,
  };
  if (ids.length !== vectors.length) {
    throw new FileFormatError(`ids (${ids.length}) and vectors (${vectors.length}) must align`);
  }
  const headerBytes = Buffer.from(headerJson(header, ids), "utf-8");
  const lenBuf = Buffer.alloc(4);
  lenBuf.writeUInt32LE(headerBytes.length, 0);
  const body = Buffer.alloc(4 * dim * vectors.length);
  vectors.forEach((vec, row) => {
    if (vec.length !== dim) {
      throw new FileFormatError(`record ${ids[row]} has length ${vec.length}, expected ${dim}`);
    }
    for (let j = 0; j < dim; j++) {
      body.writeFloatLE(Math.fround(vec[j]), (row * dim + j) * 4);
    }
  });
  await atomicWrite(filePath, Buffer.concat([BINARY_MAGIC, lenBuf, headerBytes, body]));
}

export async function writeEmbeddingsJsonl(
  filePath: string,
  ids: string[],
  vectors: Float64Array[],
  modality: "audio" | "text",
  normalized: boolean,
): Promise<void> {
  const dim = vectors.length > 0 ? vectors[0].length : 0;
  const header: EmbeddingHeader = {
    format_version: FORMAT_VERSION, kind: "embeddings",
    dim, count: ids.length, modality, normalized,
  };
  const lines = [headerJson(header)];
  ids.forEach((id, row) => {
    lines.push(JSON.stringify({ id, vector: Array.from(vectors[row]) }));
  });
  await atomicWrite(filePath, lines.join("\n") + "\n");
}

function checkHeader(header: any, kind: string, where: string): void {
  if (typeof header !== "object" || header === null || header.kind !== kind) {
    throw new FileFormatError(`${where}: expected a ${kind} header`);
  }
  if (header.format_version !== FORMAT_VERSION) {
    throw new FileFormatError(`${where}: unsupported format_version ${header.format_version}`);
  }
}

/** Validating reader for both embedding layouts (used by tests and verify). */
export async function readEmbeddings(filePath: string): Promise<EmbeddingFileContent> {
  const raw = await fs.readFile(filePath);
  if (raw.subarray(0, 4).equals(BINARY_MAGIC)) {
    const headerLen = raw.readUInt32LE(4);
    if (raw.length < 8 + headerLen) throw new FileFormatError(`${filePath}: truncated header`);
    const header = JSON.parse(raw.subarray(8, 8 + headerLen).toString("utf-8"));
    checkHeader(header, "embeddings", filePath);
    const { dim, count } = header;
    const ids: string[] = header.ids;
    if (!Array.isArray(ids) || ids.length !== count) {
      throw new FileFormatError(`${filePath}: header must carry ${count} ids`);
    }
    const body = raw.subarray(8 + headerLen);
    if (body.length < 4 * dim * count) throw new FileFormatError(`${filePath}: truncated body`);
    const vectors: Float64Array[] = [];
    for (let row = 0; row < count; row++) {
      const vec = new Float64Array(dim);
      for (let j = 0; j < dim; j++) vec[j] = body.readFloatLE((row * dim + j) * 4);
      vectors.push(vec);
    }
    return { header, ids, vectors };
  }
  const lines = raw.toString("utf-8").split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new FileFormatError(`${filePath}: empty file`);
  const header = JSON.parse(lines[0]);
  checkHeader(header, "embeddings", filePath);
  if (lines.length - 1 !== header.count) {
    throw new FileFormatError(
      `${filePath}: header promises ${header.count} records, found ${lines.length - 1}`);
  }
  const ids: string[] = [];
  const vectors: Float64Array[] = [];
  const seen = new Set<string>();
  for (const line of lines.slice(1)) {
    const rec = JSON.parse(line);
    if (typeof rec.id !== "string" || !Array.isArray(rec.vector)) {
      throw new FileFormatError(`${filePath}: record needs an id and a vector`);
    }
    if (rec.vector.length !== header.dim) {
      throw new FileFormatError(`${filePath}: record ${rec.id} has wrong vector length`);
    }
    if (seen.has(rec.id)) throw new FileFormatError(`${filePath}: duplicate id ${rec.id}`);
    seen.add(rec.id);
    ids.push(rec.id);
    vectors.push(Float64Array.from(rec.vector));
  }
  return { header, ids, vectors };
}

export async function readCaptions(filePath: string): Promise<CaptionRecord[]> {
  const raw = await fs.readFile(filePath, "utf-8");
  const lines = raw.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new FileFormatError(`${filePath}: empty file`);
  const header = JSON.parse(lines[0]);
  checkHeader(header, "captions", filePath);
  if (lines.length - 1 !== header.count) {
    throw new FileFormatError(
      `${filePath}: header promises ${header.count} records, found ${lines.length - 1}`);
  }
  return lines.slice(1).map((line, i) => {
    const rec = JSON.parse(line);
    if (typeof rec.id !== "string" || typeof rec.group_id !== "string" ||
        typeof rec.text !== "string" || rec.text.length === 0) {
      throw new FileFormatError(`${filePath}: line ${i + 2}: bad caption record`);
    }
    return { id: rec.id, groupId: rec.group_id, text: rec.text };
  });
}

export async function writeManifest(filePath: string, manifest: ExportManifest): Promise<void> {
  await atomicWrite(filePath, JSON.stringify(manifest, null, 2) + "\n");
}
