import { mkdtemp, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import path from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import {
  FileFormatError,
  readCaptions,
  readEmbeddings,
  writeEmbeddingsBinary,
  writeEmbeddingsJsonl,
} from "../src/formats.js";

let dir: string;
beforeAll(async () => {
  dir = await mkdtemp(path.join(tmpdir(), "clap-export-"));
});

const ids = ["x0", "x1", "x2"];
const vectors = [
  Float64Array.from([0.25, -0.5, 1.0]),
  Float64Array.from([0.125, 0.375, -0.75]),
  Float64Array.from([1.5, 2.5, -3.5]),
];

describe("binary embedding files", () => {
  it("round-trips ids and float32-exact values", async () => {
    const p = path.join(dir, "emb.bin");
    await writeEmbeddingsBinary(p, ids, vectors, "text", false);
    const loaded = await readEmbeddings(p);
    expect(loaded.ids).toEqual(ids);
    expect(loaded.header.dim).toBe(3);
    expect(loaded.header.count).toBe(3);
    // the sample values are exactly representable in float32
    loaded.vectors.forEach((vec, i) => expect(Array.from(vec)).toEqual(Array.from(vectors[i])));
  });

  it("write(read(f)) is byte-identical", async () => {
    const p1 = path.join(dir, "a.bin");
    const p2 = path.join(dir, "b.bin");
    await writeEmbeddingsBinary(p1, ids, vectors, "audio", false);
    const loaded = await readEmbeddings(p1);
    await writeEmbeddingsBinary(p2, loaded.ids, loaded.vectors,
                                loaded.header.modality, loaded.header.normalized);
    expect(await readFile(p1)).toEqual(await readFile(p2));
  });

  it("starts with the EMB magic and a LE header length", async () => {
    const p = path.join(dir, "magic.bin");
    await writeEmbeddingsBinary(p, ids, vectors, "text", false);
    const raw = await readFile(p);
    expect(Array.from(raw.subarray(0, 4))).toEqual([0x45, 0x4d, 0x42, 0x00]);
    const headerLen = raw.readUInt32LE(4);
    const header = JSON.parse(raw.subarray(8, 8 + headerLen).toString("utf-8"));
    expect(header.kind).toBe("embeddings");
    expect(header.format_version).toBe(1);
    expect(header.ids).toEqual(ids);
    expect(raw.length).toBe(8 + headerLen + 4 * 3 * 3);
  });

  it("rejects a truncated body", async () => {
    const p = path.join(dir, "trunc.bin");
    await writeEmbeddingsBinary(p, ids, vectors, "text", false);
    const raw = await readFile(p);
    await writeFile(p, raw.subarray(0, raw.length - 3));
    await expect(readEmbeddings(p)).rejects.toThrow(/truncated/);
  });
});

describe("jsonl embedding files", () => {
  it("round-trips", async () => {
    const p = path.join(dir, "emb.jsonl");
    await writeEmbeddingsJsonl(p, ids, vectors, "text", true);
    const loaded = await readEmbeddings(p);
    expect(loaded.ids).toEqual(ids);
    expect(loaded.header.normalized).toBe(true);
    expect(Array.from(loaded.vectors[2])).toEqual([1.5, 2.5, -3.5]);
  });

  it("rejects count mismatches", async () => {
    const p = path.join(dir, "short.jsonl");
    await writeEmbeddingsJsonl(p, ids, vectors, "text", false);
    const lines = (await readFile(p, "utf-8")).trim().split("\n");
    await writeFile(p, lines.slice(0, -1).join("\n") + "\n");
    await expect(readEmbeddings(p)).rejects.toThrow(FileFormatError);
  });

  it("rejects duplicate ids", async () => {
    const p = path.join(dir, "dup.jsonl");
    await writeEmbeddingsJsonl(p, ["a", "a"], vectors.slice(0, 2), "text", false);
    await expect(readEmbeddings(p)).rejects.toThrow(/duplicate/);
  });
});

describe("caption files", () => {
  it("parses the capgap layout", async () => {
    const p = path.join(dir, "caps.jsonl");
    const lines = [
      JSON.stringify({ format_version: 1, kind: "captions", count: 2 }),
      JSON.stringify({ id: "c0", group_id: "g0", text: "a dog barks" }),
      JSON.stringify({ id: "c1", group_id: "g0", text: "a dog runs" }),
    ];
    await writeFile(p, lines.join("\n") + "\n");
    const records = await readCaptions(p);
    expect(records).toHaveLength(2);
    expect(records[1]).toEqual({ id: "c1", groupId: "g0", text: "a dog runs" });
  });

  it("rejects wrong format_version", async () => {
    const p = path.join(dir, "v9.jsonl");
    await writeFile(p, JSON.stringify({ format_version: 9, kind: "captions", count: 0 }) + "\n");
    await expect(readCaptions(p)).rejects.toThrow(/format_version/);
  });
});
