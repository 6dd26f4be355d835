#!/usr/bin/env python3
"""End-to-end experiment driven through the CLI: generate a gapped synthetic
corpus, train a baseline decoder plus the two training-time bridging
strategies, decode the audio side with every strategy, and print a metric
comparison table.

Usage:
    python scripts/run_pipeline.py --out-dir /tmp/capgap-run [--seed 0]
        [--n-captions 200] [--epochs 60]
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from contextlib import redirect_stdout
from pathlib import Path

from capgap.cli import main as capgap


def run(args: list[str]) -> str:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = capgap(args)
    if code != 0:
        print(buf.getvalue(), file=sys.stderr)
        raise SystemExit(f"capgap {' '.join(args[:2])} failed with exit code {code}")
    return buf.getvalue()


def parse_kv(output: str) -> dict[str, str]:
    return dict(line.split(maxsplit=1) for line in output.strip().splitlines() if " " in line)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-captions", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--gap-norm", type=float, default=0.5)
    ap.add_argument("--tau", type=float, default=0.01)
    opts = ap.parse_args()

    out = Path(opts.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    captions = out / "captions.jsonl"
    text_emb = out / "text_embeddings.jsonl"
    audio_emb = out / "audio_embeddings.jsonl"

    print(f"[1/5] synth -> {out}")
    run(["synth", "--out-dir", str(out), "--seed", str(opts.seed),
         "--n-captions", str(opts.n_captions), "--gap-norm", str(opts.gap_norm),
         "--audio-noise-std", "0.05"])

    print("[2/5] sigma + gap estimation")
    sigma = parse_kv(run(["sigma", "--embeddings", str(text_emb),
                          "--captions", str(captions)]))["sigma"]
    run(["gap-stats", "--audio", str(audio_emb), "--text", str(text_emb),
         "--out", str(out / "gap.json")])
    print(f"      sigma={sigma}")

    common = ["--captions", str(captions), "--embeddings", str(text_emb),
              "--epochs", str(opts.epochs), "--seed", str(opts.seed)]
    trainings = {
        "direct": ["--strategy", "none"],
        "noise-inject": ["--strategy", "noise-inject", "--sigma", sigma],
        "embedding-shift": ["--strategy", "embedding-shift", "--gap", str(out / "gap.json")],
    }
    checkpoints: dict[str, Path] = {}
    for name, extra in trainings.items():
        print(f"[3/5] train {name}")
        ck = out / f"checkpoint_{name}.json"
        run(["train", *common, "--checkpoint", str(ck),
             "--report", str(out / f"train_{name}.json"), *extra])
        checkpoints[name] = ck

    decodings = {
        "direct": (checkpoints["direct"], ["--strategy", "direct"]),
        "noise-inject": (checkpoints["noise-inject"], ["--strategy", "direct"]),
        "embedding-shift": (checkpoints["embedding-shift"], ["--strategy", "direct"]),
        "nn": (checkpoints["direct"], ["--strategy", "nn",
                                       "--memory-embeddings", str(text_emb),
                                       "--memory-captions", str(captions)]),
        "projection": (checkpoints["direct"], ["--strategy", "projection",
                                               "--tau", str(opts.tau),
                                               "--memory-embeddings", str(text_emb),
                                               "--memory-captions", str(captions)]),
    }
    reports: dict[str, dict] = {}
    for name, (ck, extra) in decodings.items():
        print(f"[4/5] infer + eval {name}")
        cand = out / f"candidates_{name}.jsonl"
        run(["infer", "--checkpoint", str(ck), "--audio", str(audio_emb),
             "--out", str(cand), *extra])
        run(["eval", "--candidates", str(cand), "--references", str(captions),
             "--report", str(out / f"metrics_{name}.json")])
        with open(out / f"metrics_{name}.json") as fh:
            reports[name] = json.load(fh)

    print("[5/5] comparison")
    cols = ["bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rougeL", "cider", "spice", "spider"]
    header = ["strategy".ljust(16)] + [c.ljust(9) for c in cols]
    print("".join(header))
    for name in ("direct", "noise-inject", "embedding-shift", "nn", "projection"):
        rep = reports[name]
        cells = ["n/a" if rep[c] is None else f"{rep[c]:.4f}" for c in cols]
        print("".join([name.ljust(16)] + [c.ljust(9) for c in cells]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
