"""Command-line surface: synth, sigma, gap-stats, train, infer, eval, project2d.

Every subcommand is deterministic given its flags and seeds. Numeric output
is printed with 6 significant digits so logs and golden files are stable.
Exit codes: 0 success, 1 runtime failure (diagnostic on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .decoder import DecoderConfig, PrefixDecoder
from .embeddings import Embedding, EmbeddingSet, GapVector, gap_vector, linf_norm
from .gap import CaptionGroup, NoiseConfig, estimate_sigma
from .inference import Memory, ProjectionConfig, decode_direct, decode_nn, decode_projection
from .metrics import EvalPair, evaluate
from .presets import PRESETS
from .synth import SynthConfig, synth_corpus
from .training import TextCorpus, TrainConfig, train
from .viz import project_2d
from .vocab import build_vocab, tokenize

__all__ = ["main"]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _round6(x: float | None):
    return None if x is None else float(f"{x:.6g}")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        d=args.dim,
        vocab_size=args.vocab_size,
        n_captions=args.n_captions,
        captions_per_group=args.captions_per_group,
        caption_len=(args.caption_len_min, args.caption_len_max),
        gap_norm=args.gap_norm,
        audio_noise_std=args.audio_noise_std,
        seed=args.seed,
        paraphrase_diversity=args.paraphrase_diversity,
        normalize_audio=not args.raw_audio,
    )
    corpus = synth_corpus(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "bin" if args.binary else "jsonl"
    fileio.write_captions(out / "captions.jsonl", corpus.ids, corpus.group_ids, corpus.captions)
    fileio.write_embeddings(out / f"text_embeddings.{ext}", corpus.text_embeddings,
                            binary=args.binary)
    fileio.write_embeddings(out / f"audio_embeddings.{ext}", corpus.audio_embeddings,
                            binary=args.binary)
    fileio.write_gap(out / "planted_gap.json",
                     GapVector(corpus.planted_gap, n_pairs=len(corpus.audio_embeddings)))
    print(f"captions {len(corpus.captions)}")
    print(f"groups {len(corpus.audio_embeddings)}")
    print(f"dim {cfg.d}")
    print(f"gap_norm {_fmt(cfg.gap_norm)}")
    return 0


def _groups_from_files(emb_path: str, cap_path: str) -> list[CaptionGroup]:
    embs = fileio.read_embeddings(emb_path)
    ids, group_ids, _ = fileio.read_captions(cap_path)
    gid_of = dict(zip(ids, group_ids))
    by_group: dict[str, list] = {}
    for item in embs:
        gid = gid_of.get(item.id)
        if gid is None:
            raise fileio.FileFormatError(f"embedding id {item.id!r} has no caption record")
        by_group.setdefault(gid, []).append(item)
    return [CaptionGroup(group_id=g, embeddings=e) for g, e in by_group.items()]


def _cmd_sigma(args) -> int:
    sigma = estimate_sigma(_groups_from_files(args.embeddings, args.captions))
    print(f"sigma {_fmt(sigma)}")
    print(f"sigma_sq {_fmt(sigma * sigma)}")
    return 0


def _cmd_gap_stats(args) -> int:
    audio = fileio.read_embeddings(args.audio)
    text = fileio.read_embeddings(args.text)
    gap = gap_vector(audio, text)
    fileio.write_gap(args.out, gap)
    print(f"dim {gap.dim}")
    print(f"n_pairs {gap.n_pairs}")
    print(f"l2 {_fmt(float(np.linalg.norm(gap.values)))}")
    print(f"linf {_fmt(linf_norm(Embedding(gap.values)))}")
    return 0


def _merge_config(preset_name: str, config_path: str | None, args) -> tuple[dict, dict]:
    """flags > config file > preset."""
    preset = PRESETS[preset_name]
    dec_cfg = dict(preset["decoder"])
    train_cfg = dict(preset["train"])
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        dec_cfg.update(file_cfg.get("decoder", {}))
        train_cfg.update(file_cfg.get("train", {}))
    flag_map_dec = {"m": args.model_dim, "heads": args.heads, "layers": args.layers,
                    "k": args.prefix_len, "max_len": args.max_len}
    flag_map_train = {"epochs": args.epochs, "batch_size": args.batch_size,
                      "peak_lr": args.peak_lr, "warmup_epochs": args.warmup_epochs,
                      "lr_decay_factor": args.lr_decay_factor,
                      "lr_decay_every": args.lr_decay_every}
    dec_cfg.update({k: v for k, v in flag_map_dec.items() if v is not None})
    train_cfg.update({k: v for k, v in flag_map_train.items() if v is not None})
    return dec_cfg, train_cfg


def _cmd_train(args) -> int:
    ids, group_ids, texts = fileio.read_captions(args.captions)
    embs = fileio.read_embeddings(args.embeddings)
    corpus = TextCorpus(ids=ids, group_ids=group_ids, captions=texts, embeddings=embs)
    dec_cfg, train_cfg = _merge_config(args.preset, args.config, args)

    strategy = args.strategy.replace("-", "_")
    noise = None
    gap = None
    if strategy == "noise_inject":
        if args.sigma is not None and args.sigma_sq is not None:
            raise ValueError("pass either --sigma or --sigma-sq, not both")
        if args.sigma is not None:
            noise = NoiseConfig(sigma=args.sigma, seed=args.noise_seed)
        elif args.sigma_sq is not None:
            noise = NoiseConfig.from_variance(args.sigma_sq, seed=args.noise_seed)
        elif PRESETS[args.preset]["noise_sigma_sq"] is not None:
            noise = NoiseConfig.from_variance(PRESETS[args.preset]["noise_sigma_sq"],
                                              seed=args.noise_seed)
        else:
            raise ValueError("strategy noise-inject needs --sigma or --sigma-sq")
    if strategy == "embedding_shift":
        if not args.gap:
            raise ValueError("strategy embedding-shift needs --gap FILE")
        gap = fileio.read_gap(args.gap)

    cfg = TrainConfig(strategy=strategy, noise=noise, gap=gap, seed=args.seed, **train_cfg)
    vocab = build_vocab(texts, min_count=args.min_count)
    dec = PrefixDecoder.build(DecoderConfig(d=embs.dim, **dec_cfg), vocab, seed=args.seed)
    report = train(corpus, dec, cfg)
    fileio.save_checkpoint(args.checkpoint, dec)
    report.checkpoint_path = str(args.checkpoint)
    if args.report:
        fileio.write_json_report(args.report, report.to_dict())
    print(f"epochs {cfg.epochs}")
    print(f"final_loss {_fmt(report.epoch_losses[-1])}")
    print(f"wall_time_s {_fmt(report.wall_time_s)}")
    print(f"checkpoint {args.checkpoint}")
    return 0


def _cmd_infer(args) -> int:
    dec = fileio.load_checkpoint(args.checkpoint)
    audio = fileio.read_embeddings(args.audio)
    memory = None
    if args.strategy in ("nn", "projection"):
        if not (args.memory_embeddings and args.memory_captions):
            raise ValueError(f"strategy {args.strategy} needs --memory-embeddings and --memory-captions")
        mem_embs = fileio.read_embeddings(args.memory_embeddings)
        _, _, mem_caps = fileio.read_captions(args.memory_captions)
        memory = Memory(embeddings=mem_embs, captions=mem_caps)
    renorm = {"auto": None, "always": True, "never": False}[args.renormalize]
    proj_cfg = ProjectionConfig(tau=args.tau, renormalize=renorm)

    out_ids, out_groups, out_texts = [], [], []
    for item in audio:
        if args.strategy == "direct":
            caption = decode_direct(dec, item)
        elif args.strategy == "nn":
            caption = decode_nn(dec, item, memory)
        else:
            caption = decode_projection(dec, item, memory, proj_cfg)
        out_ids.append(item.id)
        out_groups.append(item.id)
        out_texts.append(caption if caption else "<empty>")
    fileio.write_captions(args.out, out_ids, out_groups, out_texts)
    print(f"decoded {len(out_ids)}")
    print(f"strategy {args.strategy}")
    return 0


_TABLE_COLUMNS = ["BLEU_1", "BLEU_2", "BLEU_3", "BLEU_4", "METEOR", "ROUGE_L",
                  "CIDEr", "SPICE", "SPIDEr"]


def _cmd_eval(args) -> int:
    cand_ids, cand_groups, cand_texts = fileio.read_captions(args.candidates)
    _, ref_groups, ref_texts = fileio.read_captions(args.references)
    refs_by_group: dict[str, list[list[str]]] = {}
    for gid, text in zip(ref_groups, ref_texts):
        refs_by_group.setdefault(gid, []).append(tokenize(text))
    pairs = []
    for cid, gid, text in zip(cand_ids, cand_groups, cand_texts):
        refs = refs_by_group.get(gid)
        if not refs:
            raise fileio.FileFormatError(f"candidate {cid!r}: no references for group {gid!r}")
        cand_tokens = [] if text == "<empty>" else tokenize(text)
        pairs.append(EvalPair.from_strings(cand_tokens, refs))
    report = evaluate(pairs)
    payload = report.to_dict()
    for key in ("bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "cider"):
        payload[key] = _round6(payload[key])
    if args.report:
        fileio.write_json_report(args.report, payload)
    values = [payload["bleu1"], payload["bleu2"], payload["bleu3"], payload["bleu4"],
              None, payload["rougeL"], payload["cider"], None, None]
    cells = ["n/a" if v is None else _fmt(v) for v in values]
    width = 10
    print(f"pairs {report.n_pairs}")
    print("".join(c.ljust(width) for c in _TABLE_COLUMNS))
    print("".join(c.ljust(width) for c in cells))
    return 0


def _cmd_project2d(args) -> int:
    sets: list[tuple[str, EmbeddingSet]] = []
    for path in args.inputs:
        sets.append((Path(path).name, fileio.read_embeddings(path)))
    dims = {s.dim for _, s in sets}
    if len(dims) != 1:
        raise ValueError(f"input files have mixed dimensions {sorted(dims)}")
    pooled = np.concatenate([s.matrix for _, s in sets], axis=0)
    coords = project_2d(pooled)
    lines = ["file,modality,id,x,y"]
    row = 0
    for name, s in sets:
        for item in s:
            x, y = coords[row]
            lines.append(f"{name},{s.modality},{item.id},{_fmt(x)},{_fmt(y)}")
            row += 1
    fileio.atomic_write_bytes(args.out, ("\n".join(lines) + "\n").encode("utf-8"))
    print(f"points {row}")
    print(f"out {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capgap", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic paired corpus")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dim", type=int, default=32)
    sp.add_argument("--vocab-size", type=int, default=60)
    sp.add_argument("--n-captions", type=int, default=500)
    sp.add_argument("--captions-per-group", type=int, default=5)
    sp.add_argument("--caption-len-min", type=int, default=3)
    sp.add_argument("--caption-len-max", type=int, default=5)
    sp.add_argument("--gap-norm", type=float, default=0.5)
    sp.add_argument("--audio-noise-std", type=float, default=0.05)
    sp.add_argument("--paraphrase-diversity", type=float, default=1.0)
    sp.add_argument("--raw-audio", action="store_true",
                    help="skip audio L2 normalization (keeps the planted gap exact)")
    sp.add_argument("--binary", action="store_true", help="write packed float32 embeddings")
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("sigma", help="estimate the noise width from caption groups")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--captions", required=True)
    sp.set_defaults(func=_cmd_sigma)

    sp = sub.add_parser("gap-stats", help="centroid gap between two embedding files")
    sp.add_argument("--audio", required=True)
    sp.add_argument("--text", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_gap_stats)

    sp = sub.add_parser("train", help="train the prefix decoder on captions + text embeddings")
    sp.add_argument("--captions", required=True)
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--report")
    sp.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    sp.add_argument("--config", help="JSON file with decoder/train overrides")
    sp.add_argument("--min-count", type=int, default=1)
    sp.add_argument("--model-dim", type=int)
    sp.add_argument("--heads", type=int)
    sp.add_argument("--layers", type=int)
    sp.add_argument("--prefix-len", type=int)
    sp.add_argument("--max-len", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--peak-lr", type=float)
    sp.add_argument("--warmup-epochs", type=int)
    sp.add_argument("--lr-decay-factor", type=float)
    sp.add_argument("--lr-decay-every", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--strategy", choices=["none", "noise-inject", "embedding-shift"],
                    default="none")
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--sigma-sq", type=float)
    sp.add_argument("--noise-seed", type=int, default=0)
    sp.add_argument("--gap", help="gap vector file for embedding-shift")
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("infer", help="decode audio embeddings into captions")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--audio", required=True)
    sp.add_argument("--strategy", choices=["direct", "nn", "projection"], default="direct")
    sp.add_argument("--memory-embeddings")
    sp.add_argument("--memory-captions")
    sp.add_argument("--tau", type=float, default=0.01)
    sp.add_argument("--renormalize", choices=["auto", "always", "never"], default="auto")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_infer)

    sp = sub.add_parser("eval", help="score candidate captions against references")
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--references", required=True)
    sp.add_argument("--report")
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("project2d", help="pooled 2D principal projection to CSV")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_project2d)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
