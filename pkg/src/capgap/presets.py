"""Named configuration presets.

`desk` is sized so that a corpus of a few hundred template captions trains
in well under five minutes on one CPU core. `full` keeps the large-data
recipe verbatim (wide 4-layer/4-head decoder, 30 epochs at peak 2e-5 with
5-epoch warmup and x0.2 decay every 10, noise variance 0.013); it is far too
big to learn anything from desk-scale corpora and exists for runs on real
exported embeddings.
"""

from __future__ import annotations

PRESETS: dict[str, dict] = {
    "desk": {
        "decoder": {
            "m": 64,
            "heads": 2,
            "layers": 2,
            "k": 8,
            "max_len": 12,
        },
        "train": {
            "epochs": 120,
            "batch_size": 64,
            "peak_lr": 2e-3,
            "warmup_epochs": 5,
            "lr_decay_factor": 0.3,
            "lr_decay_every": 40,
        },
        "noise_sigma_sq": None,   # estimate from caption groups at desk scale
        "tau": 0.01,
    },
    "full": {
        "decoder": {
            "m": 768,
            "heads": 4,
            "layers": 4,
            "k": 8,
            "max_len": 30,
        },
        "train": {
            "epochs": 30,
            "batch_size": 64,
            "peak_lr": 2e-5,
            "warmup_epochs": 5,
            "lr_decay_factor": 0.2,
            "lr_decay_every": 10,
        },
        "noise_sigma_sq": 0.013,
        "tau": 0.01,
    },
}
