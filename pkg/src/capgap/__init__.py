"""capgap: weakly-supervised audio captioning as embedding-space computation.

Train a prefix decoder to invert a text encoder from captions alone, then
caption audio embeddings through modality-gap bridging strategies: Gaussian
noise injection or embedding shift at training time, nearest-neighbor or
softmax-projection decoding at inference time. A synthetic paired-encoder
generator makes every strategy verifiable at desk scale.
"""

from .decoder import (DecoderConfig, MappingNetwork, PrefixDecoder, encode_prefix,
                      forward_logits, greedy_decode, nll_loss)
from .embeddings import (Embedding, EmbeddingSet, GapVector, centroid, cosine_similarity,
                         gap_vector, l2_normalize, linf_norm)
from .gap import CaptionGroup, NoiseConfig, estimate_sigma, inject_noise, shift_embedding
from .inference import (Memory, ProjectionConfig, decode_direct, decode_nn,
                        decode_projection, nearest_neighbor, project, projection_weights)
from .metrics import EvalPair, MetricReport, bleu, cider, evaluate, rouge_l
from .synth import PairedCorpus, SynthConfig, synth_audio_encoder, synth_corpus, synth_text_encoder
from .training import TextCorpus, TrainConfig, TrainReport, TrainingDiverged, lr_at, train
from .vocab import TokenSeq, Vocabulary, build_vocab, tokenize

__version__ = "0.1.0"
