"""Descriptor-level music retrieval toolkit.

Ranks natural-language recommendation requests against canonical
descriptor-set keys, generates pseudo-labeled training triples (hard
negatives + teacher margins), and evaluates encoders with a resampled
descriptor-level Recall@k protocol.
"""

from .corpus import DescriptorSet, Track, load_corpus, make_descriptor_set, normalize_descriptor
from .densevec import EmbeddingMatrix, MockEmbedder, MockScorer, embed, load_matrix, save_matrix
from .evaluation import EvalReport, dataset_stats, evaluate, make_test_samples, recall_at_k
from .gpl import TrainingTriple, generate_triples, margin_label, mine_negatives
from .pairs import RequestPair, generate_pairs, sample_variations, split_sentences
from .ranker import build_index, rank
from .tfidf import TfIdfEncoder, TfIdfModel, fit, tokenize, transform

__version__ = "0.1.0"

__all__ = [
    "DescriptorSet",
    "Track",
    "load_corpus",
    "make_descriptor_set",
    "normalize_descriptor",
    "EmbeddingMatrix",
    "MockEmbedder",
    "MockScorer",
    "embed",
    "load_matrix",
    "save_matrix",
    "EvalReport",
    "dataset_stats",
    "evaluate",
    "make_test_samples",
    "recall_at_k",
    "TrainingTriple",
    "generate_triples",
    "margin_label",
    "mine_negatives",
    "RequestPair",
    "generate_pairs",
    "sample_variations",
    "split_sentences",
    "build_index",
    "rank",
    "TfIdfEncoder",
    "TfIdfModel",
    "fit",
    "tokenize",
    "transform",
    "__version__",
]
