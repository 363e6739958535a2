"""Unsupervised multilingual word-embedding alignment."""
from .csls import csls_scores, csls_topk
from .embeddings import EmbeddingSpace, Vocabulary, load_text_embeddings
from .errors import (ArgumentError, EvalError, IoError, MwalignError, ParseError, RefinementError,
                     ShapeError)
from .evaluation import evaluate_clws, load_dictionary, spearman_rho, word_translation_precision
from .mat import MappingSet, MatConfig, train_mat
from .mpsr import MpsrConfig, induce_lexicon, procrustes_solve, train_mpsr
from .checkpoint import load_checkpoint, save_checkpoint
from .pipeline import run_baseline_comparison, supervised_procrustes, train_joint
from .synthetic import ClusterSpec, generate_family, gold_precision
from .validation import mean_csls, multilingual_validation

__version__ = "0.1.0"
