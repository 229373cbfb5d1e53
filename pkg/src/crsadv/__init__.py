"""Adversarial robustness benchmark for conversational recommender systems."""
__version__ = "0.1.0"

from .corpus import (Dialogue, EvalInstance, Turn, extract_instances, load_corpus, load_opendialkg,
                     load_redial, split, truncate_utterance)
from .knowledge import KnowledgeBase, bundled_kb, load_kb
from .lexicon import Lexicon, bundled_lexicon, load_lexicon
from .metrics import aggregate, score
from .perturb import PerturbedInstance, cat1_add, cat1_change, cat2_add, cat2_change, perturb_corpus
from .report import compare, render

__all__ = [
    "Dialogue", "EvalInstance", "Turn", "extract_instances", "load_corpus", "load_opendialkg",
    "load_redial", "split", "truncate_utterance", "KnowledgeBase", "bundled_kb", "load_kb",
    "Lexicon", "bundled_lexicon", "load_lexicon", "aggregate", "score", "PerturbedInstance",
    "cat1_add", "cat1_change", "cat2_add", "cat2_change", "perturb_corpus", "compare", "render",
]
