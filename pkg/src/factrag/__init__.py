"""factrag: retrieval-augmented fact verification.

Per-claim knowledge stores are chunked, embedded and persisted as exact-
search vector stores; at verification time the claim is embedded, candidate
chunks are fetched by cosine kNN and diversified with MMR, a few-shot prompt
is assembled, and a single LLM call produces the evidence QA pairs and the
veracity verdict.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config
from .pipeline import Runner, evaluate_labels

__all__ = ["RunConfig", "Runner", "evaluate_labels", "load_config", "__version__"]
