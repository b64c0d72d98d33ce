"""HTTP embedding server for frozen transformer encoders.

Wraps a tokenizer/model pair behind three endpoints: GET /info reports the
loaded model's token budget and embedding dimension, POST /count_tokens
returns per-text token counts, and POST /embed returns one fixed-length
vector per text.  Counting and embedding share a tokenizer configuration,
so a text accepted by the counter is never rejected by the embedder.
"""

from embed_server.engine import KNOWN_MODELS, EmbedEngine, OverBudgetError, load_engine
from embed_server.server import create_app

__all__ = [
    "KNOWN_MODELS",
    "EmbedEngine",
    "OverBudgetError",
    "load_engine",
    "create_app",
]
