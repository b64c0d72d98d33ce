"""Tokenizing and embedding with a frozen transformer encoder.

The engine owns a tokenizer and a model in eval mode.  Token counts always
include the special tokens the model consumes, so the count reported for a
text is exactly the sequence length the embedder would see.  Truncation is
never applied: a text whose count exceeds the budget is rejected instead of
being silently shortened.
"""

from __future__ import annotations

import threading

import torch

# Published checkpoints this server is meant to wrap, with the token budget
# and embedding dimension each one must advertise.
KNOWN_MODELS: dict[str, tuple[int, int]] = {
    "bert-base-uncased": (512, 768),
    "longformer-base-4096": (4096, 768),
}

REPR_MODES = ("token-mean", "classifier-token")

# tokenizer.model_max_length is a sentinel around 1e30 when unset
_MAX_LENGTH_UNSET = 10**9


class OverBudgetError(ValueError):
    """A text tokenizes to more tokens than the model accepts."""


class EmbedEngine:
    """Counts tokens and embeds texts with one tokenizer/model pair.

    The fast tokenizer mutates shared state on every call and the model is
    no safer, so one lock serializes all use of either.  Concurrent callers
    therefore see exactly the vectors they would get alone.
    """

    def __init__(self, model_name, tokenizer, model, max_tokens, dimension,
                 repr_mode="token-mean", batch_size=8):
        if repr_mode not in REPR_MODES:
            raise ValueError(f"unknown sentence representation {repr_mode!r}")
        if batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        self.model_name = model_name
        self.tokenizer = tokenizer
        self.model = model
        self.max_tokens = int(max_tokens)
        self.dimension = int(dimension)
        self.repr_mode = repr_mode
        self.batch_size = int(batch_size)
        self._lock = threading.Lock()
        self.model.eval()

    def count(self, texts: list[str]) -> list[int]:
        """Token counts including special tokens, one per text."""
        with self._lock:
            return self._count_locked(list(texts))

    def embed(self, texts: list[str]) -> list[list[float]]:
        """One embedding per text, in input order.

        Raises OverBudgetError if any text exceeds the token budget; no
        partial results are produced in that case.
        """
        texts = list(texts)
        out: list[list[float]] = []
        with self._lock:
            for i, n in enumerate(self._count_locked(texts)):
                if n > self.max_tokens:
                    raise OverBudgetError(
                        f"text at index {i} is {n} tokens, over the "
                        f"{self.max_tokens}-token limit of {self.model_name}"
                    )
            for start in range(0, len(texts), self.batch_size):
                out.extend(self._embed_batch(texts[start:start + self.batch_size]))
        return out

    def _count_locked(self, texts: list[str]) -> list[int]:
        enc = self.tokenizer(texts, add_special_tokens=True)
        return [len(ids) for ids in enc["input_ids"]]

    def _embed_batch(self, batch: list[str]) -> list[list[float]]:
        enc = self.tokenizer(batch, add_special_tokens=True, padding=True,
                             return_tensors="pt")
        with torch.no_grad():
            hidden = self.model(**enc).last_hidden_state
        if self.repr_mode == "classifier-token":
            vecs = hidden[:, 0, :]
        else:
            # mean over non-padding positions of the final layer
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            vecs = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        return [v.tolist() for v in vecs.to(torch.float64)]


def load_engine(model_name: str, repr_mode: str = "token-mean",
                batch_size: int = 8) -> EmbedEngine:
    """Load a checkpoint and wrap it in an EmbedEngine.

    Known checkpoint names must come up with the budget and dimension
    published for them; anything else loads with whatever limits its own
    config declares.
    """
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name)
    dimension = int(model.config.hidden_size)
    max_tokens = int(getattr(tokenizer, "model_max_length", 0) or 0)
    if not 0 < max_tokens < _MAX_LENGTH_UNSET:
        max_tokens = int(model.config.max_position_embeddings)
    expected = KNOWN_MODELS.get(model_name)
    if expected is not None and (max_tokens, dimension) != expected:
        raise RuntimeError(
            f"{model_name} loaded with max_tokens={max_tokens}, "
            f"dimension={dimension}; expected {expected[0]}, {expected[1]}. "
            "The local checkpoint does not match the published one."
        )
    return EmbedEngine(model_name, tokenizer, model, max_tokens, dimension,
                       repr_mode=repr_mode, batch_size=batch_size)
