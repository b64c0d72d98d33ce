"""Command-line entry point for the embedding server."""

from __future__ import annotations

import argparse
from typing import Optional, Sequence

from embed_server.engine import KNOWN_MODELS, REPR_MODES, load_engine
from embed_server.server import create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-server",
        description="Serve token counts and embeddings from a frozen encoder.",
    )
    parser.add_argument("--model", default="bert-base-uncased",
                        choices=sorted(KNOWN_MODELS),
                        help="checkpoint to load (default: %(default)s)")
    parser.add_argument("--repr", dest="repr_mode", default="token-mean",
                        choices=REPR_MODES,
                        help="sentence representation (default: %(default)s)")
    parser.add_argument("--port", type=int, default=8901,
                        help="TCP port to listen on (default: %(default)s)")
    parser.add_argument("--batch-size", type=int, default=8,
                        help="texts per inference batch (default: %(default)s)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.batch_size < 1:
        parser.error("--batch-size must be at least 1")
    import uvicorn

    # load on a background thread so /info can report 503 while the
    # checkpoint is coming up
    app = create_app(loader=lambda: load_engine(
        args.model, repr_mode=args.repr_mode, batch_size=args.batch_size))
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
