import argparse

import uvicorn

from .app import create_app
from .config import SidecarConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kghalu-sidecar")
    parser.add_argument("--bind", default="127.0.0.1:8600", help="host:port to serve on")
    parser.add_argument("--embedding-model", default=SidecarConfig.embedding_model_id)
    parser.add_argument("--entailment-model", default=SidecarConfig.entailment_model_id)
    parser.add_argument("--max-batch-size", type=int, default=128)
    parser.add_argument(
        "--backend",
        default="auto",
        choices=("auto", "transformer", "lexical"),
        help="auto falls back to the lexical backend when model weights are unavailable",
    )
    args = parser.parse_args(argv)
    config = SidecarConfig(
        bind_address=args.bind,
        embedding_model_id=args.embedding_model,
        entailment_model_id=args.entailment_model,
        max_batch_size=args.max_batch_size,
        backend=args.backend,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
