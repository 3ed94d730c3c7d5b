from __future__ import annotations

from dataclasses import dataclass

DEFAULT_EMBEDDING_MODEL = "all-mpnet-base-v2"
DEFAULT_ENTAILMENT_MODEL = "cross-encoder/nli-deberta-v3-base"


@dataclass(frozen=True)
class SidecarConfig:
    bind_address: str = "127.0.0.1:8600"
    embedding_model_id: str = DEFAULT_EMBEDDING_MODEL
    entailment_model_id: str = DEFAULT_ENTAILMENT_MODEL
    max_batch_size: int = 128
    # "auto" tries the pretrained transformer models first and falls back to
    # the deterministic lexical backend when they cannot be loaded (offline
    # hosts); "transformer" and "lexical" force one or the other.
    backend: str = "auto"

    def __post_init__(self):
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")
        if self.backend not in ("auto", "transformer", "lexical"):
            raise ValueError(f"unknown backend {self.backend!r}")
        host, _, port = self.bind_address.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bind_address must be host:port, got {self.bind_address!r}")

    @property
    def host(self) -> str:
        return self.bind_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind_address.rsplit(":", 1)[1])
