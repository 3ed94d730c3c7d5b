"""Bundled prompt-template assets with pinned digests.

Templates are versioned text files shipped inside the package. Each has a
pinned SHA-256 so silent drift of a template is detectable; pass
``verify=False`` to load a deliberately edited asset (the caller should then
record the actual digest in its run metadata).
"""

from __future__ import annotations

import hashlib
from importlib import resources

from .errors import PromptAssetError

EXTRACTION_PROMPT = "extraction_prompt.txt"
LLM_JUDGE_PROMPT = "llm_judge_prompt.txt"
QUESTION_GEN_PROMPT = "question_gen_prompt.txt"
MITIGATION_STAGE1_GENERAL = "mitigation_stage1_general.txt"
MITIGATION_STAGE1_TRIPLET = "mitigation_stage1_triplet.txt"
MITIGATION_STAGE2 = "mitigation_stage2.txt"

PINNED_DIGESTS = {
    EXTRACTION_PROMPT: "5610dd1fe7ad0fac6825877be2a5094639df643a275d6958c6aa679241ad0976",
    LLM_JUDGE_PROMPT: "a69933494b27d60cab02944b73033bc2968853f1f382a6370a39268484fa8bc0",
    QUESTION_GEN_PROMPT: "c397f87b145065d451b69ddadacb5dedd26df9fdb761bb762a3efc9e67ac21a2",
    MITIGATION_STAGE1_GENERAL: "c0603834a170711548836683c1a87e7c1d7f6764ece411dbecbbf13e3bb54ae2",
    MITIGATION_STAGE1_TRIPLET: "faffb5b7bb566dde2301603a043fe5eeba8b1e169492c29d1bdc2d15d21bca3d",
    MITIGATION_STAGE2: "d9ee4f2c90b6eae1f882437eeb5e4b9ae3c7fb05df1df21ca805988c5b5cced6",
}

SYNONYMS_ASSET = "synonyms.json"


def asset_text(name: str) -> str:
    try:
        return (resources.files("kghalu") / "assets" / name).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise PromptAssetError(f"missing bundled asset {name!r}") from exc


def asset_digest(name: str) -> str:
    data = (resources.files("kghalu") / "assets" / name).read_bytes()
    return hashlib.sha256(data).hexdigest()


def load_prompt(name: str, verify: bool = True) -> str:
    text = asset_text(name)
    if verify:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        pinned = PINNED_DIGESTS.get(name)
        if pinned is None:
            raise PromptAssetError(f"no pinned digest for asset {name!r}")
        if digest != pinned:
            raise PromptAssetError(
                f"asset {name!r} drifted from its pinned digest "
                f"(expected {pinned[:12]}..., got {digest[:12]}...)"
            )
    return text
