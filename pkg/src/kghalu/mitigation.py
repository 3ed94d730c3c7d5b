"""Training-free two-stage mitigation: describe first, then answer eyes-closed.

Stage 1 asks the multimodal provider for an image description (general or
triplet-focused); stage 2 answers the question text-only from that
description, with the image withheld. The stage templates are editable,
hash-pinned assets; their digests travel with every trace so substituted
wording is visible in run metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import MitigationError, ProviderError
from .prompts import (
    MITIGATION_STAGE1_GENERAL,
    MITIGATION_STAGE1_TRIPLET,
    MITIGATION_STAGE2,
    PINNED_DIGESTS,
    load_prompt,
)
from .providers import ChatMessage, ChatProvider, ChatRequest, ImagePart, TextPart


class MitigationMode(str, Enum):
    NONE = "none"
    GENERAL_DESCRIPTION = "general-description"
    TRIPLET_DESCRIPTION = "triplet-description"


_STAGE1_ASSET = {
    MitigationMode.GENERAL_DESCRIPTION: MITIGATION_STAGE1_GENERAL,
    MitigationMode.TRIPLET_DESCRIPTION: MITIGATION_STAGE1_TRIPLET,
}


@dataclass(frozen=True)
class MitigationTrace:
    mode: MitigationMode
    stage2_prompt: str
    final_answer: str
    image_attached_at_stage2: bool
    stage1_prompt: str | None = None
    stage1_description: str | None = None
    template_digests: tuple[str, ...] = ()

    def __post_init__(self):
        if self.mode is not MitigationMode.NONE:
            if self.image_attached_at_stage2:
                raise MitigationError(
                    "stage 2 must not attach the image when mitigation is active",
                    {"mode": self.mode.value},
                )
            if self.stage1_description is None or self.stage1_description not in self.stage2_prompt:
                raise MitigationError(
                    "stage 2 prompt must embed the stage 1 description verbatim",
                    {"mode": self.mode.value},
                )

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "stage1Prompt": self.stage1_prompt,
            "stage1Description": self.stage1_description,
            "stage2Prompt": self.stage2_prompt,
            "finalAnswer": self.final_answer,
            "imageAttachedAtStage2": self.image_attached_at_stage2,
            "templateDigests": list(self.template_digests),
        }


def _request_has_image(request: ChatRequest) -> bool:
    return bool(request.image_refs())


def mitigate(
    question: str,
    image_ref: str,
    provider: ChatProvider,
    mode: MitigationMode,
    model_id: str,
) -> MitigationTrace:
    """Run the two-stage pipeline for one question and return the full trace.

    mode NONE is the pass-through baseline: a single call with the image
    attached. Otherwise stage 1 sees the image and produces a description;
    stage 2 sees only the description plus the question.
    """
    if mode is MitigationMode.NONE:
        request = ChatRequest(
            model_id=model_id,
            messages=(ChatMessage("user", (TextPart(question), ImagePart(image_ref))),),
        )
        try:
            answer = provider.complete(request)
        except ProviderError as exc:
            raise MitigationError(
                f"baseline call failed: {exc}", {"mode": mode.value, "stage": 1}
            ) from exc
        return MitigationTrace(
            mode=mode,
            stage2_prompt=question,
            final_answer=answer,
            image_attached_at_stage2=_request_has_image(request),
        )

    stage1_asset = _STAGE1_ASSET[mode]
    stage1_prompt = load_prompt(stage1_asset, verify=False).replace("{question}", question)
    stage1_request = ChatRequest(
        model_id=model_id,
        messages=(ChatMessage("user", (TextPart(stage1_prompt), ImagePart(image_ref))),),
    )
    try:
        description = provider.complete(stage1_request)
    except ProviderError as exc:
        raise MitigationError(
            f"stage 1 failed: {exc}",
            {"mode": mode.value, "stage": 1, "stage1Prompt": stage1_prompt},
        ) from exc

    # question first: substituting the description last keeps it verbatim in
    # the prompt even when it happens to contain a literal "{question}"
    stage2_prompt = (
        load_prompt(MITIGATION_STAGE2, verify=False)
        .replace("{question}", question)
        .replace("{description}", description)
    )
    stage2_request = ChatRequest(
        model_id=model_id,
        messages=(ChatMessage("user", (TextPart(stage2_prompt),)),),
    )
    try:
        answer = provider.complete(stage2_request)
    except ProviderError as exc:
        raise MitigationError(
            f"stage 2 failed: {exc}",
            {
                "mode": mode.value,
                "stage": 2,
                "stage1Prompt": stage1_prompt,
                "stage1Description": description,
                "stage2Prompt": stage2_prompt,
            },
        ) from exc

    return MitigationTrace(
        mode=mode,
        stage1_prompt=stage1_prompt,
        stage1_description=description,
        stage2_prompt=stage2_prompt,
        final_answer=answer,
        image_attached_at_stage2=_request_has_image(stage2_request),
        template_digests=(PINNED_DIGESTS[stage1_asset], PINNED_DIGESTS[MITIGATION_STAGE2]),
    )


def collect_mitigated_responses(
    benchmark,
    provider: ChatProvider,
    mode: MitigationMode,
    model_id: str,
) -> tuple[dict[str, str], list[MitigationTrace]]:
    """Responses plus traces for every benchmark question, in benchmark order."""
    responses: dict[str, str] = {}
    traces: list[MitigationTrace] = []
    for item in benchmark.items:
        for qa in item.questions:
            trace = mitigate(qa.question, item.image_path, provider, mode, model_id)
            responses[qa.question_id] = trace.final_answer
            traces.append(trace)
    return responses, traces
