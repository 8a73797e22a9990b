"""Zero-shot LLM comparison harness.

Renders case features into a fixed-order key/value prompt, queries a local
generate endpoint (Ollama-style JSON over HTTP), parses true/false verdicts
and scores agreement against classifier predictions. Responses from a live
model are non-deterministic; tests run against a stub server or canned
transcripts instead.
"""

from __future__ import annotations

import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import requests

from .records import FeatureVector

DEFAULT_INSTRUCTION = (
    "Based on the above data collected from patient, please reply with true or "
    "false if the patient can be diagnosed as psychiatric patient"
)

KEY_SYSTOLIC_BP = "Systolic Blood Pressure"
KEY_RESPIRATORY_RATE = "Respiratory Rate"
KEY_CIRCULATION = "Blood Circulation Normality"
KEY_GCS = "GCS"
KEY_PULSE_RHYTHM = "Pulse Rhythm"
KEY_PREILLNESS = "Any Preillness"
KEY_MENTAL = "Mental Sickness Possibility"
KEY_PSYCHIATRIC = "Psychiatric Syndrom Presence"
KEY_ALCOHOLIC = "Alcoholic Possibility"
KEY_INTOXICATION = "Intoxication Possibility"

_FULL_KEY_ORDER = (
    KEY_SYSTOLIC_BP,
    KEY_RESPIRATORY_RATE,
    KEY_CIRCULATION,
    KEY_GCS,
    KEY_PULSE_RHYTHM,
    KEY_PREILLNESS,
    KEY_MENTAL,
    KEY_PSYCHIATRIC,
    KEY_ALCOHOLIC,
    KEY_INTOXICATION,
)


class MissingFeature(KeyError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"prompt template key {key!r} missing from feature map")


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    """Ordered display keys plus the instruction sentence."""

    keys: tuple[str, ...]
    instruction: str = DEFAULT_INSTRUCTION

    def __post_init__(self):
        if not self.keys:
            raise ValueError("prompt template needs at least one key")
        object.__setattr__(self, "keys", tuple(self.keys))


# ten-key variant as sampled, and the nine-key variant that drops the
# preillness slot eliminated by feature selection
TEMPLATE_WITH_PREILLNESS = PromptTemplate(_FULL_KEY_ORDER)
TEMPLATE_DEFAULT = PromptTemplate(tuple(k for k in _FULL_KEY_ORDER if k != KEY_PREILLNESS))


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def build_prompt(features: Mapping[str, object], template: PromptTemplate = TEMPLATE_DEFAULT) -> str:
    """Render one line per template key as 'Key': value, then the instruction.

    The final key line carries no trailing comma; a blank line separates the
    listing from the instruction. Booleans render as True/False, numbers
    bare. Raises MissingFeature for any template key absent from the map.
    """
    lines = []
    for i, key in enumerate(template.keys):
        if key not in features:
            raise MissingFeature(key)
        suffix = "," if i < len(template.keys) - 1 else ""
        lines.append(f"'{key}': {_render_value(features[key])}{suffix}")
    return "\n".join(lines) + "\n\n" + template.instruction


def prompt_values_from_vector(fv: FeatureVector, include_preillness: bool = False) -> dict:
    """Map a FeatureVector onto the prompt display keys."""
    values = {
        KEY_SYSTOLIC_BP: fv.systolic_bp,
        KEY_RESPIRATORY_RATE: fv.respiratory_rate,
        KEY_CIRCULATION: int(fv.circulation_normal),
        KEY_GCS: int(fv.gcs),
        KEY_PULSE_RHYTHM: bool(fv.pulse_rhythm_regular),
        KEY_MENTAL: bool(fv.mental_abnormality),
        KEY_PSYCHIATRIC: bool(fv.psychiatric_symptoms),
        KEY_ALCOHOLIC: bool(fv.alcoholism),
        KEY_INTOXICATION: bool(fv.intoxication),
    }
    if include_preillness:
        values[KEY_PREILLNESS] = bool(fv.preillness)
    return values


class Verdict(Enum):
    TRUE = "true"
    FALSE = "false"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class LlmVerdict:
    raw_response: str
    verdict: Verdict
    latency: float = 0.0


_WORD_RE = re.compile(r"[a-z']+")
_FLIP_BEFORE = {"not", "never", "isn't", "isnt"}


def parse_verdict(text: str) -> Verdict:
    """Scan for standalone true/false tokens, case-insensitive.

    The last occurrence wins; a negation word immediately before a token
    flips it ("not true" reads as false). No token at all is Ambiguous.
    """
    words = _WORD_RE.findall(text.lower())
    verdict = Verdict.AMBIGUOUS
    for i, word in enumerate(words):
        if word not in ("true", "false"):
            continue
        value = word == "true"
        if i > 0 and words[i - 1] in _FLIP_BEFORE:
            value = not value
        verdict = Verdict.TRUE if value else Verdict.FALSE
    return verdict


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach the generate endpoint.

    ``options`` is passed through to the server untouched (decoding
    parameters are the server's business). Environment overrides:
    RESCUE_TRIAGE_LLM_URL and RESCUE_TRIAGE_LLM_MODEL.
    """

    base_url: str = "http://localhost:11434"
    model: str = "llama3.1:8b"
    timeout: float = 60.0
    retries: int = 2
    backoff: float = 0.5
    options: dict = field(default_factory=dict)

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        env = {}
        if os.environ.get("RESCUE_TRIAGE_LLM_URL"):
            env["base_url"] = os.environ["RESCUE_TRIAGE_LLM_URL"]
        if os.environ.get("RESCUE_TRIAGE_LLM_MODEL"):
            env["model"] = os.environ["RESCUE_TRIAGE_LLM_MODEL"]
        env.update(overrides)
        return cls(**env)


def query(prompt: str, cfg: EndpointConfig) -> LlmVerdict:
    """Send one non-streaming generate request and parse the verdict.

    Retries transport failures and 5xx responses with exponential backoff,
    at most cfg.retries times; a hard timeout bounds every attempt.
    """
    payload = {"model": cfg.model, "prompt": prompt, "stream": False}
    if cfg.options:
        payload["options"] = dict(cfg.options)
    url = cfg.base_url.rstrip("/") + "/api/generate"

    last_error: Optional[str] = None
    start = time.perf_counter()
    for attempt in range(cfg.retries + 1):
        if attempt:
            time.sleep(cfg.backoff * (2 ** (attempt - 1)))
        try:
            resp = requests.post(url, json=payload, timeout=cfg.timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
            continue
        if resp.status_code >= 500:
            last_error = f"server error {resp.status_code}"
            continue
        if resp.status_code != 200:
            raise TransportError(f"generate endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            text = resp.json()["response"]
        except (ValueError, KeyError) as exc:
            raise TransportError(f"malformed generate response: {exc}") from exc
        latency = time.perf_counter() - start
        return LlmVerdict(raw_response=text, verdict=parse_verdict(text), latency=latency)
    raise TransportError(f"generate request failed after {cfg.retries + 1} attempts: {last_error}")


def query_many(prompts: Sequence[str], cfg: EndpointConfig, max_in_flight: int = 1) -> list[LlmVerdict]:
    """Query independent prompts, preserving order, with an in-flight cap."""
    if max_in_flight <= 1:
        return [query(p, cfg) for p in prompts]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda p: query(p, cfg), prompts))


def transcript_verdicts(transcript: Sequence[str]) -> list[LlmVerdict]:
    """Turn canned response texts into verdicts (offline stub path)."""
    return [LlmVerdict(raw_response=t, verdict=parse_verdict(t)) for t in transcript]


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CaseComparison:
    case_id: str
    ml_positive: bool
    llm_verdict: Verdict
    match: bool
    reference: Optional[bool] = None


@dataclass(frozen=True)
class AgreementReport:
    rows: tuple[CaseComparison, ...]
    mismatch_count: int
    agreement_rate: float
    ambiguous_cases: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "mismatch_count": self.mismatch_count,
            "agreement_rate": self.agreement_rate,
            "ambiguous_cases": list(self.ambiguous_cases),
            "rows": [
                {
                    "case_id": r.case_id,
                    "ml_prediction": r.ml_positive,
                    "llm_verdict": r.llm_verdict.value,
                    "match": r.match,
                    **({"reference": r.reference} if r.reference is not None else {}),
                }
                for r in self.rows
            ],
        }


def compare(
    ml_predictions: Sequence[bool | int],
    llm_verdicts: Sequence[LlmVerdict | Verdict],
    case_ids: Optional[Sequence[str]] = None,
    reference_labels: Optional[Sequence[bool | int]] = None,
) -> AgreementReport:
    """Per-case agreement table between classifier and LLM verdicts.

    An Ambiguous verdict counts as a mismatch and is itemized separately.
    Reference labels, when given, are carried through into the rows.
    """
    if len(ml_predictions) != len(llm_verdicts):
        raise LengthMismatch(f"{len(ml_predictions)} predictions vs {len(llm_verdicts)} verdicts")
    if case_ids is not None and len(case_ids) != len(ml_predictions):
        raise LengthMismatch("case_ids length differs from predictions")
    if reference_labels is not None and len(reference_labels) != len(ml_predictions):
        raise LengthMismatch("reference_labels length differs from predictions")

    rows = []
    ambiguous = []
    mismatches = 0
    for i, (ml, lv) in enumerate(zip(ml_predictions, llm_verdicts)):
        verdict = lv.verdict if isinstance(lv, LlmVerdict) else lv
        case_id = case_ids[i] if case_ids is not None else f"case-{i}"
        ml_bool = bool(ml)
        if verdict == Verdict.AMBIGUOUS:
            match = False
            ambiguous.append(case_id)
        else:
            match = (verdict == Verdict.TRUE) == ml_bool
        if not match:
            mismatches += 1
        reference = bool(reference_labels[i]) if reference_labels is not None else None
        rows.append(CaseComparison(case_id, ml_bool, verdict, match, reference))
    rate = 1.0 - mismatches / len(rows) if rows else 1.0
    return AgreementReport(tuple(rows), mismatches, rate, tuple(ambiguous))
