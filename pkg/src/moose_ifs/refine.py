"""Contract extraction, contract-guided generation and IFS-guided refinement.

The pipeline only ever scores generated code against the contract the
extractor produced from the description. Ground truth enters through the
benchmark harness, never here.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol

from .contract import ContractError, PhysicsContract, SchemaError, contract_to_dict, extract_json_payload, load_contract, save_contract
from .hit import ParseError, parse_input
from .ifs import ScoreConfig, ViolationReport, evaluate
from .reconstruct import reconstruct_contract
from .registry import MappingRegistry, default_registry

logger = logging.getLogger(__name__)

ROLES = ("extractor", "generator", "refiner")
PRESETS = ("direct", "specgen", "pde_refine")
API_KEY_ENV = "IFS_LLM_API_KEY"


class EndpointError(RuntimeError):
    pass


class ExtractionError(RuntimeError):
    pass


class GenerationEndpoint(Protocol):
    def complete(self, prompt: str, role: str) -> str: ...


def load_prompt(name: str) -> str:
    return resources.files("moose_ifs").joinpath(f"data/prompts/{name}.txt").read_text(encoding="utf-8")


def _fill(template: str, **slots: str) -> str:
    for key, value in slots.items():
        template = template.replace(f"<{key.replace('_', ' ')}>", value)
    return template


_CODE_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_code_payload(text: str) -> str:
    """First fenced block that looks like HIT, else the whole response."""
    for body in _CODE_FENCE_RE.findall(text):
        if "[" in body:
            return body.strip() + "\n"
    return text.strip() + "\n"


# --- stages -----------------------------------------------------------------


def extract_contract(description: str, endpoint: GenerationEndpoint) -> PhysicsContract:
    """Ask the extractor for a contract; one re-ask quoting the schema error."""
    prompt = _fill(load_prompt("extract"), description=description)
    response = endpoint.complete(prompt, "extractor")
    try:
        return load_contract(extract_json_payload(response))
    except (SchemaError, ContractError) as exc:
        first = exc
    logger.info("contract rejected, re-asking: %s", first)
    retry = (
        f"{prompt}\n\nYour previous answer was rejected: {first}\n"
        "Return ONLY the corrected JSON object."
    )
    response = endpoint.complete(retry, "extractor")
    try:
        return load_contract(extract_json_payload(response))
    except (SchemaError, ContractError) as exc:
        raise ExtractionError(f"contract extraction failed twice: {exc}") from exc


def generate_code(contract: PhysicsContract, endpoint: GenerationEndpoint) -> str:
    prompt = _fill(load_prompt("specgen"), contract=save_contract(contract))
    return extract_code_payload(endpoint.complete(prompt, "generator"))


def generate_direct(description: str, endpoint: GenerationEndpoint) -> str:
    prompt = _fill(load_prompt("direct"), description=description)
    return extract_code_payload(endpoint.complete(prompt, "generator"))


def feedback_document(report: ViolationReport) -> str:
    """The part of the machine report sent back to the refiner."""
    return json.dumps({"score": report.score, "violations": report.violations}, indent=2, default=str)


def refine_once(code: str, report: ViolationReport, endpoint: GenerationEndpoint) -> str:
    if not report.violations:
        raise ValueError("refine_once needs a report with at least one violation")
    prompt = _fill(load_prompt("refine"), code=code, structured_violation_report=feedback_document(report))
    return extract_code_payload(endpoint.complete(prompt, "refiner"))


# --- pipeline ---------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    n_max: int = 2
    tau_ifs: float = 0.85
    delta_coef: float = 0.1
    eps0: float = 1e-12
    preset: str = "pde_refine"

    def __post_init__(self) -> None:
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if not 0 < self.tau_ifs <= 1:
            raise ValueError("tau_ifs must lie in (0, 1]")
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {PRESETS}")

    @property
    def score_config(self) -> ScoreConfig:
        return ScoreConfig(self.delta_coef, self.eps0)


@dataclass
class IterationRecord:
    index: int
    role: str
    code: str
    ifs: float | None = None
    report: dict | None = None
    accepted: bool | None = None
    parse_error: str | None = None


@dataclass
class PipelineTrace:
    description: str
    preset: str
    contract: dict | None = None
    initial: IterationRecord | None = None
    iterations: list = field(default_factory=list)
    final_code: str | None = None
    final_ifs: float | None = None
    error: dict | None = None

    @property
    def accepted(self) -> list:
        return [r for r in self.iterations if r.accepted]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str)


def score_code(
    code: str,
    contract: PhysicsContract,
    config: ScoreConfig | None = None,
    registry: MappingRegistry | None = None,
) -> tuple[ViolationReport, str | None]:
    """Reconstruct ``code`` and evaluate it against ``contract``.

    Unparseable code scores 0; its violations are those of an empty candidate.
    """
    registry = registry or default_registry()
    try:
        cand = reconstruct_contract(parse_input(code), registry)
    except ParseError as exc:
        report = evaluate(contract, PhysicsContract(), config, registry)
        report.score = 0.0
        report.parse_error = str(exc)
        return report, str(exc)
    return evaluate(contract, cand, config, registry), None


def _record(index, role, code, contract, cfg, registry) -> tuple[IterationRecord, ViolationReport]:
    report, err = score_code(code, contract, cfg.score_config, registry)
    rec = IterationRecord(index, role, code, report.score, report.to_dict(), parse_error=err)
    return rec, report


def run_pipeline(
    description: str,
    endpoint: GenerationEndpoint,
    config: PipelineConfig | None = None,
    *,
    generator: GenerationEndpoint | None = None,
    refiner: GenerationEndpoint | None = None,
    registry: MappingRegistry | None = None,
) -> PipelineTrace:
    """Extract, generate, verify and refine under a regression guard.

    ``endpoint`` serves every role unless ``generator`` or ``refiner`` is
    given. Endpoint or extraction failures stop the run and are recorded in
    ``trace.error``; everything produced so far stays in the trace.
    """
    cfg = config or PipelineConfig()
    registry = registry or default_registry()
    generator = generator or endpoint
    refiner = refiner or endpoint
    trace = PipelineTrace(description, cfg.preset)
    try:
        if cfg.preset == "direct":
            code = generate_direct(description, generator)
            trace.initial = IterationRecord(0, "generator", code)
            trace.final_code = code
            return trace

        contract = extract_contract(description, endpoint)
        trace.contract = contract_to_dict(contract)
        code = generate_code(contract, generator)
        best, best_report = _record(0, "generator", code, contract, cfg, registry)
        trace.initial = best
        n_max = cfg.n_max if cfg.preset == "pde_refine" else 0
        i = 0
        while best.ifs < cfg.tau_ifs and i < n_max and best_report.violations:
            i += 1
            new_code = refine_once(best.code, best_report, refiner)
            rec, report = _record(i, "refiner", new_code, contract, cfg, registry)
            # regression guard: only a strict improvement replaces the best
            rec.accepted = rec.ifs > best.ifs
            trace.iterations.append(rec)
            if rec.accepted:
                best, best_report = rec, report
        trace.final_code = best.code
        trace.final_ifs = best.ifs
    except ExtractionError as exc:
        trace.error = {"kind": "extraction", "message": str(exc)}
    except EndpointError as exc:
        trace.error = {"kind": "endpoint", "message": str(exc)}
    if trace.error is not None and trace.initial is not None:
        best = max([trace.initial] + trace.accepted, key=lambda r: r.ifs if r.ifs is not None else -1.0)
        trace.final_code, trace.final_ifs = best.code, best.ifs
    return trace


# --- endpoints --------------------------------------------------------------


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ReplayEndpoint:
    """Plays back a JSONL session of {role, prompt_sha256, response} records in order."""

    def __init__(self, path: str | Path) -> None:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise EndpointError(f"cannot read replay file: {exc}") from None
        self.records = [json.loads(line) for line in lines if line.strip()]
        self.position = 0

    def complete(self, prompt: str, role: str) -> str:
        if self.position >= len(self.records):
            raise EndpointError(f"replay exhausted after {self.position} calls")
        rec = self.records[self.position]
        if rec.get("role") != role or rec.get("prompt_sha256") != prompt_digest(prompt):
            raise EndpointError(f"replay diverged at call {self.position + 1} (role {role})")
        self.position += 1
        return rec["response"]


class RecordingEndpoint:
    """Wraps an endpoint and appends every exchange to a replay file."""

    def __init__(self, inner: GenerationEndpoint, path: str | Path) -> None:
        self.inner = inner
        self.path = Path(path)
        self.path.write_text("", encoding="utf-8")

    def complete(self, prompt: str, role: str) -> str:
        response = self.inner.complete(prompt, role)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"role": role, "prompt_sha256": prompt_digest(prompt), "response": response}) + "\n")
        return response


class HttpEndpoint:
    """OpenAI-compatible chat completions over HTTP at temperature 0."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None, timeout: float = 120.0) -> None:
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not key:
            raise EndpointError(f"no API key: set {API_KEY_ENV} or use a replay file")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.key = key
        self.timeout = timeout

    def complete(self, prompt: str, role: str) -> str:
        body = json.dumps({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        }).encode("utf-8")
        request = urllib.request.Request(
            self.url,
            data=body,
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.key}"},
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise EndpointError(f"{role} request failed: {exc}") from None
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EndpointError(f"{role} response has no message content") from None
