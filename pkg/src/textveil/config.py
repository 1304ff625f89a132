"""Single structured config file for the whole toolchain.

YAML with strict keys (unknown keys are an error), environment-variable
overrides for the three backend endpoints, and loaders that resolve packaged
defaults for the template, rules, allowlist, gazetteer, and task list.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .annotate import CalibrationConfig
from .embed import EmbeddingConfig
from .evaluate import EvalProtocolConfig, TaskSpec
from .gateway import ChatBackendConfig, PromptTemplate, default_template, load_template
from .leakscan import ScanConfig
from .redact import (
    Allowlist,
    RedactionRuleSet,
    default_allowlist,
    default_gazetteer,
    default_rules,
    load_allowlist,
    load_rules,
    make_detector,
)

ENV_CHAT = "TEXTVEIL_CHAT_ENDPOINT"
ENV_NER = "TEXTVEIL_NER_ENDPOINT"
ENV_EMBED = "TEXTVEIL_EMBED_ENDPOINT"


class ConfigError(ValueError):
    pass


_TOP_KEYS = {
    "corpus_path",
    "planted_path",
    "store_dir",
    "labels_path",
    "template_path",
    "rules_path",
    "allowlist_path",
    "gazetteer_path",
    "tasks_path",
    "halt_fraction",
    "chat",
    "ner",
    "embedding",
    "scan",
    "eval",
    "calibration",
    "service",
}
_SECTION_KEYS = {
    "chat": {
        "endpoint_url",
        "model_name",
        "temperature",
        "timeout",
        "max_retries",
        "concurrency_limit",
        "response_field_path",
    },
    "ner": {"endpoint_url"},
    "embedding": {"endpoint_url", "model_name", "dim", "normalize", "batch_size", "timeout"},
    "scan": {
        "fuzzy_threshold",
        "name_token_min_len",
        "sample_fraction_for_manual_review",
        "sample_seed",
    },
    "eval": {"c_grid", "cv_folds", "repeats", "train_fraction", "seed"},
    "calibration": {"n_bins", "z"},
    "service": {"host", "port", "frontend_dir"},
}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    frontend_dir: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: Path
    store_dir: Path
    planted_path: Path | None = None
    labels_path: Path | None = None
    template_path: Path | None = None
    rules_path: Path | None = None
    allowlist_path: Path | None = None
    gazetteer_path: Path | None = None
    tasks_path: Path | None = None
    halt_fraction: float = 0.05
    chat: ChatBackendConfig = field(default_factory=lambda: ChatBackendConfig("mock://0"))
    ner_endpoint: str = "builtin"
    embedding: EmbeddingConfig = field(default_factory=lambda: EmbeddingConfig("mock://0"))
    scan: ScanConfig = field(default_factory=ScanConfig)
    eval_protocol: EvalProtocolConfig = field(default_factory=EvalProtocolConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def __post_init__(self) -> None:
        if not (0.0 <= self.halt_fraction <= 1.0):
            raise ConfigError("halt_fraction must be in [0, 1]")

    # -- resolved artifact locations ------------------------------------
    @property
    def effective_labels_path(self) -> Path:
        return self.labels_path or self.store_dir / "labels.jsonl"

    def stage_path(self, stage: str) -> Path:
        return self.store_dir / f"{stage}.jsonl"

    def vectors_path(self, source: str) -> Path:
        return self.store_dir / f"vectors_{source}.vec"

    @property
    def predictions_path(self) -> Path:
        return self.store_dir / "predictions.jsonl"

    @property
    def posthoc_path(self) -> Path:
        return self.store_dir / "posthoc_sample.json"

    @property
    def scan_report_path(self) -> Path:
        return self.store_dir / "scan_report.jsonl"

    @property
    def manifests_path(self) -> Path:
        return self.store_dir / "manifests.jsonl"

    @property
    def triage_path(self) -> Path:
        return self.store_dir / "triage.json"

    @property
    def allowlist_overlay_path(self) -> Path:
        return self.store_dir / "allowlist_overlay.txt"

    @property
    def model_path(self) -> Path:
        return self.store_dir / "annotator_model.npz"

    # -- loaders ---------------------------------------------------------
    def load_prompt_template(self) -> PromptTemplate:
        return load_template(self.template_path) if self.template_path else default_template()

    def load_rules(self) -> RedactionRuleSet:
        return load_rules(self.rules_path) if self.rules_path else default_rules()

    def load_allowlist(self) -> Allowlist:
        base = load_allowlist(self.allowlist_path) if self.allowlist_path else default_allowlist()
        overlay = self.allowlist_overlay_path
        if overlay.exists():
            extra = [t for t in overlay.read_text("utf-8").splitlines() if t.strip()]
            return Allowlist(base.terms | frozenset(t.casefold() for t in extra))
        return base

    def load_gazetteer(self) -> list[str]:
        if self.gazetteer_path:
            lines = Path(self.gazetteer_path).read_text("utf-8").splitlines()
            return [t.strip() for t in lines if t.strip()]
        return default_gazetteer()

    def make_detector(self):
        return make_detector(self.ner_endpoint, self.load_gazetteer())

    def load_tasks(self) -> list[TaskSpec]:
        if self.tasks_path:
            raw = yaml.safe_load(Path(self.tasks_path).read_text("utf-8"))
        else:
            from importlib import resources

            raw = yaml.safe_load(
                resources.files("textveil.data").joinpath("default_tasks.yaml").read_text("utf-8")
            )
        return parse_tasks(raw)

    def fingerprint(self) -> str:
        echo = {
            "corpus_path": str(self.corpus_path),
            "chat": [self.chat.endpoint_url, self.chat.model_name, self.chat.temperature],
            "ner": self.ner_endpoint,
            "embedding": [
                self.embedding.endpoint_url,
                self.embedding.model_name,
                self.embedding.dim,
                self.embedding.normalize,
            ],
            "template": str(self.template_path),
            "rules": str(self.rules_path),
            "allowlist": str(self.allowlist_path),
            "halt_fraction": self.halt_fraction,
        }
        return hashlib.sha256(json.dumps(echo, sort_keys=True).encode("utf-8")).hexdigest()


def parse_tasks(raw: dict) -> list[TaskSpec]:
    if not isinstance(raw, dict) or "tasks" not in raw:
        raise ConfigError("task file must contain a top-level 'tasks' list")
    specs = []
    for item in raw["tasks"]:
        unknown = set(item) - {"name", "label_source", "kind", "field", "keywords"}
        if unknown:
            raise ConfigError(f"unknown task keys: {sorted(unknown)}")
        specs.append(
            TaskSpec(
                name=item["name"],
                label_source=item["label_source"],
                kind=item["kind"],
                field_name=item.get("field"),
                keywords=tuple(item.get("keywords", ())),
            )
        )
    return specs


def _check_keys(raw: dict) -> None:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for section, allowed in _SECTION_KEYS.items():
        sub = raw.get(section) or {}
        if not isinstance(sub, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        bad = set(sub) - allowed
        if bad:
            raise ConfigError(f"unknown keys in section {section!r}: {sorted(bad)}")


def _existing(path_value, base: Path, label: str, required: bool) -> Path | None:
    if path_value is None:
        return None
    path = Path(path_value)
    if not path.is_absolute():
        path = base / path
    if required and not path.exists():
        raise ConfigError(f"{label} does not exist: {path}")
    return path


def from_dict(raw: dict, base: Path, require_corpus: bool = True) -> PipelineConfig:
    _check_keys(raw)
    chat_raw = dict(raw.get("chat") or {})
    chat_raw["endpoint_url"] = os.environ.get(
        ENV_CHAT, chat_raw.get("endpoint_url", "mock://0")
    )
    ner_raw = dict(raw.get("ner") or {})
    ner_endpoint = os.environ.get(ENV_NER, ner_raw.get("endpoint_url", "builtin"))
    embed_raw = dict(raw.get("embedding") or {})
    embed_raw["endpoint_url"] = os.environ.get(
        ENV_EMBED, embed_raw.get("endpoint_url", "mock://0")
    )
    eval_raw = dict(raw.get("eval") or {})
    if "c_grid" in eval_raw:
        eval_raw["c_grid"] = tuple(float(c) for c in eval_raw["c_grid"])
    service_raw = dict(raw.get("service") or {})

    corpus = _existing(raw.get("corpus_path", "corpus.jsonl"), base, "corpus_path", require_corpus)
    store_dir = Path(raw.get("store_dir", "stages"))
    if not store_dir.is_absolute():
        store_dir = base / store_dir
    try:
        return PipelineConfig(
            corpus_path=corpus,
            store_dir=store_dir,
            planted_path=_existing(raw.get("planted_path"), base, "planted_path", False),
            labels_path=_existing(raw.get("labels_path"), base, "labels_path", False),
            template_path=_existing(raw.get("template_path"), base, "template_path", True),
            rules_path=_existing(raw.get("rules_path"), base, "rules_path", True),
            allowlist_path=_existing(raw.get("allowlist_path"), base, "allowlist_path", True),
            gazetteer_path=_existing(raw.get("gazetteer_path"), base, "gazetteer_path", True),
            tasks_path=_existing(raw.get("tasks_path"), base, "tasks_path", True),
            halt_fraction=float(raw.get("halt_fraction", 0.05)),
            chat=ChatBackendConfig(**chat_raw),
            ner_endpoint=ner_endpoint,
            embedding=EmbeddingConfig(**embed_raw),
            scan=ScanConfig(**(raw.get("scan") or {})),
            eval_protocol=EvalProtocolConfig(**eval_raw),
            calibration=CalibrationConfig(**(raw.get("calibration") or {})),
            service=ServiceConfig(**service_raw),
        )
    except TypeError as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def from_yaml(path: str | Path, require_corpus: bool = True) -> PipelineConfig:
    path = Path(path)
    raw = yaml.safe_load(path.read_text("utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a mapping")
    return from_dict(raw, base=path.parent.resolve(), require_corpus=require_corpus)


def default_config(workdir: str | Path, require_corpus: bool = False) -> PipelineConfig:
    return from_dict({}, base=Path(workdir).resolve(), require_corpus=require_corpus)
