"""Pipeline configuration and the fine-tuning argument emitter."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .cleanse import RULE_NAMES
from .dataset import SplitSpec
from .errors import ConfigError
from .synth import ProviderConfig

# Arabic instruction preamble for the system message: answer only from the
# quoted legal text, opening with the article and law citation.
DEFAULT_SYSTEM_PREAMBLE = (
    "أنت مستشار قانوني. "
    "أجب عن سؤال المستخدم "
    "اعتماداً على النص "
    "القانوني التالي فقط، "
    "وابدأ الإجابة بذكر "
    "رقم المادة والقانون."
)


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs; file values lose to flag overrides."""

    corpus_dir: Path = Path("corpus")
    output_dir: Path = Path("out")
    provider: ProviderConfig = field(
        default_factory=lambda: ProviderConfig(base_url="", model_name="")
    )
    split: SplitSpec = field(default_factory=SplitSpec)
    num_questions_per_article: int = 1
    system_preamble: str = DEFAULT_SYSTEM_PREAMBLE
    cleaning: dict[str, bool] = field(
        default_factory=lambda: {name: True for name in RULE_NAMES}
    )
    corpus_manifest: Path | None = None
    tokenizer_vocab: Path | None = None

    def __post_init__(self):
        if not str(self.corpus_dir) or not str(self.output_dir):
            raise ConfigError("corpus_dir and output_dir must be non-empty")
        if self.num_questions_per_article < 1:
            raise ConfigError("num_questions_per_article must be >= 1")
        unknown = set(self.cleaning) - set(RULE_NAMES)
        if unknown:
            raise ConfigError(f"unknown cleaning rules in config: {sorted(unknown)}")

    @property
    def disabled_rules(self) -> set[str]:
        return {name for name, on in self.cleaning.items() if not on}

    def snapshot(self) -> dict:
        """JSON-serializable snapshot for run manifests and replay."""
        data = asdict(self)
        data["corpus_dir"] = str(self.corpus_dir)
        data["output_dir"] = str(self.output_dir)
        data["corpus_manifest"] = (
            str(self.corpus_manifest) if self.corpus_manifest else None
        )
        data["tokenizer_vocab"] = (
            str(self.tokenizer_vocab) if self.tokenizer_vocab else None
        )
        return data


def load_pipeline_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Build a PipelineConfig from an optional JSON file plus keyword overrides.

    Override keys mirror the dataclass fields; nested provider/split values
    are given as dicts and merged over the file's values.
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")

    provider_data = dict(data.get("provider", {}))
    provider_data.update(overrides.pop("provider", {}))
    split_data = dict(data.get("split", {}))
    split_data.update(overrides.pop("split", {}))
    cleaning = {name: True for name in RULE_NAMES}
    cleaning.update(data.get("cleaning", {}))
    cleaning.update(overrides.pop("cleaning", {}))

    merged = {
        key: data[key]
        for key in (
            "corpus_dir",
            "output_dir",
            "num_questions_per_article",
            "system_preamble",
            "corpus_manifest",
            "tokenizer_vocab",
        )
        if key in data
    }
    merged.update({k: v for k, v in overrides.items() if v is not None})

    try:
        provider = ProviderConfig(
            base_url=provider_data.get("base_url", ""),
            model_name=provider_data.get("model_name", ""),
            api_key_env=provider_data.get("api_key_env", "LEXFORGE_API_KEY"),
            max_concurrency=provider_data.get("max_concurrency", 4),
            requests_per_second=provider_data.get("requests_per_second", 2.0),
            max_retries=provider_data.get("max_retries", 3),
            temperature=provider_data.get("temperature", 0.7),
        )
        split = SplitSpec(
            train_frac=split_data.get("train_frac", 0.8),
            val_frac=split_data.get("val_frac", 0.1),
            test_frac=split_data.get("test_frac", 0.1),
            seed=split_data.get("seed", 0),
            group_by_law=split_data.get("group_by_law", False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    for key in ("corpus_dir", "output_dir", "corpus_manifest", "tokenizer_vocab"):
        if merged.get(key) is not None:
            merged[key] = Path(merged[key])

    return PipelineConfig(provider=provider, split=split, cleaning=cleaning, **merged)


@dataclass(frozen=True)
class TrainingConfig:
    """Fine-tuning arguments emitted for an external trainer."""

    base_model: str = "unsloth/Llama-3.2-1B-Instruct-bnb-4bit"
    epochs: int = 10
    learning_rate: float = 2e-6
    scheduler: str = "linear"
    warmup_ratio: float = 0.10
    optimizer: str = "adam-8bit"
    lora_rank: int = 64
    batch_size: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.scheduler != "linear":
            raise ConfigError("only the linear scheduler is supported")
        if not 0 <= self.warmup_ratio <= 1:
            raise ConfigError("warmup_ratio must be in [0, 1]")
        if self.lora_rank < 1:
            raise ConfigError("lora_rank must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def emit_training_config(
    overrides: dict | None = None, path: str | Path | None = None
) -> TrainingConfig:
    """Apply overrides to the defaults; optionally write the JSON file."""
    try:
        config = replace(TrainingConfig(), **(overrides or {}))
    except TypeError as exc:
        raise ConfigError(f"unknown training-config field: {exc}") from exc
    if path is not None:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            json.dumps(asdict(config), indent=2) + "\n", encoding="utf-8"
        )
    return config
