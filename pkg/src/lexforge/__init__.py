"""lexforge: turn a raw Arabic law corpus into a validated, statistics-profiled,
fine-tune-ready instruct dataset, and evaluate chat endpoints against a legal
QA taxonomy."""

from .cleanse import CleanReport, clean_text
from .config import (
    DEFAULT_SYSTEM_PREAMBLE,
    PipelineConfig,
    TrainingConfig,
    emit_training_config,
    load_pipeline_config,
)
from .corpus import LawDocument, infer_metadata, load_corpus
from .dataset import (
    ChatRecord,
    DatasetStats,
    SplitSpec,
    assemble_record,
    compute_stats,
    dedup_records,
    emit_plot_data,
    export_jsonl,
    import_jsonl,
    split_dataset,
    tokenizer_file_counter,
    whitespace_token_count,
)
from .errors import (
    ArtifactError,
    ConfigError,
    CorpusError,
    LexforgeError,
    ParseError,
    ProtocolError,
    SchemaError,
    TransportError,
)
from .evalkit import (
    EvalCase,
    EvalOutcome,
    GoldAnswer,
    apply_category_checks,
    read_eval_cases,
    resignation_entitlement,
    run_eval,
    write_eval_report,
)
from .segment import Article, LawJson, read_law_json, segment_articles, write_law_json
from .synth import (
    ChatClient,
    PromptSpec,
    ProviderConfig,
    QAPair,
    ValidationReport,
    build_prompt,
    parse_llm_output,
    request_generation,
    validate_qa,
)

__version__ = "0.1.0"
