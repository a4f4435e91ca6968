"""Planner-worker agent toolkit for multi-hop question answering.

The pieces: EM/F1 scoring that doubles as the episode reward, a
tag-grammar conversation engine over text and knowledge-graph retrieval
environments, an OpenAI-compatible chat gateway with a scripted test
double, a rejection-sampling pipeline that emits loss-masked SFT datasets
under a progressively tightening acceptance threshold, and numerics for
the truncated-Boltzmann policies that justify the sampling rule.
"""

from .boltzmann import (
    RewardLandscape,
    kl_truncated,
    log_partition,
    log_truncated_partition,
    min_threshold_for_delta,
    truncated_variance,
)
from .bm25 import Bm25Index, index_corpus, retrieve
from .environments import (
    Corpus,
    KgEnvironment,
    KgStore,
    Passage,
    QAInstance,
    TextEnvironment,
    Triple,
    format_materials,
    kg_neighbors,
    load_corpus_jsonl,
    load_dataset_json,
    load_kg_tsv,
)
from .episode import (
    EpisodeLimits,
    Message,
    Trajectory,
    WorkerCall,
    dispatch_iteration,
    run_episode,
    run_worker,
    score_trajectory,
)
from .gateway import (
    ChatRequest,
    Endpoint,
    HttpBackend,
    ScriptedBackend,
    ScriptedRule,
    chat,
    scripted_chat,
)
from .metrics import aggregate, exact_match, f1, normalize_answer
from .pipeline import (
    BatchReport,
    SamplerConfig,
    SftRecord,
    ThresholdState,
    emit_sft,
    run_offline,
    run_online,
    sample_question,
    select_training_units,
    update_threshold,
    warmup_select,
)
from .tags import PlannerAction, parse_planner_action, parse_worker_reply

__version__ = "0.1.0"
