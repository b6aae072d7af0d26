"""Streaming CTC / triggered-attention speech decoding engine."""

from .bridge import BridgeScorer, SocketScorer, SubprocessScorer, bridge_serve
from .corpus import Utterance, load_corpus, load_refs, save_refs
from .ctc import (
    ForcedAlignment,
    GreedyResult,
    InfeasibleTranscriptError,
    ctc_greedy,
    ctc_logprob,
    ctc_prefix_beam,
    ctc_viterbi,
)
from .lattice import (
    BLANK_ID,
    BLANK_TOKEN,
    EOS_TOKEN,
    EmissionMatrix,
    FormatError,
    LatencySpec,
    Vocab,
    collapse,
    latency_ms,
    load_emissions,
    load_vocab,
    save_emissions,
    save_vocab,
)
from .maskctc import (
    MaskedTranscript,
    cmlm_fill,
    mask_ctc_decode,
    mask_low_confidence,
)
from .metrics import EvalReport, UtteranceEval, evaluate
from .scorers import (
    MASK,
    BigramAttentionScorer,
    OracleCMLMScorer,
    RecordingScorer,
    ScorerError,
    ScorerTable,
    TableAttentionScorer,
    TableCMLMScorer,
    UniformAttentionScorer,
    UniformCMLMScorer,
)
from .span_attention import SpanMask, build_span_mask, masked_attention, span_attention_weights
from .streaming import StreamConfig, StreamEvent, StreamResult, stream_decode, token_latency_report
from .sweep import SweepRow, decode_corpus, sweep_latency
from .triggered import (
    DEFAULT_BEAM_SIZE,
    DEFAULT_CTC_ATTENTION_WEIGHT,
    Hypothesis,
    TriggeredSearch,
    decode_defaults,
    extract_triggers,
    triggered_decode,
)

__version__ = "0.1.0"

__all__ = [
    "BLANK_ID",
    "BLANK_TOKEN",
    "EOS_TOKEN",
    "MASK",
    "DEFAULT_BEAM_SIZE",
    "DEFAULT_CTC_ATTENTION_WEIGHT",
    "BigramAttentionScorer",
    "BridgeScorer",
    "EmissionMatrix",
    "EvalReport",
    "ForcedAlignment",
    "FormatError",
    "GreedyResult",
    "Hypothesis",
    "InfeasibleTranscriptError",
    "LatencySpec",
    "MaskedTranscript",
    "OracleCMLMScorer",
    "RecordingScorer",
    "ScorerError",
    "ScorerTable",
    "SocketScorer",
    "SpanMask",
    "StreamConfig",
    "StreamEvent",
    "StreamResult",
    "SubprocessScorer",
    "SweepRow",
    "TableAttentionScorer",
    "TableCMLMScorer",
    "TriggeredSearch",
    "UniformAttentionScorer",
    "UniformCMLMScorer",
    "Utterance",
    "UtteranceEval",
    "Vocab",
    "bridge_serve",
    "cmlm_fill",
    "collapse",
    "ctc_greedy",
    "ctc_logprob",
    "ctc_prefix_beam",
    "ctc_viterbi",
    "decode_corpus",
    "decode_defaults",
    "evaluate",
    "extract_triggers",
    "latency_ms",
    "load_corpus",
    "load_emissions",
    "load_refs",
    "load_vocab",
    "mask_ctc_decode",
    "mask_low_confidence",
    "masked_attention",
    "save_emissions",
    "save_refs",
    "save_vocab",
    "span_attention_weights",
    "stream_decode",
    "sweep_latency",
    "token_latency_report",
    "triggered_decode",
]
