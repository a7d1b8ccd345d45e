"""typeweaver: project-scale type annotation inference for Python.

Static analysis builds a usage graph over a project's code elements; a
pluggable predictor fills indexed type markers from four-segment contexts;
iterative decoding threads earlier predictions into later ones; an
evaluation harness scores the result; and an interactive mode lets a human
accept or correct each prediction as decoding advances.
"""

from .assignment import (
    GOLD,
    PREDICTED,
    USER_OVERRIDE,
    AssignmentEntry,
    TypeAssignment,
    gold_assignment,
)
from .context import (
    AtomTokenizer,
    Budgets,
    MaskedRendering,
    ModelInput,
    build_model_input,
    build_preamble,
    render_main_code,
    render_signature,
)
from .decoder import (
    DecodeTrace,
    DecoderConfig,
    DecodingPlan,
    InteractiveDecoder,
    Strategy,
    UserGuidedReport,
    make_plan,
    run_decoding,
    run_user_guided,
)
from .evaluation import (
    COHERENCE_CODES,
    CoherenceReport,
    EvalReport,
    coherence_errors,
    dataset_stats,
    evaluate,
)
from .graph import (
    CERTAIN,
    POTENTIAL,
    UsageEdge,
    UsageGraph,
    build_usage_graph,
    topological_order,
)
from .predictor import (
    BackendUnavailable,
    DecodeParams,
    HeuristicPredictor,
    HttpPredictor,
    PredictionRequest,
    PredictionResult,
    PredictorError,
    ProtocolError,
    make_backend,
    parse_raw_output,
    predict,
)
from .project import (
    AnnotationSlot,
    CodeElement,
    ElementId,
    ElementKind,
    ModuleSource,
    ProjectError,
    ProjectSource,
    apply_assignment,
    collect_elements,
    load_project,
    load_project_from_texts,
    strip_comments_and_docstrings,
    strip_source_text,
    write_project,
)
from .pytypes import (
    ANY,
    NONE,
    ConstructorFrequencyTable,
    PyType,
    TypeParseError,
    adjust_for_comparison,
    base_head,
    categorize,
    normalize,
    parse_type,
)

__version__ = "0.1.0"
