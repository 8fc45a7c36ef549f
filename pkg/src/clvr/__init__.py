"""Desk-scale toolkit for closed-loop visual generation pipelines.

The package covers five capability areas, each runnable without any real
diffusion or vision-language model behind it:

* trajectory + controller — the verification-gated generate/inspect/edit
  state machine, its retry budgets, the simulated data engine with blind
  A/B consensus filtering, and closed-loop inference (`trajectory`,
  `controller`, `simenv`).
* alignment prep — truncated training samples, proxy-prompt extraction,
  the dual-path proxy reward, task-mix batch assembly, and the recorded
  optimizer configuration (`alignment`).
* delta-space merging — bit-exact checkpoint containers, delta arithmetic,
  LoRA expansion, and relative-shift diagnostics (`container`, `merge`).
* geometry lab — first-order superposition and decoupling experiments on
  tiny nets over a toy manifold, plus the single-point merge truncation
  gap on a linear ODE (`manifold`, `perturbation`, `odelab`).
* probe + statistics — the semantic-complexity score with its DSL, tier
  stratification, AUC and effective-rank analytics, power-law fits, and
  binomial/NFE accounting (`semgraph`, `probe`, `stats`).

The `cli` module wires everything into the `clvr` command.
"""

from .alignment import (
    BatchItem,
    ProxyPrompts,
    RLConfig,
    RewardInputs,
    TaskDraw,
    TaskMixWeights,
    build_rl_batch,
    extract_proxy,
    proxy_reward,
    sample_task,
    sim_extractor,
)
from .container import ContainerError, TensorMap, load_checkpoint, save_checkpoint
from .controller import (
    AdapterFault,
    AgentAdapters,
    Checklist,
    EngineState,
    EpisodeLog,
    Event,
    IllegalTransition,
    PlannerContext,
    PlannerReply,
    RetryBudget,
    SynthesisStats,
    ToolFailure,
    blind_ab,
    consensus_filter,
    run_episode,
    run_inference,
    step_state,
    synthesize_dataset,
)
from .manifold import ToyManifold, decompose, normal_score, project
from .merge import (
    LoraAdapter,
    MergeReport,
    apply_merge,
    delta,
    expand_lora,
    merge_report,
    relative_frobenius,
    scale,
)
from .odelab import (
    OdeSetup,
    merged_solution,
    reference_solution,
    truncation_gap,
    variation_sweep,
    width_sweep,
)
from .perturbation import (
    TRAINED_DECOUPLING_BOUND,
    CosineStats,
    SuperpositionSweep,
    TinyNetSpec,
    constructed_circle_deltas,
    forward,
    increment_cosine,
    init_tiny_net,
    jvp_fd,
    random_delta,
    superposition_error,
    superposition_sweep,
    trained_circle_deltas,
)
from .probe import (
    EVAL_SEEDS,
    PowerLawFit,
    PromptScore,
    TierCurve,
    Tiering,
    aggregate_prompts,
    auc_pass,
    effective_rank,
    fit_power_law,
    i_eff,
    stratify,
    tier_curve,
    unconstrained_intervals,
)
from .semgraph import (
    ComplexityWeights,
    DslSyntaxError,
    EntityGroup,
    InfeasibleTrimError,
    SemanticGraph,
    c_task,
    node_edge_counts,
    parse_dsl,
    r_extra,
    trim,
)
from .simenv import SimEnv, SimEnvConfig
from .stats import (
    BinomialSummary,
    IterationHistogram,
    NfeConfig,
    binomial_summary,
    histogram,
    nfe,
    normal_ci,
    se_binomial,
    se_mean,
    speedup,
    wilson_interval,
    z_score,
)
from .trajectory import (
    MAX_ITERATIONS,
    Action,
    ImageRef,
    ReasoningStep,
    ShareGPTRecord,
    TruncatedSample,
    Trajectory,
    ValidationReport,
    expand_all,
    export_sharegpt,
    parse_sharegpt,
    parse_trajectory_jsonl,
    serialize_jsonl,
    truncate_at,
    validate_trajectory,
)

__version__ = "0.1.0"
