"""Contrastive counterfactual explanations with Shapley attributions.

A target model's prediction difference between an input and a generated
counterfactual is decomposed over high-level interpretable attributes. The
counterfactuals come from a shift predictor operating in the latent space of
a generative model; everything is runnable at desk scale in a synthetic
differentiable world and pluggable to real model stacks via a line-delimited
JSON oracle protocol.
"""

from .errors import (
    CcshapError,
    ConstructionError,
    NumericError,
    ProtocolError,
    RemoteOracleError,
    ShapeError,
    TrainingError,
)
from .explain import (
    Explanation,
    ExplanationRequest,
    ValueCache,
    coalition_to_spec,
    contrastive_value,
    efficiency_audit,
    explain,
    render_explanation,
)
from .kernels import backend_name
from .oracle import ExternalOracle, InProcessOracle, OracleDescriptor, WireMessage
from .shapley import (
    Attribution,
    AxiomReport,
    Coalition,
    Game,
    check_axioms,
    shapley_exact,
    shapley_sampled,
    shapley_weight,
)
from .shift import (
    ShiftPredictorParams,
    TrainingConfig,
    eval_shift_predictor,
    load_shift_predictor,
    save_shift_predictor,
    shift_infer,
    shift_loss,
    shift_train,
)
from .world import (
    GroundTruth,
    SyntheticWorld,
    create_world,
    generate,
    load_world,
    predict_attrs,
    predict_target,
    save_world,
)

__version__ = "0.1.0"

__all__ = [
    "Attribution",
    "AxiomReport",
    "CcshapError",
    "Coalition",
    "ConstructionError",
    "Explanation",
    "ExplanationRequest",
    "ExternalOracle",
    "Game",
    "GroundTruth",
    "InProcessOracle",
    "NumericError",
    "OracleDescriptor",
    "ProtocolError",
    "RemoteOracleError",
    "ShapeError",
    "ShiftPredictorParams",
    "SyntheticWorld",
    "TrainingConfig",
    "TrainingError",
    "ValueCache",
    "WireMessage",
    "backend_name",
    "check_axioms",
    "coalition_to_spec",
    "contrastive_value",
    "create_world",
    "efficiency_audit",
    "eval_shift_predictor",
    "explain",
    "generate",
    "load_shift_predictor",
    "load_world",
    "predict_attrs",
    "predict_target",
    "render_explanation",
    "save_shift_predictor",
    "save_world",
    "shapley_exact",
    "shapley_sampled",
    "shapley_weight",
    "shift_infer",
    "shift_loss",
    "shift_train",
]
