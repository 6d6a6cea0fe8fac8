"""Gradient boosting, pipeline trees and the genetic-programming search."""
from .gbt import GbtModel, GbtRegressor, RegressionTree, gbt_predict, gbt_train
from .gp import GpConfig, GpResult, enumerate_depth1, evaluate, gp_search
from .tree import (
    REGISTRY,
    CompiledPipeline,
    NodeSpec,
    PipelineNode,
    feature_union,
    fig5_pipeline,
    fig5_tree,
    stacking_augment,
    validate_tree,
)

__all__ = [
    "GbtModel", "GbtRegressor", "RegressionTree", "gbt_predict", "gbt_train",
    "GpConfig", "GpResult", "enumerate_depth1", "evaluate", "gp_search",
    "REGISTRY", "CompiledPipeline", "NodeSpec", "PipelineNode", "feature_union",
    "fig5_pipeline", "fig5_tree", "stacking_augment", "validate_tree",
]
