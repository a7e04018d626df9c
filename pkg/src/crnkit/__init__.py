"""Conditional relation units and hierarchical video question answering on numpy.

Subpackages: ``diffcore`` (reverse-mode autodiff), ``hcrn`` (model assembly),
``data`` (segmentation, bundles, synthetic tasks) and ``bench`` (cost model
and measurement). The command line lives in :mod:`crnkit.cli`.
"""
from .crn import CRN, ConditioningContext, CRNConfig, sample_subsets
from .errors import (
    BundleFormatError,
    ConfigurationError,
    ContractError,
    CrnkitError,
    DimensionError,
    GenerationError,
    SamplingError,
    SegmentationError,
)
from .hcrn import HCRN, AnswerTask, ModelConfig, TextualStreamConfig, VisualStreamConfig

__version__ = "0.1.0"
