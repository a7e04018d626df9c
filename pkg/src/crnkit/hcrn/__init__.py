"""Hierarchical assembly of CRN units into question-answering models."""
from .config import (
    AnswerTask,
    ModelConfig,
    Stage,
    TextualStreamConfig,
    VisualPlan,
    VisualStreamConfig,
    resolve_k_max,
    visual_plan,
)
from .decoders import (
    CountDecoder,
    MultiChoiceDecoder,
    OpenEndedDecoder,
    argmax_lowest,
    decode,
    round_half_away,
)
from .model import HCRN
from .readout import AttentionReadout, attention_readout
from .textual import Preselect, TextualStream, textual_preselect, textual_stream_forward
from .visual import VisualStream, longform_visual_forward, readout_slots
