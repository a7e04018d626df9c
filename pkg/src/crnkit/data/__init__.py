"""Segmentation index math, feature projection, bundles and synthetic tasks."""
from .bundle import FeatureBundle, load_feature_bundle, manifest_lines, save_feature_bundle
from .features import project_features
from .segmentation import clip_anchors, segment_clips, segment_subtitles, truncate_or_pad
from .synthetic import (
    SyntheticTaskSpec,
    gen_count_task,
    gen_longform_task,
    gen_transition_task,
    generate,
    oracle_labels,
    task_motifs,
)
