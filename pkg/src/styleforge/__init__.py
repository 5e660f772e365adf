"""styleforge: deterministic image- and feature-level augmentation.

Image level: random RGB channel permutation. Feature level: region-wise
restyling from two bounded FIFO style memories. Everything is seedable and
reproducible; see the CLI (``styleforge --help``) for the batch pipeline.
"""

from .colorperm import (
    IDENTITY,
    PERMUTATIONS,
    ChannelPermutation,
    CpMode,
    apply_permutation,
    invert_permutation,
    sample_permutation,
)
from .dataio import (
    AnnotationSet,
    BoundingBox,
    FeatureMap,
    ImageInfo,
    ImageRGB,
    load_image,
    load_tensor,
    parse_annotations,
    parse_image_index,
    save_image,
    save_tensor,
)
from .errors import (
    DecodeError,
    EmptyRegion,
    FormatError,
    InvalidConfig,
    ShapeMismatch,
    StyleForgeError,
)
from .extractor import ExtractorConfig, extract_features
from .memory import (
    AugmentationTrace,
    DsmConfig,
    DsmState,
    PatchRecord,
    StyleMemory,
    dsm_forward,
    mixstyle,
    restore_state,
    sample_mix_lambda,
    snapshot_state,
)
from .pipeline import (
    BatchResult,
    PipelineConfig,
    StyleRow,
    StyleTable,
    augment_batch,
    export_style_table,
    read_style_table,
    style_diversity,
)
from .rng import stream
from .stylestats import (
    DEFAULT_EPS,
    RegionPartition,
    StyleVector,
    adain,
    build_partition,
    channel_stats,
    region_stats,
    splice,
    split,
)
from .synth import generate_corpus, generate_image

__version__ = "0.1.0"
