"""Enumerations shared across dcpkit."""

from enum import Enum


class DescriptorKind(str, Enum):
    """Local pattern descriptor."""

    DCP = "dcp"  # Both cross encoders, 2 × 256 codes
    DCP1 = "dcp1"  # Even directions only
    DCP2 = "dcp2"  # Odd directions only
    LBP = "lbp"
    MSLBP = "mslbp"  # LBP at two radii
    LTP = "ltp"  # Upper/lower ternary planes


class Interpolation(str, Enum):
    """Sampling rule for off-grid sample points."""

    BILINEAR = "bilinear"
    NEAREST = "nearest"


class HistogramMetric(str, Enum):
    """Histogram comparison."""

    CHI2 = "chi2"  # Distance, lower is better
    INTERSECTION = "intersection"  # Similarity, higher is better


class GeometryKind(str, Enum):
    """Landmark-driven geometric normalization."""

    SIMILARITY = "similarity"
    AFFINE = "affine"


class Preset(str, Enum):
    """Named experiment presets."""

    FERET128 = "feret128"
    MDML180 = "mdml180"
    LFW_LIKE = "lfw-like"


class FeatureName(str, Enum):
    """The nine MDML feature vectors."""

    H1 = "H1"
    H2 = "H2"
    H3 = "H3"
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    C4 = "C4"
    C5 = "C5"
    C6 = "C6"


class FusionMode(str, Enum):
    """Score fusion training."""

    AVERAGE = "average"
    LINEAR = "linear"


class PipelineName(str, Enum):
    """Registered matching pipelines."""

    DESCRIPTOR = "descriptor"  # Regional histograms + chi2/intersection
    MDML_WPCA = "mdml-wpca"
    MDML_PLDA = "mdml-plda"
    MDML_AUTO = "mdml"  # PLDA when a multi-sample training set exists, else WPCA


class Role(str, Enum):
    """Role of a manifest entry in a protocol."""

    GALLERY = "gallery"
    PROBE = "probe"
    TRAIN = "train"


class Variation(str, Enum):
    """Intra-class perturbations of the synthetic corpus."""

    NONE = "none"
    NOISE = "noise"
    ILLUMINATION_RAMP = "illumination-ramp"  # Global gain
    SMALL_POSE_JITTER = "small-pose-jitter"
