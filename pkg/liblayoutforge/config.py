"""
 layoutforge: rule constant block

 All thresholds of the layout, table, segmentation and imaging rules live
 in one frozen dataclass. A JSON file with a subset of the field names
 overrides the defaults; document type profiles are applied on top.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import json
import logging
from dataclasses import dataclass, asdict, fields, replace

from liblayoutforge.errors import ConfigError

log = logging.getLogger(__name__)

DOC_TYPES = ("computer_compose", "letterpress", "typewriter", "handwritten")


@dataclass(frozen=True)
class RuleConfig:
    """Rule constants with their documented defaults"""

    # imaging
    dpi: int = 300
    denoise_min_px: int = 4
    skew_range_deg: float = 15.0
    skew_step_deg: float = 0.1
    skew_min_components: int = 50
    skew_apply_min_deg: float = 0.5
    perspective: bool = False
    perspective_min_angle_deg: float = 20.0
    perspective_min_area: float = 0.10

    # line metrics and text lines
    height_bin_px: int = 2
    height_min_ratio: float = 0.3
    height_max_ratio: float = 3.0
    min_components: int = 10
    line_overlap: float = 0.5
    word_gap_factor: float = 0.4
    line_split_factor: float = 2.0

    # columns and paragraphs
    column_gap_factor: float = 2.0
    column_span_ratio: float = 0.6
    para_gap_factor: float = 1.5
    para_indent_factor: float = 1.0
    align_tolerance: float = 0.5
    list_indent_factor: float = 2.0

    # non-text
    nontext_height_factor: float = 3.0
    dense_small_factor: float = 0.5
    dense_gap_factor: float = 0.25
    dense_min_components: int = 24
    nontext_density_min: float = 0.05
    nontext_density_max: float = 0.95
    picture_density: float = 0.35
    logo_top_ratio: float = 0.15
    signature_density: float = 0.15
    stroke_fill_ratio: float = 0.1

    # tables
    ruling_length_factor: float = 40.0
    ruling_thickness_factor: float = 3.0
    ruling_merge_px: int = 2
    ruling_min_page_ratio: float = 0.05
    closure_tolerance_px: int = 5
    channel_min_factor: float = 1.0
    channel_align_factor: float = 0.5
    borderless_min_rows: int = 3
    borderless_min_channels: int = 2
    row_gap_factor: float = 2.5
    rule_gap_factor: float = 10.0

    # character segmentation and recognition
    matra_top_ratio: float = 0.4
    matra_width_ratio: float = 0.6
    recognizer_size: int = 32
    top_k: int = 5

    def for_doc_type(self, doc_type):
        """Return the configuration with the document type profile applied"""
        if doc_type in (None, "", "unknown"):
            return self
        if doc_type not in PROFILES:
            raise ConfigError(f"Unknown document type: [{doc_type}]")
        log.debug("Applying rule profile for document type [%s]", doc_type)
        return replace(self, **PROFILES[doc_type])

    def to_dict(self):
        """Plain dict snapshot"""
        return asdict(self)


# Word segmentation differs per document provenance; each type carries its
# own set of overrides.
PROFILES = {
    "computer_compose": {},
    "letterpress": {"denoise_min_px": 6},
    "typewriter": {"word_gap_factor": 0.5, "denoise_min_px": 5},
    "handwritten": {
        "word_gap_factor": 0.5,
        "matra_width_ratio": 0.5,
        "line_overlap": 0.4,
    },
}


def from_dict(values, base=None):
    """Build a config from a dict of overrides"""
    base = base or RuleConfig()
    known = {f.name: f for f in fields(RuleConfig)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {unknown}")
    converted = {}
    for key, value in values.items():
        default = getattr(base, key)
        try:
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise TypeError("expected boolean")
                converted[key] = value
            elif isinstance(default, int):
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError("expected integer")
                converted[key] = int(value)
            else:
                converted[key] = float(value)
        except (TypeError, ValueError) as errmsg:
            raise ConfigError(f"Invalid value for [{key}]: [{value}] ({errmsg})") from errmsg
    return replace(base, **converted)


def load_config(path=None, base=None):
    """Load a JSON rule config file; None returns the defaults"""
    if path is None:
        return base or RuleConfig()
    try:
        with open(path, "r", encoding="utf-8") as config_file:
            values = json.load(config_file)
    except (OSError, json.decoder.JSONDecodeError) as errmsg:
        raise ConfigError(f"Unable to read config [{path}]: [{errmsg}]") from errmsg
    if not isinstance(values, dict):
        raise ConfigError(f"Config [{path}] must contain a JSON object")
    log.info("Loaded rule configuration: [%s]", path)
    return from_dict(values, base)


def dump_config(config):
    """Serializable snapshot, stable key order"""
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
