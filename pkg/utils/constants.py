"""
Constants used throughout the harness
"""

# Validation split and protocols
DEFAULT_VALIDATION_FRACTION = 0.10  # Share of attacker training data held out
DEFAULT_VALIDATION_ENROLL = 5  # Enrollment utterances per validation speaker
DEFAULT_NONTARGETS_PER_SPEAKER = 5  # Nontarget validation trials per speaker
DEFAULT_NONTARGETS_PER_TEST = 5  # Nontarget eval trials per test utterance

# Synthetic world
DEFAULT_DIM = 32
DEFAULT_CHANNEL_SIGMA = 0.3

# Anonymisation systems
DEFAULT_TARGET_STRENGTH = 1.0  # Weight of the pseudo-speaker
DEFAULT_LEAK = 0.14  # Weight of the source speaker residual; leak / post_noise sets the matched EER
DEFAULT_POST_NOISE = 0.2  # Expected norm of the output noise
DEFAULT_POOL_SIZE = 200
DEFAULT_POOL_RANK = 4  # Dimension of the pseudo-speaker space the pools live in
DEFAULT_VOCODER_ANGLE = 0.15  # radians
DEFAULT_ROUTING_SHARE = 0.2  # Share of inputs a deterministic selector routes past its threshold

SELECTIONS = ("utterance_random", "speaker_random", "deterministic")
VARIANT_KINDS = ("vocoder_swap", "feature_swap", "selector_retrain")

# Attacker
DEFAULT_PROJECTION_RANK = 8
DEFAULT_SHRINKAGE = 0.1

# Detector
DEFAULT_MARGIN = 2.0  # percentage points below the reference line

# Scenario categories
CATEGORIES = ("matched", "full", "partial", "hidden", "corrected")
MISMATCH_CATEGORIES = ("full", "partial", "hidden")

# Exit codes
EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2

# Report styling: shape and colour per category, flagged candidates get a cross
CATEGORY_STYLES = {
    "matched": {"marker": "*", "color": "#2ca02c", "label": "Matched"},
    "full": {"marker": "^", "color": "#d62728", "label": "Full mismatch"},
    "partial": {"marker": "s", "color": "#ff7f0e", "label": "Partial mismatch"},
    "hidden": {"marker": "o", "color": "#9467bd", "label": "Hidden mismatch"},
    "corrected": {"marker": "P", "color": "#9467bd", "label": "Corrected"},
    "candidate": {"marker": "D", "color": "#1f77b4", "label": "Candidate"},
}
FLAGGED_MARKER = "X"
