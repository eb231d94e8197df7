from .types import (
    Embedding,
    UtteranceRecord,
    LabeledEmbeddingSet,
    Trial,
    ScoreEntry,
    ScoreSet,
    SystemId,
    TARGET,
    NONTARGET,
)
from .errors import (
    HarnessError,
    InputError,
    FormatError,
    ProtocolError,
    ConfigError,
    InsufficientDataError,
    InvariantViolation,
)
