"""Channel-estimation lab for an O-QPSK/DSSS link (compiled core)."""

from ._vvdlab import (
    DEPTH_SHAPE,
    PSDU_BYTES,
    PSDU_CHIPS,
    ParseError,
    SingularityError,
    ValidationError,
    aging,
    compare,
    demodulate,
    design_zf,
    despread,
    generate_trace,
    ls_estimate,
    modulate,
    phase_correct,
    read_depth,
    read_estimates,
    read_trace,
    set_combinations,
    spread,
    write_estimates,
)

__all__ = [
    "DEPTH_SHAPE",
    "PSDU_BYTES",
    "PSDU_CHIPS",
    "ParseError",
    "SingularityError",
    "ValidationError",
    "aging",
    "compare",
    "demodulate",
    "design_zf",
    "despread",
    "generate_trace",
    "ls_estimate",
    "modulate",
    "phase_correct",
    "read_depth",
    "read_estimates",
    "read_trace",
    "set_combinations",
    "spread",
    "write_estimates",
]
