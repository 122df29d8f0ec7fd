"""Python bindings for the cdstore C++ core."""

from ._cdstore import (
    CdstoreError,
    Client,
    CodingParams,
    analyze_trace,
    chunk,
    decode,
    encode,
    estimate_cost,
    run_scenario,
    share_size,
)

__all__ = [
    "CdstoreError",
    "Client",
    "CodingParams",
    "analyze_trace",
    "chunk",
    "decode",
    "encode",
    "estimate_cost",
    "run_scenario",
    "share_size",
]
