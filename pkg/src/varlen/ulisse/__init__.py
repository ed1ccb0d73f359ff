"""Envelope index for variable-length subsequence matching."""

from .envelope import (
    MasterSeries,
    PaaEnvelope,
    UEnvelope,
    build_paa_envelope,
    envelope_count,
    envelope_to_uenv,
    enumerate_master_series,
)
from .index import UlisseIndex, as_collection
from .search import QueryResult, mindist_ulisse

__all__ = [
    "MasterSeries",
    "PaaEnvelope",
    "UEnvelope",
    "UlisseIndex",
    "QueryResult",
    "as_collection",
    "build_paa_envelope",
    "envelope_count",
    "envelope_to_uenv",
    "enumerate_master_series",
    "mindist_ulisse",
]
