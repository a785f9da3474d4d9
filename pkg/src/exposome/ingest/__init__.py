"""Session ingestion: types, CSV/manifest I/O, validation and synthesis."""

from .io import (parse_geo, parse_labels, parse_stream, read_session, serialize_geo,
                 serialize_labels, serialize_stream, write_session)
from .schema import (CHANNEL_KINDS, ChannelSpec, GeoTrace, GroundTruth, LabelEvent, RawSample,
                     RawStream, SessionBundle)
from .synth import DEFAULT_CHANNELS, SynthConfig, generate_synthetic_session
from .validate import ChannelReport, ValidationReport, validate_bundle

__all__ = [
    "CHANNEL_KINDS", "ChannelSpec", "GeoTrace", "GroundTruth", "LabelEvent", "RawSample",
    "RawStream", "SessionBundle", "SynthConfig", "DEFAULT_CHANNELS", "ChannelReport",
    "ValidationReport", "generate_synthetic_session", "parse_geo", "parse_labels",
    "parse_stream", "read_session", "serialize_geo", "serialize_labels", "serialize_stream",
    "validate_bundle", "write_session",
]
