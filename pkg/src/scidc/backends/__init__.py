"""Decoder backends: scripted mock, remote HTTP client, stub server."""

from .base import BackendCapability, DecoderBackend
from .mock import (
    FailValidationTimes,
    MockBackend,
    MockScript,
    PreferText,
    PreferToken,
    UniformNoise,
)
from .remote import RemoteBackend, RemoteConfig
from .stub_server import StubServer

__all__ = [
    "BackendCapability",
    "DecoderBackend",
    "FailValidationTimes",
    "MockBackend",
    "MockScript",
    "PreferText",
    "PreferToken",
    "RemoteBackend",
    "RemoteConfig",
    "StubServer",
    "UniformNoise",
]
