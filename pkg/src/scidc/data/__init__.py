"""Packaged data files: rule programs, vocabularies, compiler fixtures."""

from __future__ import annotations

from importlib import resources


def data_text(*parts: str) -> str:
    node = resources.files(__name__)
    for part in parts:
        node = node / part
    return node.read_text(encoding="utf-8")


def data_path(*parts: str):
    node = resources.files(__name__)
    for part in parts:
        node = node / part
    return node
