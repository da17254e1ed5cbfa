"""Paths to the fixture data shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_dir() -> Path:
    return Path(str(resources.files("relict").joinpath("data")))


def corpus_dir() -> Path:
    """~120-page synthetic corpus: manifest.jsonl, tags.jsonl, inlinks.jsonl."""
    return data_dir() / "corpus"


def worked_dir() -> Path:
    """The nicnichols.com page, its inlink neighborhood, hit counts, and three title examples."""
    return data_dir() / "worked"
