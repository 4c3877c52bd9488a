"""Synthetic OCTA retinal vasculature with diabetic-retinopathy pathology.

Thin wrapper over the native ``_svr`` extension. Configurations and
documents are plain dicts; images come back as PNG bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike, fspath
from typing import Any, Mapping, Optional

from . import _svr

__all__ = [
    "ConfigError",
    "Sample",
    "__version__",
    "config_digest",
    "default_config",
    "derive_sample_seed",
    "generate_dataset",
    "generate_sample",
    "sample_id",
    "template_reasoning",
    "validate_dataset",
    "verify_fact_preservation",
]

ConfigError = _svr.ConfigError
__version__ = _svr.version()
derive_sample_seed = _svr.derive_sample_seed
sample_id = _svr.sample_id


def _dump(config: Optional[Mapping[str, Any]]) -> str:
    return "" if config is None else json.dumps(config)


def default_config() -> dict:
    """Every configuration section with its default values."""
    return json.loads(_svr.default_config_json())


def config_digest(config: Optional[Mapping[str, Any]] = None) -> str:
    return _svr.config_digest(_dump(config))


@dataclass
class Sample:
    document: dict
    image_png: Optional[bytes]
    mask_png: Optional[bytes]
    problems: list = field(default_factory=list)

    @property
    def label(self) -> str:
        return self.document["label"]

    @property
    def answer(self) -> str:
        return self.document["text"]["answer"]


def generate_sample(
    index: int,
    seed: int,
    config: Optional[Mapping[str, Any]] = None,
    *,
    render: bool = True,
    force_class: Optional[str] = None,
) -> Sample:
    """One sample; ``force_class`` is healthy, nonproliferative or proliferative."""
    doc, image, mask, problems = _svr.generate_sample(index, seed, _dump(config), render, force_class)
    return Sample(json.loads(doc), image, mask, list(problems))


def generate_dataset(
    count: int, seed: int, out: str | PathLike, config: Optional[Mapping[str, Any]] = None
) -> dict:
    """Writes a dataset directory and returns the run report with its manifest."""
    return json.loads(_svr.generate_dataset(count, seed, fspath(out), _dump(config)))


def validate_dataset(out: str | PathLike, parallel: int = 1) -> list[str]:
    """Problems found by re-simulating the dataset; empty means valid."""
    _, problems = _svr.validate_dataset(fspath(out), parallel)
    return list(problems)


def template_reasoning(metadata: Mapping[str, Any], with_diagnosis: bool = False) -> str:
    return _svr.template_reasoning(json.dumps(metadata), with_diagnosis)


def verify_fact_preservation(metadata: Mapping[str, Any], text: str) -> list[tuple[str, str]]:
    return list(_svr.verify_fact_preservation(json.dumps(metadata), text))
