# Copyright 2026 The popnet Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Population-network embeddings, interpretable dimensions and edge utility."""

import json

from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    avg_similarity,
    collapse_edges,
    deepwalk,
    dine,
    edge_utility,
    line,
    macro_auc,
    pearson,
    read_embedding,
    stage_names,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "avg_similarity",
    "collapse_edges",
    "deepwalk",
    "default_config",
    "dine",
    "edge_utility",
    "line",
    "macro_auc",
    "pearson",
    "read_embedding",
    "run_stage",
    "stage_names",
]


def default_config():
    """Pipeline defaults as a nested dict."""
    from ._core import default_config_json

    return json.loads(default_config_json())


def run_stage(stage, config=None, overrides=()):
    """Run one pipeline stage.

    `config` is a nested dict overlaid on the defaults; `overrides` are
    `key.path=value` strings. Returns (summary dict, manifest path, artifact paths).
    """
    from ._core import run_stage_json

    summary, manifest, artifacts = run_stage_json(stage, json.dumps(config or {}), list(overrides))
    return json.loads(summary), manifest, artifacts
