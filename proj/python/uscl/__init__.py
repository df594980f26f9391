# Copyright 2026 The USCL Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Semi-supervised video contrastive pretraining."""

import json

from uscl._core import (
    ContractError,
    DomainError,
    IoError,
    LoadError,
    ParseError,
    RunConfig,
    ShapeError,
    cluster_cohesion,
    contrastive_loss,
    cosine_sim,
    encode,
    export_embeddings,
    gen_data,
    load_config,
    parse_config,
    read_pgm,
    supervised_loss,
    total_loss,
    write_pgm,
)
from uscl import _core

__all__ = [
    "ContractError",
    "DomainError",
    "IoError",
    "LoadError",
    "ParseError",
    "RunConfig",
    "ShapeError",
    "adapt",
    "cluster_cohesion",
    "contrastive_loss",
    "cosine_sim",
    "encode",
    "evaluate",
    "evaluate_checkpoint",
    "export_embeddings",
    "gen_data",
    "load_config",
    "parse_config",
    "pretrain",
    "read_pgm",
    "supervised_loss",
    "total_loss",
    "write_pgm",
]


def evaluate(predicted, truth, num_classes):
    """Accuracy, per-class precision/recall/F1, macro-F1 and confusion[true][pred]."""
    return json.loads(_core.evaluate_json(list(predicted), list(truth), num_classes))


def pretrain(config):
    """Runs pretraining into config.output_dir; returns the run record lines."""
    return [json.loads(line) for line in _core.pretrain(config).splitlines() if line]


def adapt(config, checkpoint, mode="linear_probe"):
    """Trains a fresh classifier on a checkpoint; returns held-out metrics."""
    return json.loads(_core.adapt_json(config, str(checkpoint), mode))


def evaluate_checkpoint(config, checkpoint):
    """Metrics of the checkpoint's own classifier on every frame."""
    return json.loads(_core.eval_json(config, str(checkpoint)))
