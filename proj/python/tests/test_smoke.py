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

import math

import numpy as np
import pytest

import uscl

SMALL = """
[dataset]
synthetic = true
videos_per_class = 4
frames_per_video = 6
width = 16
height = 16
seed = 3
[train]
epochs = 2
batch_size = 4
seed = 3
rep_dim = 16
proj_hidden = 16
proj_dim = 8
[spg]
output_size = 16
[adapt]
epochs = 10
"""


def test_contrastive_closed_forms():
    assert uscl.contrastive_loss(np.array([[1.0, 2.0], [-3.0, 0.5]])) == 0.0
    same = np.tile([0.6, 0.8], (4, 1))
    assert abs(uscl.contrastive_loss(same, 0.5) - math.log(3)) < 1e-12
    ortho = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
    assert abs(uscl.contrastive_loss(ortho, 0.5) - math.log(1 + 2 * math.exp(-2))) < 1e-9


def test_contrastive_matches_numpy_reference():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(6, 5))
    zn = z / np.linalg.norm(z, axis=1, keepdims=True)
    s = np.exp(zn @ zn.T / 0.5)
    np.fill_diagonal(s, 0.0)
    terms = [-math.log(s[i, i ^ 1] / s[i].sum()) for i in range(6)]
    assert abs(uscl.contrastive_loss(z, 0.5) - np.mean(terms)) < 1e-12


def test_total_loss_and_supervised_gating():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(4, 3))
    probs = np.full((4, 3), 1 / 3)
    out = uscl.total_loss(z, probs, [[0.0, 1.0, 0.0], None], 0.5, 0.2)
    assert abs(out["l_sup"] - math.log(3)) < 1e-12
    assert abs(out["total"] - (out["l_con"] + 0.2 * out["l_sup"])) < 1e-12
    assert out["n_labeled"] == 1
    none = uscl.total_loss(z, probs, [None, None])
    assert none["total"] == none["l_con"]


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        uscl.contrastive_loss(np.ones((3, 2)))
    with pytest.raises(ArithmeticError):
        uscl.cosine_sim(np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        uscl.parse_config("[dataset]\nsynthetic = true\n[train]\nnope = 1\n")


def test_metrics():
    ev = uscl.evaluate([2] * 6, [0, 0, 1, 1, 2, 2], 3)
    assert abs(ev["accuracy"] - 1 / 3) < 1e-12
    assert abs(ev["macro_f1"] - 0.5 / 3) < 1e-12
    emb = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 3.0]])
    c = uscl.cluster_cohesion(emb, ["a", "a", "b", "b"])
    assert abs(c["gap"] - 1.0) < 1e-12


def test_pgm_round_trip(tmp_path):
    img = np.arange(12, dtype=float).reshape(3, 4) / 11.0
    uscl.write_pgm(img, tmp_path / "f.pgm")
    back = uscl.read_pgm(tmp_path / "f.pgm")
    assert back.shape == (3, 4)
    assert np.max(np.abs(back - img)) <= 1 / 255


def test_pipeline(tmp_path):
    cfg = uscl.parse_config(SMALL)
    cfg.output_dir = tmp_path / "run"
    cfg.ablation = "full"
    manifest = uscl.gen_data(cfg, tmp_path / "data")
    assert manifest.exists()

    record = uscl.pretrain(cfg)
    steps = [r for r in record if r["kind"] == "step"]
    assert len(steps) == 4
    for s in steps:
        assert abs(s["total"] - (s["l_con"] + 0.2 * s["l_sup"])) < 1e-12

    ckpt = tmp_path / "run" / "checkpoint.bin"
    probe = uscl.adapt(cfg, ckpt, "linear_probe")
    assert 0.0 <= probe["accuracy"] <= 1.0
    assert (tmp_path / "run" / "adapt_linear_probe.json").exists()
    ev = uscl.evaluate_checkpoint(cfg, ckpt)
    assert len(ev["confusion"]) == 3

    frames = np.random.default_rng(2).uniform(size=(5, 16, 16))
    reps = uscl.encode(ckpt, frames)
    assert reps.shape == (5, 16)
    assert np.all(np.isfinite(reps))
    assert uscl.export_embeddings(cfg, ckpt) == 72


def test_config_round_trip():
    cfg = uscl.parse_config(SMALL)
    cfg.set_seed(11)
    text = cfg.render()
    assert "seed = 11" in text
    assert uscl.parse_config(text).render() == text
