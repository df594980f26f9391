/**
 * Copyright 2026 The USCL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "uscl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <utility>

#include "uscl/errors.hpp"

namespace uscl {

using nd::Graph;
using nd::Tensor;
using nd::Var;

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<Tensor* const> params, AdamState& state, double lr, double weight_decay) {
  if (!(lr > 0.0)) throw ContractError("adam: learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ContractError("adam: weight decay must be non-negative");
  if (state.m.empty() && state.t == 0) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->numel(), 0.0);
      state.v.emplace_back(p->numel(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam: state holds " + std::to_string(state.m.size()) + " moments for " +
                     std::to_string(params.size()) + " parameters");
  }
  const std::size_t step = state.t + 1;

  // Effective gradients first, so a bad step leaves parameters untouched.
  std::vector<std::vector<double>> grads(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& p = *params[k];
    if (state.m[k].size() != p.numel()) {
      throw ShapeError("adam: moment " + std::to_string(k) + " has " + std::to_string(state.m[k].size()) +
                       " entries, parameter has " + std::to_string(p.numel()));
    }
    const auto g = p.grad();
    if (!g.empty() && g.size() != p.numel()) throw ShapeError("adam: gradient size mismatch");
    auto& eff = grads[k];
    eff.resize(p.numel());
    for (std::size_t i = 0; i < p.numel(); ++i) {
      eff[i] = (g.empty() ? 0.0 : g[i]) + weight_decay * p[i];
      if (!std::isfinite(eff[i])) {
        throw DomainError("adam: non-finite gradient at step " + std::to_string(step));
      }
    }
  }

  state.t = step;
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Pretraining

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ContractError("batch_size must be positive");
  if (!(cfg.lr > 0.0)) throw ContractError("lr must be positive");
  if (!(cfg.weight_decay >= 0.0)) throw ContractError("weight_decay must be non-negative");
  if (!(cfg.lambda >= 0.0)) throw ContractError("lambda must be non-negative");
  if (!(cfg.tau > 0.0)) throw ContractError("tau must be positive");
  if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0)) throw ContractError("alpha and beta must be positive");
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) throw ContractError("val_fraction must be in [0, 1)");
  if (!(cfg.samples_per_second > 0.0)) throw ContractError("samples_per_second must be positive");
  validate(cfg.augment);
}

ModelConfig model_config_for(const Dataset& ds, const TrainConfig& cfg) {
  ModelConfig mc = cfg.model;
  mc.backbone.height = cfg.augment.output_size;
  mc.backbone.width = cfg.augment.output_size;
  mc.num_classes = ds.num_classes;
  validate(mc);
  return mc;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_videos(const Dataset& ds, double val_fraction,
                                                                           std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ContractError("val_fraction must be in [0, 1)");
  // Unlabeled videos are keyed one past the last class.
  std::map<std::size_t, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    strata[ds.videos[i].label.value_or(ds.num_classes)].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> train, val;
  for (auto& [key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(members.size())));
    n_val = std::min(n_val, members.size() - 1);
    val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

LossBreakdown batch_loss(ModelParams& params, const Batch& batch, double tau, double lambda, bool backward) {
  std::vector<Frame> first, second;
  PairLabels labels;
  for (const auto& pair : batch.pairs) {
    first.push_back(pair.x1);
    second.push_back(pair.x2);
    labels.push_back(pair.y);
  }
  const Tensor images = images_to_tensor(interleave_views(first, second));
  Graph g;
  Var reps = encode(g, params, g.input(images));
  Var z = project(g, params, reps);
  Var probs = classify(g, params, reps);
  const TotalLoss loss = total_loss(g, z, probs, labels, tau, lambda);
  if (backward) g.backward(loss.total);
  return loss.breakdown;
}

namespace {

double grad_norm(std::span<Tensor* const> tensors) {
  double sq = 0.0;
  for (const Tensor* t : tensors) {
    for (double v : t->grad()) sq += v * v;
  }
  return std::sqrt(sq);
}

template <typename T>
std::vector<T> pick(const std::vector<T>& from, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(from[i]);
  return out;
}

}  // namespace

PretrainResult pretrain(const Dataset& ds, const TrainConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  validate(ds);
  validate(cfg);

  const auto [train_idx, val_idx] = split_videos(ds, cfg.val_fraction, derive_seed(cfg.seed, 0, "split"));
  const auto all_sets = extract_frame_sets(ds, cfg.samples_per_second);
  const auto train_sets = pick(all_sets, train_idx);
  const auto val_sets = pick(all_sets, val_idx);
  if (train_sets.size() < cfg.batch_size) {
    throw ContractError("pretrain: batch size " + std::to_string(cfg.batch_size) + " exceeds the " +
                        std::to_string(train_sets.size()) + " training videos");
  }

  PretrainResult result;
  result.params = ModelParams::init(model_config_for(ds, cfg), derive_seed(cfg.seed, 0, "init"));
  ModelParams& params = result.params;
  params.set_requires_grad(true);

  RunRecord& record = result.record;
  record.config = cfg;
  for (std::size_t i : train_idx) record.train_videos.push_back(ds.videos[i].id);
  for (std::size_t i : val_idx) record.val_videos.push_back(ds.videos[i].id);

  const PairConfig pair_cfg{cfg.augment, cfg.alpha, cfg.beta, cfg.ablation.mixup};
  const double lambda = cfg.ablation.supervised ? cfg.lambda : 0.0;
  const std::size_t n = cfg.batch_size;
  const std::size_t steps_per_epoch = train_sets.size() / n;

  AdamState adam;
  const auto plist = params.all();
  const auto classifier = params.group(ParamGroup::kClassifier);
  Rng order(derive_seed(cfg.seed, 0, "order"));
  std::vector<std::size_t> perm(train_sets.size());

  auto run_eval = [&](std::size_t epoch, std::size_t step) {
    if (val_sets.empty()) return;
    std::vector<std::size_t> picks(std::min(n, val_sets.size()));
    std::iota(picks.begin(), picks.end(), 0);
    const Batch batch =
        build_batch_for(val_sets, picks, ds.num_classes, pair_cfg, derive_seed(cfg.seed, epoch, "val"), epoch);
    record.evals.push_back({epoch, step, batch_loss(params, batch, cfg.tau, lambda, false)});
  };

  std::size_t global = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), order);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      Batch batch;
      if (cfg.ablation.pair_by_video) {
        const std::span<const std::size_t> picks(perm.data() + s * n, n);
        batch = build_batch_for(train_sets, picks, ds.num_classes, pair_cfg, cfg.seed, epoch);
      } else {
        Rng rng(derive_seed(cfg.seed, epoch, "frames/" + std::to_string(s)));
        batch = build_frame_batch(train_sets, n, ds.num_classes, pair_cfg, rng);
      }
      batch.epoch = epoch;
      batch.step = global;

      params.zero_grad();
      StepRecord rec;
      try {
        rec.loss = batch_loss(params, batch, cfg.tau, lambda, true);
      } catch (const DomainError& e) {
        throw DomainError("pretrain: non-finite value at step " + std::to_string(global) + ": " + e.what());
      }
      rec.epoch = epoch;
      rec.step = global;
      rec.classifier_grad_norm = grad_norm(classifier);
      adam_step(plist, adam, cfg.lr, cfg.weight_decay);
      record.steps.push_back(rec);
      ++global;
      if (cfg.eval_every > 0 && global % cfg.eval_every == 0) run_eval(epoch, global);
    }
    if (cfg.eval_every == 0) run_eval(epoch, global);
  }
  params.zero_grad();
  params.set_requires_grad(false);
  params.zero_grad();

  record.adam_constants.beta1 = adam.beta1;
  record.adam_constants.beta2 = adam.beta2;
  record.adam_constants.eps = adam.eps;
  record.adam_constants.t = adam.t;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

Evaluation evaluate(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                    std::size_t num_classes) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw ContractError("evaluate: no samples");
  if (num_classes == 0) throw ContractError("evaluate: no classes");
  Evaluation ev;
  ev.count = truth.size();
  ev.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw ContractError("evaluate: class index out of range at sample " + std::to_string(i));
    }
    ++ev.confusion[truth[i]][predicted[i]];
    if (truth[i] == predicted[i]) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t tp = ev.confusion[c][c], pred_c = 0, true_c = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      pred_c += ev.confusion[k][c];
      true_c += ev.confusion[c][k];
    }
    const double p = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    const double r = true_c ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
    ev.precision.push_back(p);
    ev.recall.push_back(r);
    ev.f1.push_back(p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0);
  }
  ev.macro_f1 = std::accumulate(ev.f1.begin(), ev.f1.end(), 0.0) / static_cast<double>(num_classes);
  return ev;
}

Cohesion cluster_cohesion(const Tensor& embeddings, std::span<const std::string> video_ids) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != video_ids.size()) {
    throw ShapeError("cluster_cohesion: embeddings " + nd::shape_str(embeddings.shape()) + " for " +
                     std::to_string(video_ids.size()) + " ids");
  }
  const std::size_t n = embeddings.dim(0), d = embeddings.dim(1);
  std::map<std::string, std::size_t> counts;
  for (const auto& id : video_ids) ++counts[id];
  if (counts.size() < 2) throw ContractError("cluster_cohesion: need at least two videos");

  Cohesion out;
  for (const auto& [id, c] : counts) {
    if (c < 2) {
      out.skipped.push_back(id);
      std::cerr << "warning: cluster_cohesion: video " << id << " has a single embedding, skipped from intra\n";
    }
  }

  // Unit rows once, then dot products.
  std::vector<double> unit(embeddings.values().begin(), embeddings.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) sq += unit[i * d + k] * unit[i * d + k];
    if (sq == 0.0) throw DomainError("cluster_cohesion: zero embedding at row " + std::to_string(i));
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t k = 0; k < d; ++k) unit[i * d + k] *= inv;
  }
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += unit[i * d + k] * unit[j * d + k];
      dot = std::clamp(dot, -1.0, 1.0);
      if (video_ids[i] == video_ids[j]) {
        intra += dot;
        ++n_intra;
      } else {
        inter += dot;
        ++n_inter;
      }
    }
  }
  if (n_intra == 0) throw ContractError("cluster_cohesion: no video has two embeddings");
  out.intra = intra / static_cast<double>(n_intra);
  out.inter = inter / static_cast<double>(n_inter);
  out.gap = out.intra - out.inter;
  return out;
}

// ---------------------------------------------------------------------------
// Downstream adaptation

const char* adapt_mode_name(AdaptMode mode) {
  return mode == AdaptMode::kLinearProbe ? "linear_probe" : "last_layers";
}

FrameTable frame_table(const Dataset& ds, const ModelConfig& cfg) {
  const std::size_t w = cfg.backbone.width, h = cfg.backbone.height;
  FrameTable table;
  for (std::size_t v = 0; v < ds.videos.size(); ++v) {
    for (const Frame& f : ds.videos[v].frames) {
      Frame img = (f.width == w && f.height == h) ? f : crop_resize(f, 0, 0, f.width, f.height, w, h);
      img.index = f.index;
      table.frames.push_back(std::move(img));
      table.video_ids.push_back(ds.videos[v].id);
      table.video_index.push_back(v);
    }
  }
  return table;
}

namespace {

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

// Rows of `x` selected by `rows`.
Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.dim(1);
  std::vector<double> out;
  out.reserve(rows.size() * d);
  for (std::size_t r : rows) {
    const auto src = x.values().subspan(r * d, d);
    out.insert(out.end(), src.begin(), src.end());
  }
  return Tensor({rows.size(), d}, std::move(out));
}

Tensor one_hot_rows(std::span<const std::size_t> labels, std::size_t num_classes) {
  Tensor t = Tensor::zeros({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) t[i * num_classes + labels[i]] = 1.0;
  return t;
}

// Per-column mean/std from the training rows, applied to all rows.
void standardize(Tensor& train, Tensor& test) {
  const std::size_t n = train.dim(0), d = train.dim(1);
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += train[i * d + k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (train[i * d + k] - mean) * (train[i * d + k] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    const double inv = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < n; ++i) train[i * d + k] = (train[i * d + k] - mean) * inv;
    for (std::size_t i = 0; i < test.dim(0); ++i) test[i * d + k] = (test[i * d + k] - mean) * inv;
  }
}

// Full-batch cross-entropy training of the trainable tensors of `model` on
// inputs `x`; `head` maps inputs to class probabilities.
template <typename Head>
void fit_cross_entropy(ModelParams& model, const Tensor& x, std::span<const std::size_t> labels,
                       const AdaptConfig& cfg, Head head) {
  std::vector<Tensor*> trainable;
  for (Tensor* t : model.all()) {
    if (t->requires_grad()) trainable.push_back(t);
  }
  const Tensor targets = one_hot_rows(labels, model.config().num_classes);
  const double scale = -1.0 / static_cast<double>(labels.size());
  AdamState adam;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    model.zero_grad();
    Graph g;
    Var probs = head(g, g.input(x));
    Var ll = g.sum_all(g.mul(g.log(g.clamp_min(probs, kProbFloor)), g.input(targets)));
    g.backward(g.mul_scalar(ll, scale));
    adam_step(trainable, adam, cfg.lr, cfg.weight_decay);
  }
  model.zero_grad();
}

std::vector<std::size_t> predict(const Tensor& x, const std::function<Var(Graph&, Var)>& head) {
  Graph g;
  const Tensor& probs = g.value(head(g, g.input(x)));
  const std::size_t c = probs.dim(1);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < probs.dim(0); ++i) out.push_back(argmax_row(probs.values().subspan(i * c, c)));
  return out;
}

std::vector<std::size_t> frame_labels(const Dataset& ds, const FrameTable& table) {
  std::vector<std::size_t> out;
  for (std::size_t v : table.video_index) out.push_back(*ds.videos[v].label);
  return out;
}

void require_labeled(const Dataset& ds) {
  validate(ds);
  for (const auto& v : ds.videos) {
    if (!v.label) throw ContractError("adapt: video " + v.id + " is unlabeled; downstream data must be labeled");
  }
}

struct ProbeOutcome {
  std::vector<std::size_t> predicted;
  ModelParams model;
};

// Trains on rows `train_rows` and predicts rows `test_rows`.
ProbeOutcome train_and_predict(const ModelParams& pretrained, const Tensor& features, AdaptMode mode,
                               std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                               std::span<const std::size_t> labels, std::size_t num_classes,
                               const AdaptConfig& cfg) {
  ProbeOutcome out{{}, pretrained};
  ModelParams& model = out.model;
  model.set_requires_grad(false);
  model.reset_classifier(num_classes, derive_seed(cfg.seed, 0, "classifier"));
  model.set_requires_grad(ParamGroup::kClassifier, true);

  Tensor x_train = take_rows(features, train_rows);
  Tensor x_test = take_rows(features, test_rows);
  std::vector<std::size_t> y_train;
  for (std::size_t r : train_rows) y_train.push_back(labels[r]);

  std::function<Var(Graph&, Var)> head;
  if (mode == AdaptMode::kLinearProbe) {
    standardize(x_train, x_test);
    head = [&model](Graph& g, Var x) { return classify(g, model, x); };
  } else {
    model.set_requires_grad(ParamGroup::kBackboneFc, true);
    head = [&model](Graph& g, Var x) { return classify(g, model, backbone_fc(g, model, x)); };
  }
  fit_cross_entropy(model, x_train, y_train, cfg, head);
  out.predicted = predict(x_test, head);
  model.set_requires_grad(false);
  model.zero_grad();
  return out;
}

Tensor adapt_features(const ModelParams& pretrained, const FrameTable& table, AdaptMode mode) {
  return mode == AdaptMode::kLinearProbe ? encode_frames(pretrained, table.frames)
                                         : conv_features_of(pretrained, table.frames);
}

}  // namespace

AdaptResult adapt(const ModelParams& pretrained, const Dataset& ds, AdaptMode mode, const AdaptConfig& cfg) {
  require_labeled(ds);
  if (cfg.epochs == 0) throw ContractError("adapt: epochs must be positive");
  const auto [train_v, val_v] = split_videos(ds, cfg.val_fraction, derive_seed(cfg.seed, 0, "adapt-split"));
  if (val_v.empty()) throw ContractError("adapt: the split left no held-out videos");

  const FrameTable table = frame_table(ds, pretrained.config());
  const Tensor features = adapt_features(pretrained, table, mode);
  const auto labels = frame_labels(ds, table);

  std::vector<bool> is_val(ds.videos.size(), false);
  for (std::size_t v : val_v) is_val[v] = true;
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t r = 0; r < table.frames.size(); ++r) {
    (is_val[table.video_index[r]] ? test_rows : train_rows).push_back(r);
  }

  auto outcome = train_and_predict(pretrained, features, mode, train_rows, test_rows, labels, ds.num_classes, cfg);
  std::vector<std::size_t> truth;
  for (std::size_t r : test_rows) truth.push_back(labels[r]);

  AdaptResult result;
  result.metrics = evaluate(outcome.predicted, truth, ds.num_classes);
  for (std::size_t v : train_v) result.train_videos.push_back(ds.videos[v].id);
  for (std::size_t v : val_v) result.val_videos.push_back(ds.videos[v].id);
  result.params = std::move(outcome.model);
  return result;
}

Evaluation probe_cross_validated(const ModelParams& pretrained, const Dataset& ds, std::size_t folds,
                                 const AdaptConfig& cfg) {
  require_labeled(ds);
  if (folds < 2 || folds > ds.videos.size()) {
    throw ContractError("probe_cross_validated: folds must be in [2, " + std::to_string(ds.videos.size()) + "]");
  }
  // Stratified fold assignment: within each class, shuffled videos are dealt
  // round-robin, continuing the deal across classes.
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t v = 0; v < ds.videos.size(); ++v) by_class[*ds.videos[v].label].push_back(v);
  Rng rng(derive_seed(cfg.seed, 0, "folds"));
  std::vector<std::size_t> fold_of(ds.videos.size());
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t v : members) fold_of[v] = next++ % folds;
  }

  const FrameTable table = frame_table(ds, pretrained.config());
  const Tensor features = encode_frames(pretrained, table.frames);
  const auto labels = frame_labels(ds, table);

  std::vector<std::size_t> predicted, truth;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t r = 0; r < table.frames.size(); ++r) {
      (fold_of[table.video_index[r]] == f ? test_rows : train_rows).push_back(r);
    }
    auto outcome = train_and_predict(pretrained, features, AdaptMode::kLinearProbe, train_rows, test_rows, labels,
                                     ds.num_classes, cfg);
    predicted.insert(predicted.end(), outcome.predicted.begin(), outcome.predicted.end());
    for (std::size_t r : test_rows) truth.push_back(labels[r]);
  }
  return evaluate(predicted, truth, ds.num_classes);
}

}  // namespace uscl
