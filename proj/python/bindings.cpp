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

// Python module `uscl._core`: the loss, metrics, data and command entry points.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "uscl/commands.hpp"
#include "uscl/config.hpp"
#include "uscl/dataset.hpp"
#include "uscl/errors.hpp"
#include "uscl/loss.hpp"
#include "uscl/model.hpp"
#include "uscl/train.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

uscl::nd::Tensor to_tensor(const Array& a) {
  uscl::nd::Shape shape(a.shape(), a.shape() + a.ndim());
  return uscl::nd::Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const uscl::nd::Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

uscl::nd::Tensor matrix(const Array& a, const char* what) {
  if (a.ndim() != 2) throw uscl::ShapeError(std::string(what) + " must be a 2-D array");
  return to_tensor(a);
}

py::dict breakdown(const uscl::LossBreakdown& b) {
  py::dict d;
  d["l_con"] = b.l_con;
  d["l_sup"] = b.l_sup;
  d["lambda"] = b.lambda;
  d["total"] = b.total;
  d["n_labeled"] = b.n_labeled;
  return d;
}

std::vector<uscl::Frame> frames_from(const Array& images) {
  if (images.ndim() != 3) throw uscl::ShapeError("images must be a [B, H, W] array");
  const auto b = static_cast<std::size_t>(images.shape(0));
  const auto h = static_cast<std::size_t>(images.shape(1));
  const auto w = static_cast<std::size_t>(images.shape(2));
  std::vector<uscl::Frame> out;
  for (std::size_t i = 0; i < b; ++i) {
    const double* p = images.data() + i * h * w;
    out.push_back(uscl::Frame{w, h, std::vector<double>(p, p + h * w), i});
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semi-supervised video contrastive pretraining core";

  py::register_exception<uscl::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<uscl::ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<uscl::DomainError>(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception<uscl::ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<uscl::LoadError>(m, "LoadError", PyExc_IOError);
  py::register_exception<uscl::IoError>(m, "IoError", PyExc_IOError);

  // Loss.
  m.def(
      "cosine_sim",
      [](const Array& a, const Array& b) {
        const auto ta = to_tensor(a), tb = to_tensor(b);
        return uscl::cosine_sim(ta.values(), tb.values());
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "contrastive_loss", [](const Array& z, double tau) { return uscl::contrastive_loss(matrix(z, "z"), tau); },
      py::arg("z"), py::arg("tau") = 0.5);
  m.def(
      "supervised_loss",
      [](const Array& probs, const uscl::PairLabels& labels) {
        return uscl::supervised_loss(matrix(probs, "probs"), labels);
      },
      py::arg("probs"), py::arg("labels"));
  m.def(
      "total_loss",
      [](const Array& z, const Array& probs, const uscl::PairLabels& labels, double tau, double lambda) {
        return breakdown(uscl::total_loss(matrix(z, "z"), matrix(probs, "probs"), labels, tau, lambda));
      },
      py::arg("z"), py::arg("probs"), py::arg("labels"), py::arg("tau") = 0.5, py::arg("lam") = 0.2);

  // Metrics.
  m.def(
      "evaluate_json",
      [](const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth, std::size_t classes) {
        return uscl::evaluation_json(uscl::evaluate(pred, truth, classes));
      },
      py::arg("predicted"), py::arg("truth"), py::arg("num_classes"));
  m.def(
      "cluster_cohesion",
      [](const Array& emb, const std::vector<std::string>& ids) {
        const auto c = uscl::cluster_cohesion(matrix(emb, "embeddings"), ids);
        py::dict d;
        d["intra"] = c.intra;
        d["inter"] = c.inter;
        d["gap"] = c.gap;
        d["skipped"] = c.skipped;
        return d;
      },
      py::arg("embeddings"), py::arg("video_ids"));

  // Frames and checkpoints.
  m.def(
      "read_pgm",
      [](const std::filesystem::path& path) {
        const uscl::Frame f = uscl::read_pgm(path);
        Array out({static_cast<py::ssize_t>(f.height), static_cast<py::ssize_t>(f.width)});
        std::copy(f.pixels.begin(), f.pixels.end(), out.mutable_data());
        return out;
      },
      py::arg("path"));
  m.def(
      "write_pgm",
      [](const Array& image, const std::filesystem::path& path) {
        if (image.ndim() != 2) throw uscl::ShapeError("image must be a [H, W] array");
        const auto h = static_cast<std::size_t>(image.shape(0)), w = static_cast<std::size_t>(image.shape(1));
        uscl::write_pgm(uscl::Frame{w, h, std::vector<double>(image.data(), image.data() + h * w), 0}, path);
      },
      py::arg("image"), py::arg("path"));
  m.def(
      "encode",
      [](const std::filesystem::path& checkpoint, const Array& images) {
        const uscl::ModelParams p = uscl::load_checkpoint(checkpoint);
        return to_array(uscl::encode_frames(p, frames_from(images)));
      },
      py::arg("checkpoint"), py::arg("images"));

  // Run configs and commands.
  py::class_<uscl::RunConfig>(m, "RunConfig")
      .def_property(
          "output_dir", [](const uscl::RunConfig& c) { return c.output_dir; },
          [](uscl::RunConfig& c, const std::filesystem::path& p) { c.output_dir = p; })
      .def_property(
          "labeled_fraction", [](const uscl::RunConfig& c) { return c.labeled_fraction; },
          [](uscl::RunConfig& c, double v) { c.labeled_fraction = v; })
      .def_property(
          "ablation", [](const uscl::RunConfig& c) { return uscl::ablation_name(c.train.ablation); },
          [](uscl::RunConfig& c, const std::string& v) { c.train.ablation = uscl::ablation_from_name(v); })
      .def("set_seed", [](uscl::RunConfig& c, std::uint64_t s) { uscl::set_seed(c, s); }, py::arg("seed"))
      .def("render", [](const uscl::RunConfig& c) { return uscl::render_config(c); })
      .def("validate", [](const uscl::RunConfig& c) { uscl::validate(c); });
  m.def("parse_config", &uscl::parse_config, py::arg("text"));
  m.def("load_config", &uscl::load_config, py::arg("path"));

  m.def(
      "gen_data", [](const uscl::RunConfig& c, const std::filesystem::path& out) { return uscl::cmd_gen_data(c, out); },
      py::arg("config"), py::arg("out_dir"));
  m.def(
      "pretrain",
      [](const uscl::RunConfig& c) {
        uscl::PretrainResult r;
        {
          py::gil_scoped_release release;
          r = uscl::cmd_pretrain(c);
        }
        return uscl::run_record_jsonl(r.record);
      },
      py::arg("config"));
  m.def(
      "adapt_json",
      [](const uscl::RunConfig& c, const std::filesystem::path& checkpoint, const std::string& mode) {
        uscl::RunConfig cfg = c;
        cfg.adapt_mode = uscl::adapt_mode_from_name(mode);
        uscl::AdaptResult r;
        {
          py::gil_scoped_release release;
          r = uscl::cmd_adapt(cfg, checkpoint);
        }
        return uscl::evaluation_json(r.metrics);
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("mode") = "linear_probe");
  m.def(
      "eval_json",
      [](const uscl::RunConfig& c, const std::filesystem::path& checkpoint) {
        return uscl::evaluation_json(uscl::cmd_eval(c, checkpoint));
      },
      py::arg("config"), py::arg("checkpoint"));
  m.def("export_embeddings", &uscl::cmd_export_embeddings, py::arg("config"), py::arg("checkpoint"));
}
