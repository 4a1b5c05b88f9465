/*
 * Copyright 2026 The DFFRec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Python bindings: store and log I/O, validation, synthetic data, metrics,
// run configs and the command-line entry point.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>
#include <string>
#include <vector>

#include "dffrec/cli.hpp"
#include "dffrec/config.hpp"
#include "dffrec/error.hpp"
#include "dffrec/evaluation.hpp"
#include "dffrec/feature_store.hpp"
#include "dffrec/interaction_log.hpp"
#include "dffrec/synth.hpp"

namespace py = pybind11;
using namespace dffrec;

namespace {

std::vector<float> ToVector(std::span<const float> s) { return {s.begin(), s.end()}; }

py::dict Entries(const std::vector<std::pair<std::string, std::string>>& entries) {
  py::dict d;
  for (const auto& [k, v] : entries) d[py::str(k)] = v;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Layer-fused visual item features for sequential recommendation";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<FeatureStore>(m, "FeatureStore")
      .def_static("read", &FeatureStore::Read, py::arg("path"))
      .def("write", &FeatureStore::Write, py::arg("path"))
      .def_property_readonly("num_items", &FeatureStore::num_items)
      .def_property_readonly("num_layers", &FeatureStore::num_layers)
      .def_property_readonly("dim", &FeatureStore::dim)
      .def_property_readonly("provenance",
                             [](const FeatureStore& s) { return ProvenanceName(s.header().provenance); })
      .def_property_readonly("model_tag", [](const FeatureStore& s) { return s.header().model_tag; })
      .def_property_readonly("item_ids", &FeatureStore::item_ids)
      .def("__contains__", &FeatureStore::Contains)
      .def("item", [](const FeatureStore& s, std::uint64_t id) { return ToVector(s.Item(id)); })
      .def(
          "layer",
          [](const FeatureStore& s, std::uint64_t id, std::size_t layer) {
            if (layer >= s.num_layers()) throw py::index_error("layer out of range");
            return ToVector(s.Layer(id, layer));
          },
          py::arg("item_id"), py::arg("layer"));

  py::class_<InteractionLog>(m, "InteractionLog")
      .def_static("read_tsv", &InteractionLog::ReadTsv, py::arg("path"))
      .def("write_tsv", &InteractionLog::WriteTsv, py::arg("path"))
      .def_property_readonly("num_events", &InteractionLog::num_events)
      .def("sequences", [](const InteractionLog& log) {
        py::dict d;
        for (const auto& [user, items] : log.sequences()) d[py::int_(user)] = items;
        return d;
      });

  py::class_<StoreValidationReport>(m, "ValidationReport")
      .def_property_readonly("clean", &StoreValidationReport::clean)
      .def_readonly("missing_items", &StoreValidationReport::missing_items)
      .def_property_readonly("non_finite",
                             [](const StoreValidationReport& r) {
                               std::vector<std::pair<std::uint64_t, std::size_t>> out;
                               for (const auto& e : r.non_finite) out.emplace_back(e.item_id, e.layer);
                               return out;
                             })
      .def("summary", &StoreValidationReport::Summary);

  m.def(
      "validate",
      [](const std::filesystem::path& store, const std::filesystem::path& log) {
        return ValidateStore(FeatureStore::Read(store), InteractionLog::ReadTsv(log));
      },
      py::arg("store"), py::arg("log"));

  m.def("synth_defaults", [] { return Entries(SynthEntries(SynthSpec{})); });
  m.def(
      "generate_synthetic",
      [](const std::string& spec_text, std::uint64_t seed, const std::filesystem::path& store,
         const std::filesystem::path& log, const std::filesystem::path& caption_store) {
        const SynthSpec spec = ParseSynthSpec(spec_text, "<spec>");
        const SynthCatalog catalog = GenerateCatalog(spec, seed);
        catalog.store.Write(store);
        GenerateInteractions(spec, catalog, seed).WriteTsv(log);
        if (!caption_store.empty()) GenerateCaptionStore(spec, catalog, seed).Write(caption_store);
      },
      py::arg("spec_text") = "", py::arg("seed") = 0, py::arg("store"), py::arg("log"),
      py::arg("caption_store") = std::filesystem::path{});

  m.def(
      "rank_target",
      [](const std::vector<float>& scores, std::size_t target, const std::vector<bool>& excluded) {
        std::vector<std::uint8_t> mask(excluded.begin(), excluded.end());
        return RankTarget(scores, target, mask);
      },
      py::arg("scores"), py::arg("target"), py::arg("excluded") = std::vector<bool>{});
  m.def(
      "metrics_at",
      [](std::size_t rank, std::size_t n) {
        const HitNdcg h = MetricsAtN(rank, n);
        return py::make_tuple(h.hit, h.ndcg);
      },
      py::arg("rank"), py::arg("n"));

  m.def("config_defaults", [] { return Entries(ConfigEntries(RunConfig{})); });
  m.def(
      "parse_config",
      [](const std::string& text) { return Entries(ConfigEntries(ParseRunConfig(text, "<config>"))); },
      py::arg("text"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> argv = {"dffrec"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = RunCli(argv, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
