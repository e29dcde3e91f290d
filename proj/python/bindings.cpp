// Python bindings. Passages, trees and reports cross the boundary as dicts
// in the same JSON shapes the file formats use.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "ucca/conversion.hpp"
#include "ucca/evaluation.hpp"
#include "ucca/io.hpp"
#include "ucca/training.hpp"

namespace py = pybind11;
using namespace ucca;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::handle& o) {
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Passage passage_of(const py::handle& o) { return passage_from_json(from_py(o)); }

std::vector<std::string> violations(const py::dict& passage) {
  const Passage p = passage_of(passage);
  if (!p.graph) throw Error("passage " + p.id + " has no graph");
  std::vector<std::string> out;
  for (const auto& v : validate_graph(*p.graph, p.size()).violations) {
    out.push_back(std::string(to_string(v.kind)) + ": " + v.message);
  }
  return out;
}

py::object graph_to_tree_py(const py::dict& passage) {
  const Passage p = passage_of(passage);
  if (!p.graph) throw Error("passage " + p.id + " has no graph");
  return to_py(tree_entry_to_json({p.id, p.language, p.terminals, graph_to_tree(*p.graph)}));
}

py::object tree_to_graph_py(const py::dict& entry, bool lenient) {
  const TreeEntry e = tree_entry_from_json(from_py(entry));
  ConversionOptions options;
  options.lenient = lenient;
  Passage p{e.id, e.language, e.terminals,
            tree_to_graph(e.conversion.tree, e.conversion.remotes, e.conversion.discontinuities, options)};
  return to_py(passage_to_json(p));
}

py::object evaluate_py(const py::list& pred, const py::list& gold, bool length, bool category) {
  if (py::len(pred) != py::len(gold)) throw Error("pred and gold passage lists differ in length");
  std::vector<PairCounts> pairs;
  for (std::size_t k = 0; k < py::len(gold); ++k) {
    const Passage p = passage_of(pred[k]);
    const Passage g = passage_of(gold[k]);
    if (!p.graph || !g.graph) throw Error("evaluation needs graphs on both sides");
    pairs.push_back(score_pair(*p.graph, *g.graph));
  }
  return to_py(Json::parse(format_report_json(aggregate(pairs), {length, category})));
}

class Parser {
 public:
  explicit Parser(const std::string& checkpoint) : ck_(load_checkpoint(checkpoint)) {}

  py::object parse(const py::dict& passage, std::optional<double> threshold, bool remotes) const {
    Passage p = passage_of(passage);
    if (ck_.model.config().external_dim > 0) throw Error("this checkpoint needs external vectors");
    ParseOutput out;
    {
      py::gil_scoped_release release;
      out = ck_.model.parse(p, nullptr, threshold.value_or(ck_.remote_threshold), remotes);
    }
    p.graph = std::move(out.graph);
    return to_py(passage_to_json(p));
  }

  std::vector<std::string> labels() const { return ck_.model.labels().labels(); }
  double remote_threshold() const { return ck_.remote_threshold; }
  std::string config_hash() const { return ck_.config_hash; }

 private:
  Checkpoint ck_;
};

}  // namespace

PYBIND11_MODULE(ucca_parser, m) {
  m.doc() = "UCCA graph parsing: formats, conversion, evaluation, training and parsing";
  m.attr("__version__") = UCCA_VERSION;
  py::register_exception<Error>(m, "UccaError", PyExc_ValueError);

  m.def("load_passage", [](const std::string& path) { return to_py(passage_to_json(load_passage(path))); },
        py::arg("path"));
  m.def("save_passage", [](const py::dict& passage, const std::string& path) { save_passage(passage_of(passage), path); },
        py::arg("passage"), py::arg("path"));
  m.def(
      "load_corpus",
      [](const std::string& path, bool lenient) {
        LoadOptions options;
        options.lenient = lenient;
        py::list out;
        for (const auto& p : load_corpus(path, options).passages) out.append(to_py(passage_to_json(p)));
        return out;
      },
      py::arg("path"), py::arg("lenient") = false);
  m.def("validate", &violations, py::arg("passage"), "Violated graph invariants; empty when valid.");
  m.def("graph_to_tree", &graph_to_tree_py, py::arg("passage"));
  m.def("tree_to_graph", &tree_to_graph_py, py::arg("entry"), py::arg("lenient") = false);
  m.def("evaluate", &evaluate_py, py::arg("pred"), py::arg("gold"), py::arg("length_breakdown") = false,
        py::arg("category_breakdown") = false);
  m.def("f1", py::overload_cast<double, double>(&f1), py::arg("precision"), py::arg("recall"));
  m.def("corpus_stats", [](const std::string& path) { return to_py(stats_to_json(corpus_stats(path))); },
        py::arg("path"));
  m.def(
      "train",
      [](const std::string& config_path, const std::string& checkpoint, std::optional<std::uint64_t> seed) {
        TrainConfig config = load_config(config_path);
        if (seed) config.seed = *seed;
        Json log;
        {
          py::gil_scoped_release release;
          TrainResult r = train(config);
          save_checkpoint(r.model, config.remote_threshold, config_hash(config), checkpoint);
          log = std::move(r.log);
        }
        return to_py(log);
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("seed") = py::none(),
      "Trains from a config file, writes the checkpoint and returns the training log.");

  py::class_<Parser>(m, "Parser")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("parse", &Parser::parse, py::arg("passage"), py::arg("threshold") = py::none(), py::arg("remotes") = true)
      .def_property_readonly("labels", &Parser::labels)
      .def_property_readonly("remote_threshold", &Parser::remote_threshold)
      .def_property_readonly("config_hash", &Parser::config_hash);
}
