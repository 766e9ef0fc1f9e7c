// Python bindings for the core operations. Errors map to ValueError
// (configuration), IOError (data), ArithmeticError (geometry, training).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "boxoverlap/box.hpp"
#include "boxoverlap/error.hpp"
#include "boxoverlap/io.hpp"
#include "boxoverlap/overlap.hpp"
#include "boxoverlap/retrieval.hpp"
#include "boxoverlap/synth.hpp"
#include "boxoverlap/trainer.hpp"

namespace py = pybind11;
using namespace boxoverlap;

namespace {

BoxEmbedding make_box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.size() != upper.size()) throw ConfigError("lower and upper must have the same length");
  return {std::move(lower), std::move(upper)};
}

py::array_t<double> depth_array(const CameraView& v) {
  py::array_t<double> out({v.height(), v.width()});
  auto m = out.mutable_unchecked<2>();
  for (int r = 0; r < v.height(); ++r) {
    for (int c = 0; c < v.width(); ++c) m(r, c) = v.depth_at(r, c);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Box embeddings of images for asymmetric surface overlap";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ArithmeticError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_ArithmeticError);

  py::class_<OverlapRecord>(m, "OverlapRecord")
      .def(py::init<std::string, std::string, double, double>(), py::arg("id_x"), py::arg("id_y"),
           py::arg("nso_xy"), py::arg("nso_yx"))
      .def_readwrite("id_x", &OverlapRecord::id_x)
      .def_readwrite("id_y", &OverlapRecord::id_y)
      .def_readwrite("nso_xy", &OverlapRecord::nso_xy)
      .def_readwrite("nso_yx", &OverlapRecord::nso_yx)
      .def("__repr__", [](const OverlapRecord& r) {
        return "OverlapRecord('" + r.id_x + "', '" + r.id_y + "', " + std::to_string(r.nso_xy) +
               ", " + std::to_string(r.nso_yx) + ")";
      });

  py::class_<NsoConfig>(m, "NsoConfig")
      .def(py::init<>())
      .def_readwrite("radius", &NsoConfig::radius)
      .def_readwrite("n_sub", &NsoConfig::n_sub)
      .def_readwrite("seed", &NsoConfig::seed)
      .def_readwrite("weighted", &NsoConfig::weighted);

  py::class_<CameraView>(m, "CameraView")
      .def_property_readonly("id", &CameraView::id)
      .def_property_readonly("width", &CameraView::width)
      .def_property_readonly("height", &CameraView::height)
      .def_property_readonly("depth", &depth_array)
      .def_property_readonly("valid_count", &CameraView::valid_count);

  // Box algebra.
  m.def("sigma", [](double v, double rho) { return sigma(v, SmoothingConfig{rho}); }, py::arg("v"),
        py::arg("rho"));
  m.def(
      "nbo",
      [](std::vector<double> xl, std::vector<double> xu, std::vector<double> yl,
         std::vector<double> yu, double rho) {
        return nbo(make_box(std::move(xl), std::move(xu)), make_box(std::move(yl), std::move(yu)),
                   SmoothingConfig{rho});
      },
      py::arg("x_lower"), py::arg("x_upper"), py::arg("y_lower"), py::arg("y_upper"),
      py::arg("rho") = 5.0, "Normalized box overlap NBO(x -> y).");
  m.def(
      "volume",
      [](std::vector<double> lower, std::vector<double> upper, double rho) {
        return volume(make_box(std::move(lower), std::move(upper)), SmoothingConfig{rho});
      },
      py::arg("lower"), py::arg("upper"), py::arg("rho") = 5.0);

  // Retrieval helpers.
  m.def(
      "classify_relation",
      [](double qr, double rq, double low, double high, double unrelated) {
        return std::string(to_string(classify_relation(qr, rq, {low, high, unrelated}).relation));
      },
      py::arg("nbo_qr"), py::arg("nbo_rq"), py::arg("t_low") = 0.3, py::arg("t_high") = 0.6,
      py::arg("t_unrelated") = 0.05);
  m.def("estimate_scale", &estimate_scale, py::arg("nbo_qr"), py::arg("nbo_rq"),
        py::arg("pixels_q") = 1.0, py::arg("pixels_r") = 1.0);

  // Synthetic scenes and surface overlap.
  m.def(
      "make_pair",
      [](const std::string& pattern, const std::string& surface, std::uint64_t seed) {
        SyntheticPair p = make_pair(parse_pattern(pattern), make_surface(surface, seed), seed);
        py::dict expected;
        expected["xy"] = py::make_tuple(p.annotation.expected_xy.lo, p.annotation.expected_xy.hi);
        expected["yx"] = py::make_tuple(p.annotation.expected_yx.lo, p.annotation.expected_yx.hi);
        expected["relation"] = std::string(to_string(p.annotation.relation));
        return py::make_tuple(std::move(p.x), std::move(p.y), expected);
      },
      py::arg("pattern"), py::arg("surface") = "plane", py::arg("seed") = 0,
      "Two rendered views and their expected NSO intervals and relation.");
  m.def("compute_nso", py::overload_cast<const CameraView&, const CameraView&, const NsoConfig&>(&compute_nso),
        py::arg("x"), py::arg("y"), py::arg("config") = NsoConfig{},
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "generate_dataset",
      [](std::vector<std::string> patterns, const std::string& surface, std::uint64_t seed,
         std::optional<std::filesystem::path> out_dir, unsigned threads) {
        DatasetSpec spec = patterns.empty() ? default_dataset_spec() : DatasetSpec{};
        if (!patterns.empty()) spec.patterns = std::move(patterns);
        spec.surface = surface;
        spec.seed = seed;
        py::gil_scoped_release release;
        return generate_dataset(spec, {threads, false}, out_dir).records;  // converted after reacquire
      },
      py::arg("patterns") = std::vector<std::string>{}, py::arg("surface") = "heightfield",
      py::arg("seed") = 7, py::arg("out_dir") = std::nullopt, py::arg("threads") = 1,
      "Renders a synthetic scene and returns its pair overlaps; empty patterns = default dataset.");
  m.def("read_pairs_csv", &read_pairs_csv, py::arg("path"));
  m.def(
      "write_pairs_csv",
      [](const std::filesystem::path& p, const std::vector<OverlapRecord>& r) { write_pairs_csv(p, r); },
      py::arg("path"), py::arg("records"));

  // Embeddings and training.
  py::class_<EmbeddingTable>(m, "EmbeddingTable")
      .def_property_readonly("kind", [](const EmbeddingTable& t) { return std::string(to_string(t.kind())); })
      .def_property_readonly("dim", &EmbeddingTable::dim)
      .def_property_readonly("ids", &EmbeddingTable::ids)
      .def("__len__", &EmbeddingTable::size)
      .def("params", [](const EmbeddingTable& t, const std::string& id) {
        const auto p = t.params(t.index_of(id));
        return std::vector<double>(p.begin(), p.end());
      })
      .def("box", [](const EmbeddingTable& t, const std::string& id) {
        BoxEmbedding b = t.box(t.index_of(id));
        return py::make_tuple(b.lower, b.upper);
      })
      .def(
          "predict",
          [](const EmbeddingTable& t, const std::string& x, const std::string& y, double rho) {
            const Prediction p = predict(t, t.index_of(x), t.index_of(y), SmoothingConfig{rho});
            return py::make_tuple(p.xy, p.yx);
          },
          py::arg("x"), py::arg("y"), py::arg("rho") = 5.0, "Predicted (overlap x->y, y->x).");

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("dim", &TrainConfig::dim)
      .def_readwrite("rho", &TrainConfig::rho)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("box_scale", &TrainConfig::box_scale)
      .def_readwrite("final_lr_fraction", &TrainConfig::final_lr_fraction)
      .def_readwrite("schedule_steps", &TrainConfig::schedule_steps)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("l1_norm", &Metrics::l1_norm)
      .def_readonly("rmse", &Metrics::rmse)
      .def_readonly("acc_at_0_1", &Metrics::acc_at_0_1)
      .def_readonly("n_pairs", &Metrics::n_pairs);

  m.def(
      "train",
      [](std::vector<OverlapRecord> records, const std::string& model, const TrainConfig& cfg) {
        const PairDataset data = PairDataset::from_records(std::move(records));
        const ModelKind kind = parse_model_kind(model);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(data, cfg, kind);
        }
        return py::make_tuple(std::move(r.checkpoint.table), std::move(r.loss_trace));
      },
      py::arg("records"), py::arg("model") = "box", py::arg("config") = TrainConfig{},
      "Returns (table, per-step loss trace).");
  m.def(
      "evaluate",
      [](const EmbeddingTable& t, const std::vector<OverlapRecord>& pairs, double rho) {
        return evaluate(t, pairs, SmoothingConfig{rho});
      },
      py::arg("table"), py::arg("pairs"), py::arg("rho") = 5.0);
  m.def(
      "save_table",
      [](const std::filesystem::path& p, const EmbeddingTable& t) { write_checkpoint(p, {t, {}}); },
      py::arg("path"), py::arg("table"));
  m.def(
      "load_table", [](const std::filesystem::path& p) { return read_checkpoint(p).table; }, py::arg("path"));

  // Index.
  py::class_<QueryResult>(m, "QueryResult")
      .def_readonly("id", &QueryResult::id)
      .def_readonly("enclosure", &QueryResult::enclosure)
      .def_readonly("concentration", &QueryResult::concentration)
      .def_readonly("score", &QueryResult::score);

  py::class_<BoxIndex>(m, "BoxIndex")
      .def(py::init([](const EmbeddingTable& t, double rho) { return BoxIndex::build(t, SmoothingConfig{rho}); }),
           py::arg("table"), py::arg("rho") = 5.0)
      .def("__len__", &BoxIndex::size)
      .def(
          "query_topk",
          [](const BoxIndex& index, const std::string& id, std::size_t k) {
            return index.query_topk(index.box(id), k);
          },
          py::arg("query_id"), py::arg("k") = 10)
      .def(
          "query_box",
          [](const BoxIndex& index, std::vector<double> lower, std::vector<double> upper, std::size_t k) {
            return index.query_topk(make_box(std::move(lower), std::move(upper)), k);
          },
          py::arg("lower"), py::arg("upper"), py::arg("k") = 10)
      .def(
          "query_quadrant",
          [](const BoxIndex& index, const std::string& id, std::pair<double, double> enc,
             std::pair<double, double> conc) {
            return index.query_quadrant(index.box(id), {enc.first, enc.second}, {conc.first, conc.second});
          },
          py::arg("query_id"), py::arg("enclosure") = std::pair<double, double>{0.0, 1.0},
          py::arg("concentration") = std::pair<double, double>{0.0, 1.0});
}
