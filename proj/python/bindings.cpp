#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "coal/checkpoint.hpp"
#include "coal/errors.hpp"
#include "coal/evaluation.hpp"
#include "coal/experiment.hpp"
#include "coal/model.hpp"
#include "coal/objectives.hpp"
#include "coal/selftrain.hpp"
#include "coal/shift.hpp"

namespace py = pybind11;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

namespace {

coal::Tensor2 to_tensor(const Array& a) {
  if (a.ndim() != 2) throw coal::DimensionError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return coal::Tensor2(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const coal::Tensor2& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

std::vector<int> to_ints(const IntArray& a) {
  if (a.ndim() != 1) throw coal::DimensionError("expected a 1-D label array");
  return {a.data(), a.data() + a.size()};
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict gradients_dict(const coal::ModelParams& params, const coal::Gradients& grads) {
  py::dict out;
  const auto blocks = params.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) out[py::str(blocks[i]->name)] = to_array(grads.per_block[i]);
  return out;
}

py::dict losses_dict(const coal::LossBreakdown& l) {
  py::dict out;
  out["l_sc"] = l.l_sc;
  out["l_target_pseudo"] = l.l_target_pseudo;
  out["l_st"] = l.l_st;
  out["l_h"] = l.l_h;
  out["alpha"] = l.alpha;
  return out;
}

coal::ShiftSpec make_spec(double alpha, double degree, std::size_t budget, const std::string& direction,
                          std::size_t min_per_class, double interval_width) {
  coal::ShiftSpec s;
  s.pareto_alpha = alpha;
  s.degree = degree;
  s.budget = budget;
  s.direction = coal::parse_direction(direction);
  s.min_per_class = min_per_class;
  s.interval_width = interval_width;
  return s;
}

coal::ExperimentConfig experiment_config(const py::object& config) {
  if (py::isinstance<py::str>(config)) return coal::load_experiment_config(config.cast<std::string>());
  return coal::experiment_from_json(from_py(config));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of the coal lab";

  const auto base = py::register_exception<coal::Error>(m, "CoalError", PyExc_RuntimeError);
#define COAL_PY_ERROR(Name) py::register_exception<coal::Name>(m, #Name, base.ptr());
  COAL_PY_ERROR(DimensionError)
  COAL_PY_ERROR(IndexError)
  COAL_PY_ERROR(NormalizationError)
  COAL_PY_ERROR(DivergenceError)
  COAL_PY_ERROR(UsageError)
  COAL_PY_ERROR(ProtocolError)
  COAL_PY_ERROR(FormatError)
  COAL_PY_ERROR(ConsistencyError)
  COAL_PY_ERROR(LengthError)
  COAL_PY_ERROR(SamplerError)
  COAL_PY_ERROR(EstimationError)
  COAL_PY_ERROR(MetricError)
  COAL_PY_ERROR(TableError)
  COAL_PY_ERROR(ConfigError)
  COAL_PY_ERROR(IoError)
#undef COAL_PY_ERROR

  py::class_<coal::ModelParams>(m, "Model")
      .def(py::init([](std::size_t input_dim, std::vector<std::size_t> layer_widths, std::size_t num_classes,
                       double temperature, std::uint64_t seed) {
             coal::ModelConfig c;
             c.input_dim = input_dim;
             c.layer_widths = std::move(layer_widths);
             c.num_classes = num_classes;
             c.temperature = temperature;
             c.seed = seed;
             return coal::init_model(c);
           }),
           py::arg("input_dim"), py::arg("layer_widths"), py::arg("num_classes"),
           py::arg("temperature") = 0.05, py::arg("seed") = 0)
      .def_property_readonly("input_dim", &coal::ModelParams::input_dim)
      .def_property_readonly("embedding_dim", &coal::ModelParams::embedding_dim)
      .def_property_readonly("num_classes", &coal::ModelParams::num_classes)
      .def_readonly("temperature", &coal::ModelParams::temperature)
      .def("block_names",
           [](const coal::ModelParams& p) {
             std::vector<std::string> names;
             for (const auto* b : p.blocks()) names.push_back(b->name);
             return names;
           })
      .def("get_block",
           [](const coal::ModelParams& p, const std::string& name) {
             for (const auto* b : p.blocks()) {
               if (b->name == name) return to_array(b->value);
             }
             throw coal::UsageError("no block named '" + name + "'");
           })
      .def("set_block",
           [](coal::ModelParams& p, const std::string& name, const Array& value) {
             for (auto* b : p.blocks()) {
               if (b->name != name) continue;
               coal::Tensor2 t = to_tensor(value);
               if (!t.same_shape(b->value)) {
                 throw coal::DimensionError("block '" + name + "' has shape " + b->value.shape_string() +
                                            ", got " + t.shape_string());
               }
               *b = coal::ParamBlock(name, std::move(t));
               return;
             }
             throw coal::UsageError("no block named '" + name + "'");
           })
      .def("extract", [](const coal::ModelParams& p, const Array& x) {
        return to_array(coal::extract_features(p, to_tensor(x)));
      })
      .def("classify",
           [](const coal::ModelParams& p, const Array& x) {
             const coal::Prediction pred = coal::classify(p, to_tensor(x));
             return py::make_tuple(to_array(pred.probabilities), to_array(pred.embeddings));
           },
           "Returns (probabilities, embeddings).")
      .def("predict", [](const coal::ModelParams& p, const Array& x) {
        return coal::argmax_rows(coal::classify(p, to_tensor(x)).probabilities);
      });

  m.def("save_checkpoint", [](const coal::ModelParams& p, const std::string& path) {
    coal::save_checkpoint(path, p);
  });
  m.def("load_checkpoint", [](const std::string& path) { return coal::load_checkpoint(path); });

  m.def(
      "adaptive_objective",
      [](const coal::ModelParams& p, const Array& xs, const IntArray& ys, const Array& xt,
         const IntArray& pseudo, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
         double alpha, bool use_pseudo, bool use_entropy) {
        const std::vector<std::uint8_t> m(mask.data(), mask.data() + mask.size());
        const auto r = coal::adaptive_objective(p, to_tensor(xs), to_ints(ys), to_tensor(xt), to_ints(pseudo), m,
                                                alpha, {use_pseudo, use_entropy});
        return py::make_tuple(losses_dict(r.losses), gradients_dict(p, r.gradients));
      },
      py::arg("model"), py::arg("source_inputs"), py::arg("source_labels"), py::arg("target_inputs"),
      py::arg("pseudo_labels"), py::arg("mask"), py::arg("alpha") = 0.1, py::arg("pseudo") = true,
      py::arg("entropy") = true, "Returns (losses, gradients by block name).");

  m.def(
      "entropy_naive",
      [](const coal::ModelParams& p, const Array& xt) {
        const auto r = coal::entropy_naive(p, to_tensor(xt));
        return py::make_tuple(r.value, gradients_dict(p, r.gradients));
      },
      "Mean prediction entropy and its plain gradient.");

  m.def(
      "select_top_k",
      [](const Array& probabilities, double k_percent) {
        const auto pseudo =
            coal::select_top_k_per_class(coal::assign_from_probabilities(to_tensor(probabilities)), k_percent);
        std::vector<bool> mask(pseudo.mask.begin(), pseudo.mask.end());
        return py::make_tuple(pseudo.labels, pseudo.confidence, mask);
      },
      py::arg("probabilities"), py::arg("k_percent"), "Returns (labels, confidence, mask).");
  m.def("selection_quota", &coal::selection_quota, py::arg("class_size"), py::arg("k_percent"));
  m.def(
      "advance_k",
      [](double k0, double k_step, double k_max, std::size_t epoch) {
        return coal::advance_k({k0, k_step, k_max}, epoch);
      },
      py::arg("k0"), py::arg("k_step"), py::arg("k_max"), py::arg("epoch"));

  m.def(
      "pareto_proportions",
      [](std::size_t c, double alpha, double width) {
        return coal::pareto_proportions(c, alpha, width).proportions();
      },
      py::arg("num_classes"), py::arg("alpha"), py::arg("interval_width") = 1.0);
  m.def(
      "shift_counts",
      [](std::size_t c, double alpha, double degree, std::size_t budget, const std::string& direction,
         std::size_t min_per_class, double width) {
        return coal::shift_counts(c, make_spec(alpha, degree, budget, direction, min_per_class, width));
      },
      py::arg("num_classes"), py::arg("alpha"), py::arg("degree"), py::arg("budget"),
      py::arg("direction") = "ut", py::arg("min_per_class") = 2, py::arg("interval_width") = 1.0);
  m.def("rounding_js_bound", &coal::rounding_js_bound, py::arg("num_classes"), py::arg("total"));
  m.def(
      "js_distance",
      [](const std::vector<double>& p, const std::vector<double>& q) {
        return coal::js_distance(coal::LabelDistribution::from_weights(p), coal::LabelDistribution::from_weights(q));
      },
      py::arg("p"), py::arg("q"));
  m.def(
      "js_label_bound",
      [](const std::vector<double>& p, const std::vector<double>& q, double feature_term) {
        return coal::js_label_bound(coal::LabelDistribution::from_weights(p),
                                    coal::LabelDistribution::from_weights(q), feature_term);
      },
      py::arg("p"), py::arg("q"), py::arg("feature_term") = 0.0);

  m.def(
      "per_class_mean_accuracy",
      [](const IntArray& truth, const IntArray& predicted, std::size_t c) {
        return coal::per_class_mean_accuracy(
            coal::ConfusionMatrix::from_predictions(to_ints(truth), to_ints(predicted), c));
      },
      py::arg("truth"), py::arg("predicted"), py::arg("num_classes"));
  m.def(
      "confusion_matrix",
      [](const IntArray& truth, const IntArray& predicted, std::size_t c) {
        const auto cm = coal::ConfusionMatrix::from_predictions(to_ints(truth), to_ints(predicted), c);
        py::array_t<std::size_t> out({c, c});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < c; ++i) {
          for (std::size_t j = 0; j < c; ++j) v(i, j) = cm(i, j);
        }
        return out;
      },
      py::arg("truth"), py::arg("predicted"), py::arg("num_classes"));
  m.def(
      "project_features_2d",
      [](const Array& x) {
        const auto p = coal::project_features_2d(to_tensor(x));
        py::dict out;
        out["coordinates"] = to_array(p.coordinates);
        out["components"] = to_array(p.components);
        out["variances"] = p.variances;
        out["warnings"] = p.warnings;
        return out;
      },
      py::arg("embeddings"));

  m.def(
      "generate_twin_domains",
      [](std::size_t classes, std::size_t per_class, double noise, double rotation_deg, std::uint64_t seed) {
        coal::TwinDomainConfig cfg;
        cfg.num_classes = classes;
        cfg.per_class = per_class;
        cfg.noise = noise;
        cfg.rotation_deg = rotation_deg;
        auto [s, t] = coal::generate_twin_domains(cfg, seed);
        return py::make_tuple(to_array(s.features), s.labels, to_array(t.features), t.labels);
      },
      py::arg("num_classes") = 4, py::arg("per_class") = 500, py::arg("noise") = 1.0,
      py::arg("rotation_deg") = 30.0, py::arg("seed") = 0, "Returns (Xs, ys, Xt, yt).");

  m.def(
      "run_experiment",
      [](const py::object& config, std::optional<std::string> out_dir) {
        std::optional<std::filesystem::path> dir;
        if (out_dir) dir = *out_dir;
        const coal::ExperimentConfig cfg = experiment_config(config);
        coal::RunReport report;
        {
          py::gil_scoped_release release;
          report = coal::run_experiment(cfg, dir);
        }
        return to_py(coal::to_json(report));
      },
      py::arg("config"), py::arg("out_dir") = py::none(),
      "Runs one experiment from a config dict or JSON path; returns the report document.");
  m.def(
      "render_table",
      [](const py::list& reports, const std::string& format) {
        std::vector<coal::RunReport> rs;
        for (const auto& r : reports) rs.push_back(coal::report_from_json(from_py(py::reinterpret_borrow<py::object>(r))));
        return coal::render_table(rs, coal::parse_table_format(format));
      },
      py::arg("reports"), py::arg("format") = "csv");
}
