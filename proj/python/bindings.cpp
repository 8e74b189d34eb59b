// Python bindings for the turn-over dropout core. Configs cross the boundary
// as JSON strings so the Python side accepts the same keys as config files.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "turnover/error.hpp"
#include "turnover/experiment.hpp"
#include "turnover/influence.hpp"
#include "turnover/mask.hpp"
#include "turnover/serialize.hpp"
#include "turnover/synthetic.hpp"
#include "turnover/training.hpp"

namespace py = pybind11;
using namespace turnover;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<long long, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> array_1d(std::size_t n, const T* data = nullptr) {
  py::array_t<T> a(std::vector<py::ssize_t>{static_cast<py::ssize_t>(n)});
  if (data != nullptr) std::copy(data, data + n, a.mutable_data());
  return a;
}

Dataset to_dataset(const Array& x, const Labels& y, std::size_t n_classes) {
  if (x.ndim() != 2) throw ShapeError("features must be a 2-D array");
  if (y.ndim() != 1 || y.shape(0) != x.shape(0)) throw ShapeError("labels must be 1-D with one entry per row");
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto cols = static_cast<std::size_t>(x.shape(1));
  std::vector<Instance> instances(rows);
  auto xv = x.unchecked<2>();
  auto yv = y.unchecked<1>();
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    instances[i].features.resize(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      instances[i].features[c] = xv(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(c));
    }
    const long long label = yv(static_cast<py::ssize_t>(i));
    if (label < 0) throw DataError("labels must be non-negative");
    instances[i].label = static_cast<std::size_t>(label);
    max_label = std::max(max_label, instances[i].label);
  }
  return Dataset(std::move(instances), n_classes != 0 ? n_classes : std::max<std::size_t>(2, max_label + 1));
}

py::tuple from_dataset(const Dataset& d) {
  Array x({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.feature_dim())});
  Labels y = array_1d<long long>(d.size());
  auto xv = x.mutable_unchecked<2>();
  auto yv = y.mutable_unchecked<1>();
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t c = 0; c < d.feature_dim(); ++c) {
      xv(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(c)) = d[i].features[c];
    }
    yv(static_cast<py::ssize_t>(i)) = static_cast<long long>(d[i].label);
  }
  return py::make_tuple(x, y, d.flipped_ids());
}

std::vector<Array> to_arrays(const Mask& m) {
  std::vector<Array> out;
  for (const auto& layer : m.layers) {
    out.push_back(array_1d(layer.size(), layer.data()));
  }
  return out;
}

Estimator estimator_from(const std::string& name) {
  if (name == "standard") return Estimator::Standard;
  if (name == "fullnet-baseline") return Estimator::FullnetBaseline;
  throw ConfigError("unknown estimator '" + name + "' (expected standard or fullnet-baseline)");
}

std::vector<std::uint64_t> ids_or_all(const std::optional<std::vector<std::uint64_t>>& ids, std::size_t n) {
  if (ids) return *ids;
  std::vector<std::uint64_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return all;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "turn-over dropout: per-instance masks, training, and influence estimation";
  m.attr("__version__") = TURNOVER_VERSION;

  auto base = py::register_exception<Error>(m, "TurnoverError");
  py::register_exception<ConfigError>(m, "UsageError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", data.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());

  m.def("mask_plan", [](const std::string& model_json, std::uint64_t seed, const std::string& scheme_json) {
    const auto model = Json::parse(model_json).get<ModelConfig>();
    model.validate();
    return Json(model.mask_plan(seed, scheme_from_json(Json::parse(scheme_json)))).dump();
  }, py::arg("model_json"), py::arg("seed"), py::arg("scheme_json") = R"({"kind":"direct"})");

  m.def("generate_mask", [](const std::string& plan_json, std::uint64_t id) {
    const auto plan = Json::parse(plan_json).get<MaskPlan>();
    return to_arrays(generate_mask(plan, id));
  }, py::arg("plan_json"), py::arg("instance_id"));

  m.def("flipped_mask", [](const std::string& plan_json, std::uint64_t id) {
    const auto plan = Json::parse(plan_json).get<MaskPlan>();
    return to_arrays(flip_mask(generate_mask(plan, id), plan));
  }, py::arg("plan_json"), py::arg("instance_id"));

  m.def("generate_synthetic", [](const std::string& spec_json) {
    const auto splits = generate_synthetic(Json::parse(spec_json).get<SyntheticSpec>());
    py::dict out;
    out["train"] = from_dataset(splits.train);
    out["val"] = from_dataset(splits.val);
    out["test"] = from_dataset(splits.test);
    return out;
  }, py::arg("spec_json"));

  py::class_<TrainedModel>(m, "Model")
      .def_property_readonly("turnover", [](const TrainedModel& t) { return t.plan.has_value(); })
      .def_property_readonly("plan_json", [](const TrainedModel& t) {
        return t.plan ? py::object(py::str(Json(*t.plan).dump())) : py::object(py::none());
      })
      .def("to_json", [](const TrainedModel& t) { return Json(t).dump(); })
      .def_static("from_json", [](const std::string& text) {
        auto t = Json::parse(text).get<TrainedModel>();
        t.config.validate();
        check_shapes(t.params, t.config);
        return t;
      })
      .def("logits", [](const TrainedModel& t, const Array& x, std::optional<std::uint64_t> instance_id, bool flipped) {
        Labels zeros = array_1d<long long>(x.ndim() == 2 ? static_cast<std::size_t>(x.shape(0)) : 0);
        std::fill(zeros.mutable_data(), zeros.mutable_data() + zeros.size(), 0);
        const Dataset d = to_dataset(x, zeros, t.config.num_classes());
        std::optional<Mask> mask;
        if (instance_id) {
          if (!t.plan) throw PreconditionError("model was trained without turn-over masks");
          mask = generate_mask(*t.plan, *instance_id);
          if (flipped) mask = flip_mask(*mask, *t.plan);
        }
        Array out({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(t.config.num_classes())});
        auto ov = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < d.size(); ++i) {
          const Vector z = logits(t.params, t.config, d[i].features, mask ? &*mask : nullptr);
          for (std::size_t c = 0; c < z.size(); ++c) ov(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(c)) = z[c];
        }
        return out;
      }, py::arg("x"), py::arg("instance_id") = py::none(), py::arg("flipped") = false)
      .def("evaluate", [](const TrainedModel& t, const Array& x, const Labels& y) {
        const auto e = evaluate(t.params, t.config, to_dataset(x, y, t.config.num_classes()));
        return py::make_tuple(e.accuracy, e.mean_loss);
      }, py::arg("x"), py::arg("y"));

  m.def("train", [](const Array& x, const Labels& y, const std::string& model_json, const std::string& train_json,
                    std::uint64_t seed, bool turnover, const std::string& scheme_json) {
    const auto model = Json::parse(model_json).get<ModelConfig>();
    auto config = Json::parse(train_json).get<TrainConfig>();
    config.init_seed = config.shuffle_seed = seed;
    config.turnover.reset();
    if (turnover) config.turnover = model.mask_plan(seed, scheme_from_json(Json::parse(scheme_json)));
    const Dataset d = to_dataset(x, y, model.num_classes());
    py::gil_scoped_release release;
    return train(d, config, model).model;
  }, py::arg("x"), py::arg("y"), py::arg("model_json"), py::arg("train_json") = "{}", py::arg("seed") = 0,
     py::arg("turnover") = true, py::arg("scheme_json") = R"({"kind":"direct"})");

  m.def("estimate_influence", [](const TrainedModel& t, const Array& x, long long label,
                                 std::optional<std::vector<std::uint64_t>> train_ids, std::size_t n_train,
                                 const std::string& estimator, unsigned jobs) {
    if (x.ndim() != 1) throw ShapeError("target features must be a 1-D array");
    Array row({py::ssize_t{1}, x.shape(0)});
    std::copy(x.data(), x.data() + x.shape(0), row.mutable_data());
    Labels lab = array_1d<long long>(1);
    lab.mutable_data()[0] = label;
    const Dataset target = to_dataset(row, lab, t.config.num_classes());
    const auto ids = ids_or_all(train_ids, n_train);
    EstimateOptions options;
    options.estimator = estimator_from(estimator);
    options.jobs = jobs;
    std::vector<InfluenceRecord> records;
    {
      py::gil_scoped_release release;
      records = estimate_influence(t, target[0], ids, options);
    }
    py::dict out;
    std::vector<double> flipped, masked, est;
    for (const auto& r : records) {
      flipped.push_back(r.flipped_loss);
      masked.push_back(r.masked_loss);
      est.push_back(r.estimate);
    }
    out["train_id"] = ids;
    out["flipped_loss"] = array_1d(flipped.size(), flipped.data());
    out["masked_loss"] = array_1d(masked.size(), masked.data());
    out["estimate"] = array_1d(est.size(), est.data());
    return out;
  }, py::arg("model"), py::arg("x"), py::arg("label"), py::arg("train_ids") = py::none(), py::arg("n_train") = 0,
     py::arg("estimator") = "standard", py::arg("jobs") = 1);

  m.def("self_influence", [](const TrainedModel& t, const Array& x, const Labels& y, unsigned jobs) {
    const Dataset d = to_dataset(x, y, t.config.num_classes());
    EstimateOptions options;
    options.jobs = jobs;
    SelfInfluence self;
    {
      py::gil_scoped_release release;
      self = self_influence(t, d, options);
    }
    std::vector<double> est;
    for (const auto& r : self.records) est.push_back(r.estimate);
    return array_1d(est.size(), est.data());
  }, py::arg("model"), py::arg("x"), py::arg("y"), py::arg("jobs") = 1);

  m.def("mean_influence_on_set", [](const TrainedModel& t, const Array& x_val, const Labels& y_val,
                                    std::size_t n_train, unsigned jobs) {
    const Dataset val = to_dataset(x_val, y_val, t.config.num_classes());
    const auto ids = ids_or_all(std::nullopt, n_train);
    EstimateOptions options;
    options.jobs = jobs;
    std::vector<double> means;
    {
      py::gil_scoped_release release;
      means = mean_influence_on_set(t, val, ids, options);
    }
    return array_1d(means.size(), means.data());
  }, py::arg("model"), py::arg("x_val"), py::arg("y_val"), py::arg("n_train"), py::arg("jobs") = 1);

  m.def("command_names", &command_names);

  m.def("run_command", [](const std::string& name, const std::filesystem::path& out,
                          std::optional<std::filesystem::path> config, std::optional<std::uint64_t> seed,
                          unsigned jobs, bool force, std::optional<double> fraction,
                          std::optional<std::size_t> top_k, const std::string& estimator,
                          std::optional<std::string> split) {
    CommandOptions o;
    o.config_path = std::move(config);
    o.seed = seed;
    o.jobs = jobs;
    o.force = force;
    o.fraction = fraction;
    o.top_k = top_k;
    o.estimator = estimator_from(estimator);
    if (split) {
      if (*split == "val") o.split = TargetSplit::Val;
      else if (*split == "test") o.split = TargetSplit::Test;
      else throw ConfigError("unknown split '" + *split + "' (expected val or test)");
    }
    CommandResult r;
    {
      py::gil_scoped_release release;
      r = run_command(name, out, o);
    }
    return py::make_tuple(r.outputs, r.summary);
  }, py::arg("name"), py::arg("out"), py::arg("config") = py::none(), py::arg("seed") = py::none(),
     py::arg("jobs") = 1, py::arg("force") = false, py::arg("fraction") = py::none(),
     py::arg("top_k") = py::none(), py::arg("estimator") = "standard", py::arg("split") = py::none());

  m.def("replay", [](const std::filesystem::path& from, const std::filesystem::path& to, unsigned jobs) {
    ReplayResult r;
    {
      py::gil_scoped_release release;
      r = replay(from, to, jobs);
    }
    py::dict out;
    out["commands"] = r.commands;
    out["compared"] = r.compared;
    out["mismatches"] = r.mismatches;
    return out;
  }, py::arg("source"), py::arg("target"), py::arg("jobs") = 1);

  m.def("pass_counters", [] {
    const auto c = pass_counters();
    return py::make_tuple(c.forward, c.backward);
  });
  m.def("reset_pass_counters", &reset_pass_counters);
}
