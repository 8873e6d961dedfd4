#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cli.hpp"
#include "skelattack/attack.hpp"
#include "skelattack/contrastive.hpp"
#include "skelattack/dataset_io.hpp"
#include "skelattack/dynamics.hpp"
#include "skelattack/encoder.hpp"
#include "skelattack/error.hpp"
#include "skelattack/evaluation.hpp"
#include "skelattack/manifold.hpp"
#include "skelattack/motion.hpp"
#include "skelattack/smi.hpp"

namespace py = pybind11;
using namespace skelattack;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labelled = std::pair<Array, std::optional<int>>;

Tensor3 to_tensor(const Array& a) {
  if (a.ndim() != 3) throw Error("expected a 3-d array (frames, joints, channels)");
  Tensor3 t(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
            static_cast<std::size_t>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), t.flat().begin());
  return t;
}

Array to_array(const Tensor3& t) {
  Array a({t.frames(), t.joints(), t.channels()});
  std::copy(t.flat().begin(), t.flat().end(), a.mutable_data());
  return a;
}

std::vector<Tensor3> to_tensors(const std::vector<Array>& arrays) {
  std::vector<Tensor3> out;
  out.reserve(arrays.size());
  for (const Array& a : arrays) out.push_back(to_tensor(a));
  return out;
}

SkeletalSequence to_sequence(const Array& a, std::optional<int> label) {
  Tensor3 t = to_tensor(a);
  auto topology = SkeletonTopology::for_joint_count(t.joints());
  return SkeletalSequence(std::move(t), std::move(topology), label);
}

std::vector<SkeletalSequence> to_sequences(const std::vector<Labelled>& items) {
  std::vector<SkeletalSequence> out;
  out.reserve(items.size());
  for (const auto& [a, label] : items) out.push_back(to_sequence(a, label));
  return out;
}

std::vector<Labelled> from_sequences(const std::vector<SkeletalSequence>& data) {
  std::vector<Labelled> out;
  out.reserve(data.size());
  for (const SkeletalSequence& s : data) out.emplace_back(to_array(s.frames()), s.label());
  return out;
}

// frames x dofs coefficient table; rows where the coefficient is undefined
// are NaN.
py::array_t<double> coefficient_table(const TvarCoefficients& c, std::size_t begin,
                                      double (TvarCoefficients::*get)(std::size_t, std::size_t)
                                          const) {
  py::array_t<double> out({c.frames(), c.dofs()});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t t = 0; t < c.frames(); ++t) {
    for (std::size_t d = 0; d < c.dofs(); ++d) {
      v(t, d) = t < begin ? std::numeric_limits<double>::quiet_NaN() : (c.*get)(t, d);
    }
  }
  return out;
}

void fill_coefficients(TvarCoefficients& c, std::size_t begin, const py::array_t<double>& table,
                       double& (TvarCoefficients::*get)(std::size_t, std::size_t)) {
  if (table.ndim() != 2 || static_cast<std::size_t>(table.shape(0)) != c.frames() ||
      static_cast<std::size_t>(table.shape(1)) != c.dofs()) {
    throw Error("coefficient table must have shape (frames, joints*channels)");
  }
  auto v = table.unchecked<2>();
  for (std::size_t t = begin; t < c.frames(); ++t) {
    for (std::size_t d = 0; d < c.dofs(); ++d) (c.*get)(t, d) = v(t, d);
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "No-box adversarial attacks on skeletal motion sequences";
  py::register_exception<Error>(m, "SkelattackError", PyExc_ValueError);

  m.def(
      "generate_synthetic_dataset",
      [](int classes, int per_class, int frames, std::uint64_t seed, double jitter) {
        SyntheticSpec spec;
        spec.class_count = classes;
        spec.per_class = per_class;
        spec.frames = frames;
        spec.seed = seed;
        spec.jitter_sigma = jitter;
        return from_sequences(generate_synthetic_dataset(spec));
      },
      py::arg("classes") = SyntheticSpec{}.class_count,
      py::arg("per_class") = SyntheticSpec{}.per_class, py::arg("frames") = SyntheticSpec{}.frames,
      py::arg("seed") = SyntheticSpec{}.seed, py::arg("jitter") = SyntheticSpec{}.jitter_sigma,
      "List of (frames x 25 x 3 array, label) pairs.");

  m.def(
      "read_dataset", [](const std::filesystem::path& p) { return from_sequences(read_dataset(p)); },
      py::arg("path"));
  m.def(
      "write_dataset",
      [](const std::filesystem::path& p, const std::vector<Labelled>& items) {
        write_dataset(p, to_sequences(items));
      },
      py::arg("path"), py::arg("sequences"));

  m.def(
      "bones",
      [](const Array& x) {
        const Tensor3 t = to_tensor(x);
        return to_array(compute_bones(t, SkeletonTopology::for_joint_count(t.joints())));
      },
      py::arg("frames"));
  m.def(
      "second_difference", [](const Array& x) { return to_array(second_difference(to_tensor(x))); },
      py::arg("frames"));

  py::class_<ReferenceEncoder>(m, "Encoder")
      .def_static(
          "initialize",
          [](std::size_t joints, std::size_t channels, std::size_t hidden, std::size_t dim,
             std::uint64_t seed) {
            return ReferenceEncoder::initialize(SkeletonTopology::for_joint_count(joints),
                                                channels, hidden, dim, seed);
          },
          py::arg("joints"), py::arg("channels"), py::arg("hidden"), py::arg("dim"),
          py::arg("seed"))
      .def_static("load", &read_encoder, py::arg("path"))
      .def("save", [](const ReferenceEncoder& e, const std::filesystem::path& p) {
        write_encoder(p, e);
      })
      .def("forward", [](const ReferenceEncoder& e, const Array& x) { return e.forward(to_tensor(x)); })
      .def(
          "input_gradient",
          [](const ReferenceEncoder& e, const Array& x, const Eigen::VectorXd& cotangent) {
            return to_array(e.input_gradient(to_tensor(x), cotangent));
          },
          py::arg("frames"), py::arg("cotangent"))
      .def_property_readonly("joints", &ReferenceEncoder::joints)
      .def_property_readonly("channels", &ReferenceEncoder::channels)
      .def_property_readonly("embedding_dim", &ReferenceEncoder::embedding_dim);

  m.def(
      "train_encoder",
      [](const std::vector<Array>& sequences, int epochs, double lr, double tau,
         std::size_t queue, double momentum, double weight_decay, std::size_t hidden,
         std::size_t dim, std::uint64_t seed, std::uint64_t augment_seed) {
        if (sequences.empty()) throw Error("train_encoder needs data");
        std::vector<SkeletalSequence> data;
        for (const Array& a : sequences) data.push_back(to_sequence(a, std::nullopt));
        ContrastiveConfig c;
        c.epochs = epochs;
        c.learning_rate = lr;
        c.temperature = tau;
        c.queue_size = queue;
        c.momentum = momentum;
        c.weight_decay = weight_decay;
        c.hidden = hidden;
        c.embedding_dim = dim;
        c.seed = seed;
        AugmentationConfig aug;
        aug.seed = augment_seed;
        ContrastiveTrainer trainer(c, data.front().topology(), data.front().frames().channels());
        trainer.train(data, aug);
        return py::make_tuple(trainer.query_encoder(), trainer.loss_trace());
      },
      py::arg("sequences"), py::arg("epochs") = ContrastiveConfig{}.epochs,
      py::arg("lr") = ContrastiveConfig{}.learning_rate,
      py::arg("tau") = ContrastiveConfig{}.temperature,
      py::arg("queue") = ContrastiveConfig{}.queue_size,
      py::arg("momentum") = ContrastiveConfig{}.momentum,
      py::arg("weight_decay") = ContrastiveConfig{}.weight_decay,
      py::arg("hidden") = ContrastiveConfig{}.hidden,
      py::arg("dim") = ContrastiveConfig{}.embedding_dim, py::arg("seed") = ContrastiveConfig{}.seed,
      py::arg("augment_seed") = AugmentationConfig{}.seed,
      "Returns (encoder, per-step InfoNCE losses).");

  m.def(
      "info_nce_loss",
      [](const Embedding& q, const Embedding& k, const std::vector<Embedding>& queue, double tau) {
        return info_nce_loss(q, k, queue, tau);
      },
      py::arg("query"), py::arg("key"), py::arg("queue"), py::arg("tau"));

  py::class_<ManifoldIndex>(m, "ManifoldIndex")
      .def_readonly("centers", &ManifoldIndex::centers)
      .def_readonly("assignments", &ManifoldIndex::assignments)
      .def_readonly("discard", &ManifoldIndex::discard)
      .def_readonly("wcss_trace", &ManifoldIndex::wcss_trace)
      .def_static("load", &read_manifold, py::arg("path"))
      .def("save", [](const ManifoldIndex& i, const std::filesystem::path& p) {
        write_manifold(p, i);
      })
      .def(
          "select_negatives",
          [](const ManifoldIndex& i, const Eigen::VectorXd& query, std::size_t discard) {
            return select_negatives(i, query, discard);
          },
          py::arg("query"), py::arg("discard"));

  m.def(
      "kmeans",
      [](const std::vector<Eigen::VectorXd>& points, std::size_t k, int max_iters,
         std::uint64_t seed) { return kmeans(points, KMeansConfig{k, max_iters, seed}); },
      py::arg("points"), py::arg("k"), py::arg("max_iters") = KMeansConfig{}.max_iters,
      py::arg("seed") = KMeansConfig{}.seed);
  m.def(
      "build_manifold",
      [](const ReferenceEncoder& e, const std::vector<Array>& sequences, std::size_t k,
         std::size_t q, int max_iters, std::uint64_t seed) {
        return build_manifold(e, to_tensors(sequences), KMeansConfig{k, max_iters, seed}, q);
      },
      py::arg("encoder"), py::arg("sequences"), py::arg("k") = KMeansConfig{}.clusters,
      py::arg("q") = ManifoldIndex{}.discard, py::arg("max_iters") = KMeansConfig{}.max_iters,
      py::arg("seed") = KMeansConfig{}.seed);

  m.def(
      "fit_tvar",
      [](int order, const Array& x, std::size_t window, double ridge) {
        const TvarCoefficients c = fit_tvar(order, to_tensor(x), TvarFitOptions{window, ridge});
        py::dict out;
        out["lag1"] = coefficient_table(c, c.lag1_begin(), &TvarCoefficients::lag1);
        if (order == 2) out["lag2"] = coefficient_table(c, c.lag2_begin(), &TvarCoefficients::lag2);
        out["intercept"] = coefficient_table(c, c.intercept_begin(), &TvarCoefficients::intercept);
        out["residual_std"] =
            coefficient_table(c, c.intercept_begin(), &TvarCoefficients::residual_std);
        return out;
      },
      py::arg("order"), py::arg("frames"), py::arg("window") = TvarFitOptions{}.window,
      py::arg("ridge") = TvarFitOptions{}.ridge,
      "Coefficient tables of shape (frames, joints*channels); NaN where undefined.");

  m.def(
      "smi_first_order",
      [](const Array& g, const py::array_t<double>& lag1) {
        const Tensor3 grad = to_tensor(g);
        TvarCoefficients c(1, grad.frames(), grad.frame_stride());
        fill_coefficients(c, c.lag1_begin(), lag1, &TvarCoefficients::lag1);
        return to_array(smi_first_order(grad, c));
      },
      py::arg("gradient"), py::arg("lag1"));
  m.def(
      "smi_second_order",
      [](const Array& g, const py::array_t<double>& lag1, const py::array_t<double>& lag2) {
        const Tensor3 grad = to_tensor(g);
        TvarCoefficients c(2, grad.frames(), grad.frame_stride());
        fill_coefficients(c, c.lag1_begin(), lag1, &TvarCoefficients::lag1);
        fill_coefficients(c, c.lag2_begin(), lag2, &TvarCoefficients::lag2);
        return to_array(smi_second_order(grad, c));
      },
      py::arg("gradient"), py::arg("lag1"), py::arg("lag2"));

  m.def(
      "adversarial_loss",
      [](const Embedding& s, const Embedding& p, const std::vector<Embedding>& negatives) {
        return adversarial_loss(s, p, negatives);
      },
      py::arg("sample"), py::arg("positive"), py::arg("negatives"));
  m.def("strategies", [] {
    std::vector<std::string> names;
    for (Strategy s : kAllStrategies) names.emplace_back(to_string(s));
    return names;
  });
  m.def(
      "attack",
      [](const ReferenceEncoder& e, const ManifoldIndex& index, const Array& x,
         const std::string& strategy, double epsilon, std::optional<double> alpha, int iters,
         double mu, std::size_t window, double ridge) {
        AttackConfig c;
        c.strategy = parse_strategy(strategy);
        c.epsilon = epsilon;
        c.alpha = alpha;
        c.iterations = iters;
        c.momentum = mu;
        c.tvar = TvarFitOptions{window, ridge};
        const AttackRun r = run_attack(e, index, to_sequence(x, std::nullopt), c);
        py::dict out;
        out["adversarial"] = to_array(r.adversarial);
        out["loss_trace"] = r.loss_trace;
        out["max_deviation"] = r.max_deviation;
        return out;
      },
      py::arg("encoder"), py::arg("manifold"), py::arg("frames"),
      py::arg("strategy") = "s2mi-fgsm", py::arg("epsilon") = AttackConfig{}.epsilon,
      py::arg("alpha") = py::none(), py::arg("iters") = AttackConfig{}.iterations,
      py::arg("mu") = AttackConfig{}.momentum, py::arg("window") = TvarFitOptions{}.window,
      py::arg("ridge") = TvarFitOptions{}.ridge);

  py::class_<VictimClassifier>(m, "Victim")
      .def("predict", [](const VictimClassifier& v, const Array& x) { return v.predict(to_tensor(x)); })
      .def("logits", [](const VictimClassifier& v, const Array& x) { return v.logits(to_tensor(x)); })
      .def_property_readonly("train_accuracy", &VictimClassifier::train_accuracy)
      .def_property_readonly("kind", [](const VictimClassifier& v) {
        return std::string(to_string(v.kind()));
      });
  m.def(
      "train_victim",
      [](const std::string& kind, const std::vector<Labelled>& data, int epochs, double lr,
         std::size_t hidden, std::uint64_t seed) {
        VictimTrainConfig c;
        c.epochs = epochs;
        c.learning_rate = lr;
        c.hidden = hidden;
        c.seed = seed;
        return train_victim(parse_victim_kind(kind), to_sequences(data), c);
      },
      py::arg("kind"), py::arg("data"), py::arg("epochs") = VictimTrainConfig{}.epochs,
      py::arg("lr") = VictimTrainConfig{}.learning_rate,
      py::arg("hidden") = VictimTrainConfig{}.hidden, py::arg("seed") = VictimTrainConfig{}.seed);
  m.def(
      "fooling_rate",
      [](const VictimClassifier& v, const std::vector<Array>& clean, const std::vector<Array>& adv) {
        return fooling_rate(v, to_tensors(clean), to_tensors(adv));
      },
      py::arg("victim"), py::arg("clean"), py::arg("adversarial"));
  m.def(
      "perceptual_deviation",
      [](const std::vector<Array>& clean, const std::vector<Array>& adv) {
        const auto c = to_tensors(clean);
        if (c.empty()) throw Error("perceptual deviation needs at least one sample");
        const PerceptualReport r = perceptual_deviation(
            c, to_tensors(adv), SkeletonTopology::for_joint_count(c.front().joints()));
        py::dict out;
        out["position"] = r.position_term;
        out["bone"] = r.bone_term;
        out["acceleration"] = r.acceleration_term;
        out["delta_p"] = r.delta_p;
        return out;
      },
      py::arg("clean"), py::arg("adversarial"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a skelattack command line; returns (exit code, stdout, stderr).");
}
