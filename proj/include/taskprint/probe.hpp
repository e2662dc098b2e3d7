#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskprint/bundle.hpp"
#include "taskprint/bundle_io.hpp"
#include "taskprint/errors.hpp"
#include "taskprint/rng.hpp"
#include "taskprint/sampling.hpp"

// The probe is a ReLU MLP over precomputed feature vectors: a shared trunk
// whose weights are fixed after (optional) pretraining, plus a per-task
// softmax head that is retrained for every task. All training here is plain
// mini-batch gradient descent on softmax cross-entropy.

namespace taskprint {

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

struct ProbeNetwork {
  std::vector<DenseLayer> layers;  // elementwise ReLU after every layer
  std::uint64_t seed = 0;          // recorded initialization seed

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().w.cols(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().w.rows(); }
  std::vector<std::uint32_t> widths() const {
    std::vector<std::uint32_t> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(static_cast<std::uint32_t>(l.w.rows()));
    return out;
  }
};

struct ProbeHead {
  Eigen::MatrixXd w;  // num_classes x trunk_out
  Eigen::VectorXd b;  // num_classes
};

struct HeadTrainConfig {
  double learning_rate = 1e-2;
  std::uint32_t epochs = 15;
  std::uint32_t batch_size = 64;
  std::uint64_t seed = 0;
  std::uint32_t sample_m = kDefaultSampleSize;  // samples drawn per epoch
};

inline void validate_config(const HeadTrainConfig& cfg) {
  if (!(cfg.learning_rate > 0)) throw ArgumentError("learning_rate must be positive");
  if (cfg.batch_size == 0) throw ArgumentError("batch_size must be positive");
  if (cfg.sample_m == 0) throw ArgumentError("sample_m must be positive");
}

namespace salts {
constexpr std::uint64_t kProbeInit = 0x9b0e;
constexpr std::uint64_t kHeadInit = 0x6ead;
constexpr std::uint64_t kEpoch = 0xe90c;
constexpr std::uint64_t kEvalSample = 0xeva1;
}  // namespace salts

// ReLU derivative convention: subgradient 1 at the kink, so gradients flow
// through exactly-zero pre-activations.
inline double relu_grad(double z) { return z >= 0 ? 1.0 : 0.0; }

inline ProbeNetwork init_probe(Eigen::Index n, const std::vector<std::uint32_t>& widths,
                               std::uint64_t seed) {
  if (n < 1) throw ArgumentError("probe input dimension must be positive");
  if (widths.empty()) throw ArgumentError("probe needs at least one hidden layer");
  ProbeNetwork probe;
  probe.seed = seed;
  Rng rng(mix_seed(seed, salts::kProbeInit));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Index in = n;
  for (std::uint32_t width : widths) {
    if (width == 0) throw ArgumentError("probe layer width must be positive");
    DenseLayer layer;
    layer.w.resize(width, in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = scale * gauss(rng);
    layer.b = Eigen::VectorXd::Zero(width);
    probe.layers.push_back(std::move(layer));
    in = width;
  }
  return probe;
}

inline ProbeHead init_head(Eigen::Index trunk_out, std::uint32_t num_classes, std::uint64_t seed) {
  if (trunk_out < 1) throw ArgumentError("head input dimension must be positive");
  if (num_classes < 2) throw ArgumentError("head needs at least two classes");
  ProbeHead head;
  Rng rng(mix_seed(seed, salts::kHeadInit));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(trunk_out));
  head.w.resize(num_classes, trunk_out);
  for (Eigen::Index r = 0; r < head.w.rows(); ++r)
    for (Eigen::Index c = 0; c < head.w.cols(); ++c) head.w(r, c) = scale * gauss(rng);
  head.b = Eigen::VectorXd::Zero(num_classes);
  return head;
}

// Batched trunk activations. act[0] is the input batch; act[l], pre[l-1]
// correspond to layer l-1 of the trunk (rows = samples).
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> act;
};

inline ForwardTrace trunk_trace(const ProbeNetwork& probe, const Eigen::MatrixXd& x) {
  if (x.cols() != probe.input_dim())
    throw ShapeError("probe input dimension " + std::to_string(probe.input_dim()) +
                     " != feature dimension " + std::to_string(x.cols()));
  ForwardTrace t;
  t.act.push_back(x);
  for (const auto& layer : probe.layers) {
    Eigen::MatrixXd z = t.act.back() * layer.w.transpose();
    z.rowwise() += layer.b.transpose();
    t.pre.push_back(z);
    t.act.push_back(z.cwiseMax(0.0));
  }
  return t;
}

inline Eigen::MatrixXd trunk_forward(const ProbeNetwork& probe, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x;
  for (const auto& layer : probe.layers) {
    Eigen::MatrixXd z = a * layer.w.transpose();
    z.rowwise() += layer.b.transpose();
    a = z.cwiseMax(0.0);
  }
  return a;
}

// Row-wise softmax with max subtraction.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

inline Eigen::MatrixXd head_probabilities(const ProbeNetwork& probe, const ProbeHead& head,
                                          const Eigen::MatrixXd& x) {
  Eigen::MatrixXd logits = trunk_forward(probe, x) * head.w.transpose();
  logits.rowwise() += head.b.transpose();
  return softmax_rows(logits);
}

inline double cross_entropy_loss(const ProbeNetwork& probe, const ProbeHead& head,
                                 const Eigen::MatrixXd& x, const std::vector<std::uint32_t>& y) {
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw ShapeError("cross entropy: label count != row count");
  Eigen::MatrixXd logits = trunk_forward(probe, x) * head.w.transpose();
  logits.rowwise() += head.b.transpose();
  double loss = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    loss += lse - logits(r, y[static_cast<std::size_t>(r)]);
  }
  return loss / static_cast<double>(x.rows());
}

struct HeadGradient {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

// Mean gradient of the softmax cross-entropy over the batch, w.r.t. head
// parameters only (the trunk stays frozen).
inline HeadGradient head_gradient(const ProbeNetwork& probe, const ProbeHead& head,
                                  const Eigen::MatrixXd& x, const std::vector<std::uint32_t>& y) {
  const Eigen::MatrixXd h = trunk_forward(probe, x);
  Eigen::MatrixXd logits = h * head.w.transpose();
  logits.rowwise() += head.b.transpose();
  Eigen::MatrixXd delta = softmax_rows(logits);  // rows: p - onehot(y)
  for (Eigen::Index r = 0; r < delta.rows(); ++r) delta(r, y[static_cast<std::size_t>(r)]) -= 1.0;
  delta /= static_cast<double>(x.rows());
  return HeadGradient{delta.transpose() * h, delta.colwise().sum().transpose()};
}

inline double accuracy(const ProbeNetwork& probe, const ProbeHead& head, const Eigen::MatrixXd& x,
                       const std::vector<std::uint32_t>& y) {
  const Eigen::MatrixXd p = head_probabilities(probe, head, x);
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index best = 0;
    p.row(r).maxCoeff(&best);
    if (static_cast<std::uint32_t>(best) == y[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(p.rows());
}

namespace detail {

inline std::vector<std::uint32_t> labels_at(const TaskBundle& b,
                                            const std::vector<Eigen::Index>& rows) {
  std::vector<std::uint32_t> y;
  y.reserve(rows.size());
  for (Eigen::Index r : rows) y.push_back(b.labels[static_cast<std::size_t>(r)]);
  return y;
}

}  // namespace detail

// Retrains the task-specific head against a frozen trunk. Each epoch draws a
// fresh class-balanced sample of cfg.sample_m rows.
inline ProbeHead train_head(const ProbeNetwork& probe, const TaskBundle& task,
                            const HeadTrainConfig& cfg) {
  if (!task.labeled()) throw ArgumentError("train_head requires a bundle with labels");
  validate_config(cfg);
  if (task.feature_dim() != probe.input_dim())
    throw ShapeError("task feature dimension " + std::to_string(task.feature_dim()) +
                     " != probe input dimension " + std::to_string(probe.input_dim()));

  ProbeHead head = init_head(probe.output_dim(), task.num_classes, mix_seed(cfg.seed, salts::kHeadInit));
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto idx = balanced_sample_indices(task, cfg.sample_m, mix_seed(cfg.seed, salts::kEpoch + epoch));
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, idx.size() - start);
      std::vector<Eigen::Index> rows(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                     idx.begin() + static_cast<std::ptrdiff_t>(start + count));
      const FeatureMatrix batch = gather_rows(task, rows);
      const auto y = detail::labels_at(task, rows);
      const HeadGradient g = head_gradient(probe, head, batch.data, y);
      head.w -= cfg.learning_rate * g.w;
      head.b -= cfg.learning_rate * g.b;
    }
  }
  return head;
}

// Jointly trains trunk and a temporary head on a reference task, then drops
// the head. This fixes the shared weights that all later fingerprints use.
// Training loss is checkpointed on a fixed balanced sample after every epoch;
// an increase prints a warning rather than failing.
inline ProbeNetwork pretrain_probe(const ProbeNetwork& probe, const TaskBundle& reference,
                                   const HeadTrainConfig& cfg) {
  if (!reference.labeled()) throw ArgumentError("pretrain_probe requires a labeled reference task");
  validate_config(cfg);
  if (reference.feature_dim() != probe.input_dim())
    throw ShapeError("reference feature dimension != probe input dimension");

  ProbeNetwork trained = probe;
  if (cfg.epochs == 0) return trained;
  ProbeHead head =
      init_head(probe.output_dim(), reference.num_classes, mix_seed(cfg.seed, salts::kHeadInit));

  const auto eval_idx = balanced_sample_indices(reference, cfg.sample_m, mix_seed(cfg.seed, salts::kEvalSample));
  const FeatureMatrix eval_x = gather_rows(reference, eval_idx);
  const auto eval_y = detail::labels_at(reference, eval_idx);
  double prev_loss = cross_entropy_loss(trained, head, eval_x.data, eval_y);

  const std::size_t depth = trained.layers.size();
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto idx =
        balanced_sample_indices(reference, cfg.sample_m, mix_seed(cfg.seed, salts::kEpoch + epoch));
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, idx.size() - start);
      std::vector<Eigen::Index> rows(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                     idx.begin() + static_cast<std::ptrdiff_t>(start + count));
      const FeatureMatrix batch = gather_rows(reference, rows);
      const auto y = detail::labels_at(reference, rows);

      const ForwardTrace t = trunk_trace(trained, batch.data);
      Eigen::MatrixXd logits = t.act.back() * head.w.transpose();
      logits.rowwise() += head.b.transpose();
      Eigen::MatrixXd delta = softmax_rows(logits);
      for (Eigen::Index r = 0; r < delta.rows(); ++r) delta(r, y[static_cast<std::size_t>(r)]) -= 1.0;
      delta /= static_cast<double>(count);

      const Eigen::MatrixXd gw_head = delta.transpose() * t.act.back();
      const Eigen::VectorXd gb_head = delta.colwise().sum().transpose();

      Eigen::MatrixXd g = delta * head.w;  // gradient w.r.t. trunk output
      for (std::size_t l = depth; l-- > 0;) {
        g = (g.array() * t.pre[l].unaryExpr([](double z) { return relu_grad(z); }).array()).matrix();
        const Eigen::MatrixXd gw = g.transpose() * t.act[l];
        const Eigen::VectorXd gb = g.colwise().sum().transpose();
        if (l > 0) g = g * trained.layers[l].w;
        trained.layers[l].w -= cfg.learning_rate * gw;
        trained.layers[l].b -= cfg.learning_rate * gb;
      }
      head.w -= cfg.learning_rate * gw_head;
      head.b -= cfg.learning_rate * gb_head;
    }

    const double loss = cross_entropy_loss(trained, head, eval_x.data, eval_y);
    if (loss > prev_loss + 1e-12)
      std::cerr << "warning: pretrain loss increased at epoch " << epoch + 1 << " (" << prev_loss
                << " -> " << loss << "); consider lowering the learning rate\n";
    prev_loss = loss;
  }
  return trained;
}

// ---------------------------------------------------------------------------
// Probe persistence: <stem>.json metadata plus <stem>.bin with little-endian
// f32 weights, layer-major, row-major weights then biases per layer.

constexpr std::uint32_t kProbeSchemaVersion = 1;

inline std::filesystem::path probe_bin_path(const std::filesystem::path& json_path) {
  auto p = json_path;
  p.replace_extension(".bin");
  return p;
}

inline void save_probe(const ProbeNetwork& probe, const std::filesystem::path& json_path) {
  if (probe.layers.empty()) throw ArgumentError("cannot save an empty probe");
  nlohmann::json meta{{"schema_version", kProbeSchemaVersion},
                      {"n", probe.input_dim()},
                      {"widths", probe.widths()},
                      {"seed", probe.seed}};
  if (json_path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(json_path.parent_path(), ec);
  }
  detail::write_json_file(json_path, meta);

  std::vector<float> buf;
  for (const auto& layer : probe.layers) {
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) buf.push_back(static_cast<float>(layer.w(r, c)));
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) buf.push_back(static_cast<float>(layer.b[r]));
  }
  detail::write_binary_file(probe_bin_path(json_path), reinterpret_cast<const char*>(buf.data()),
                            buf.size() * sizeof(float));
}

inline ProbeNetwork load_probe(const std::filesystem::path& json_path) {
  const nlohmann::json meta = detail::parse_json_file(json_path);
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  std::vector<std::uint32_t> widths;
  ProbeNetwork probe;
  try {
    version = meta.at("schema_version").get<std::uint32_t>();
    n = meta.at("n").get<std::uint64_t>();
    widths = meta.at("widths").get<std::vector<std::uint32_t>>();
    probe.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad probe metadata " + json_path.string() + ": " + e.what());
  }
  if (version != kProbeSchemaVersion)
    throw VersionError("probe schema_version " + std::to_string(version) +
                       " unsupported; expected " + std::to_string(kProbeSchemaVersion));
  if (n == 0 || widths.empty()) throw FormatError("probe metadata declares empty network");

  const auto bytes = detail::read_binary_file(probe_bin_path(json_path));
  std::size_t expected = 0;
  {
    std::uint64_t in = n;
    for (std::uint32_t w : widths) {
      expected += (static_cast<std::size_t>(w) * in + w) * sizeof(float);
      in = w;
    }
  }
  if (bytes.size() != expected)
    throw ShapeError("probe weights file is " + std::to_string(bytes.size()) +
                     " bytes, expected " + std::to_string(expected));

  const float* vals = reinterpret_cast<const float*>(bytes.data());
  std::size_t pos = 0;
  Eigen::Index in = static_cast<Eigen::Index>(n);
  for (std::uint32_t width : widths) {
    DenseLayer layer;
    layer.w.resize(width, in);
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = static_cast<double>(vals[pos++]);
    layer.b.resize(width);
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) layer.b[r] = static_cast<double>(vals[pos++]);
    probe.layers.push_back(std::move(layer));
    in = width;
  }
  if (!probe.layers.front().w.allFinite()) throw DataError("probe weights contain non-finite values");
  return probe;
}

}  // namespace taskprint
