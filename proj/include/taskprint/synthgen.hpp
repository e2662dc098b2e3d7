#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskprint/bundle.hpp"
#include "taskprint/errors.hpp"
#include "taskprint/rng.hpp"

// Synthetic task generator: per-class axis-aligned Gaussians with known means
// and standard deviations, so distance behaviour has closed-form ground truth.
// Values are clamped at zero by default (mirroring nonnegative post-activation
// features) and rounded through f32 so in-memory bundles match their on-disk
// representation exactly.

namespace taskprint {

struct ClassSpec {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::uint32_t count = 0;
};

struct SyntheticTaskSpec {
  std::string id;  // defaults to "synth-<seed>" when empty
  std::uint32_t n = 0;
  std::vector<ClassSpec> classes;
  std::string domain = "synthetic";
  std::vector<std::string> task_types;
  std::uint64_t seed = 0;
  bool clamp_nonnegative = true;
};

namespace salts {
constexpr std::uint64_t kSynthFeatures = 0x5f0a;
constexpr std::uint64_t kFamilyJitter = 0xfa01;
constexpr std::uint64_t kFamilyMember = 0xfa02;
}  // namespace salts

inline void validate_spec(const SyntheticTaskSpec& spec) {
  if (spec.n == 0) throw ArgumentError("synthetic spec: feature dimension n must be positive");
  if (spec.classes.empty()) throw ArgumentError("synthetic spec: at least one class required");
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& cs = spec.classes[c];
    if (cs.count == 0)
      throw ArgumentError("synthetic spec: class " + std::to_string(c) + " has count 0");
    if (cs.mean.size() != static_cast<Eigen::Index>(spec.n) ||
        cs.stddev.size() != static_cast<Eigen::Index>(spec.n))
      throw ShapeError("synthetic spec: class " + std::to_string(c) +
                       " mean/stddev length != n");
    if ((cs.stddev.array() < 0).any())
      throw ArgumentError("synthetic spec: class " + std::to_string(c) +
                          " has negative stddev");
  }
}

inline TaskBundle generate_task(const SyntheticTaskSpec& spec) {
  validate_spec(spec);
  TaskBundle b;
  b.id = spec.id.empty() ? "synth-" + std::to_string(spec.seed) : spec.id;
  b.domain = spec.domain;
  b.task_types = spec.task_types;
  b.provenance = "synthgen seed=" + std::to_string(spec.seed);
  b.num_classes = static_cast<std::uint32_t>(spec.classes.size());

  Eigen::Index total = 0;
  for (const auto& cs : spec.classes) total += cs.count;
  b.features.resize(total, spec.n);
  b.labels.reserve(static_cast<std::size_t>(total));

  Rng rng(mix_seed(spec.seed, salts::kSynthFeatures));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Index row = 0;
  for (std::uint32_t c = 0; c < b.num_classes; ++c) {
    const auto& cs = spec.classes[c];
    for (std::uint32_t k = 0; k < cs.count; ++k, ++row) {
      for (std::uint32_t d = 0; d < spec.n; ++d) {
        double v = cs.mean[d] + cs.stddev[d] * gauss(rng);
        if (spec.clamp_nonnegative && v < 0) v = 0;
        b.features(row, d) = static_cast<double>(static_cast<float>(v));
      }
      b.labels.push_back(c);
    }
  }
  validate_bundle(b);
  return b;
}

// A family is `count` variants of the base spec whose class means carry a
// deterministic perturbation of at most `jitter` per dimension. Member k
// depends only on (base, k, jitter), so families are stable under reordering.
inline std::vector<TaskBundle> generate_family(const SyntheticTaskSpec& base, std::uint32_t count,
                                               double jitter) {
  validate_spec(base);
  if (count == 0) throw ArgumentError("family count must be positive");
  if (jitter < 0) throw ArgumentError("family jitter must be nonnegative");

  const std::string base_id = base.id.empty() ? "synth-" + std::to_string(base.seed) : base.id;
  std::vector<TaskBundle> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    SyntheticTaskSpec spec = base;
    spec.id = base_id + "-" + std::to_string(k);
    spec.seed = mix_seed(base.seed, salts::kFamilyMember + k);
    Rng jit_rng(mix_seed(base.seed, mix_seed(salts::kFamilyJitter, k)));
    std::uniform_real_distribution<double> shift(-jitter, jitter);
    for (auto& cs : spec.classes)
      for (Eigen::Index d = 0; d < cs.mean.size(); ++d) cs.mean[d] += shift(jit_rng);
    out.push_back(generate_task(spec));
  }
  return out;
}

// JSON form of a task spec:
//   {"id": "...", "n": 4, "seed": 7, "domain": "...", "task_types": [...],
//    "clamp_nonnegative": true,
//    "classes": [{"mean": [...]|number, "stddev": [...]|number, "count": 100}]}
// Scalar mean/stddev values broadcast across all n dimensions.
inline SyntheticTaskSpec spec_from_json(const nlohmann::json& j) {
  SyntheticTaskSpec spec;
  try {
    spec.n = j.at("n").get<std::uint32_t>();
    if (j.contains("id")) spec.id = j.at("id").get<std::string>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("domain")) spec.domain = j.at("domain").get<std::string>();
    if (j.contains("task_types")) spec.task_types = j.at("task_types").get<std::vector<std::string>>();
    if (j.contains("clamp_nonnegative")) spec.clamp_nonnegative = j.at("clamp_nonnegative").get<bool>();

    auto broadcast = [&](const nlohmann::json& v, const char* what) {
      Eigen::VectorXd out(spec.n);
      if (v.is_number()) {
        out.setConstant(v.get<double>());
      } else if (v.is_array()) {
        if (v.size() != spec.n)
          throw ShapeError(std::string("synthetic spec: ") + what + " length != n");
        for (std::uint32_t d = 0; d < spec.n; ++d) out[d] = v.at(d).get<double>();
      } else {
        throw FormatError(std::string("synthetic spec: ") + what + " must be number or array");
      }
      return out;
    };

    for (const auto& cj : j.at("classes")) {
      ClassSpec cs;
      cs.mean = broadcast(cj.at("mean"), "mean");
      cs.stddev = broadcast(cj.at("stddev"), "stddev");
      cs.count = cj.at("count").get<std::uint32_t>();
      spec.classes.push_back(std::move(cs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad synthetic spec JSON: ") + e.what());
  }
  validate_spec(spec);
  return spec;
}

}  // namespace taskprint
