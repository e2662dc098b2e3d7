#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "taskprint/bundle.hpp"
#include "taskprint/errors.hpp"
#include "taskprint/rng.hpp"

namespace taskprint {

namespace salts {
constexpr std::uint64_t kBalancedSample = 0xb41a;
constexpr std::uint64_t kUniformSample = 0x01f0;
}  // namespace salts

// Class-balanced row draw with replacement. Quotas are fixed per class:
// floor(m / num_classes), remainder going to the lowest class ids, so the
// class histogram of the output deviates from uniform by at most one sample
// per class. The concatenated draws are shuffled so downstream mini-batches
// are not class-blocked.
inline std::vector<Eigen::Index> balanced_sample_indices(const TaskBundle& b, std::uint32_t m,
                                                         std::uint64_t seed) {
  if (!b.labeled()) throw ArgumentError("balanced sampling requires a bundle with labels");
  if (m == 0) throw ArgumentError("sample size m must be positive");
  validate_bundle(b);

  std::vector<std::vector<Eigen::Index>> by_class(b.num_classes);
  for (std::size_t i = 0; i < b.labels.size(); ++i)
    by_class[b.labels[i]].push_back(static_cast<Eigen::Index>(i));

  Rng rng(mix_seed(seed, salts::kBalancedSample));
  std::vector<Eigen::Index> out;
  out.reserve(m);
  const std::uint32_t base = m / b.num_classes;
  const std::uint32_t rem = m % b.num_classes;
  for (std::uint32_t c = 0; c < b.num_classes; ++c) {
    const std::uint32_t quota = base + (c < rem ? 1 : 0);
    const auto& rows = by_class[c];
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    for (std::uint32_t k = 0; k < quota; ++k) out.push_back(rows[pick(rng)]);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

inline std::vector<Eigen::Index> uniform_sample_indices(const TaskBundle& b, std::uint32_t m,
                                                        std::uint64_t seed) {
  if (m == 0) throw ArgumentError("sample size m must be positive");
  validate_bundle(b);
  Rng rng(mix_seed(seed, salts::kUniformSample));
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(b.features.rows()) - 1);
  std::vector<Eigen::Index> out;
  out.reserve(m);
  for (std::uint32_t k = 0; k < m; ++k) out.push_back(static_cast<Eigen::Index>(pick(rng)));
  return out;
}

inline FeatureMatrix gather_rows(const TaskBundle& b, const std::vector<Eigen::Index>& rows) {
  FeatureMatrix fm;
  fm.source_task = b.id;
  fm.data.resize(static_cast<Eigen::Index>(rows.size()), b.features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    fm.data.row(static_cast<Eigen::Index>(i)) = b.features.row(rows[i]);
  return fm;
}

constexpr std::uint32_t kDefaultSampleSize = 10000;

inline FeatureMatrix sample_balanced(const TaskBundle& b, std::uint32_t m = kDefaultSampleSize,
                                     std::uint64_t seed = 0) {
  return gather_rows(b, balanced_sample_indices(b, m, seed));
}

inline FeatureMatrix sample_uniform(const TaskBundle& b, std::uint32_t m = kDefaultSampleSize,
                                    std::uint64_t seed = 0) {
  return gather_rows(b, uniform_sample_indices(b, m, seed));
}

}  // namespace taskprint
