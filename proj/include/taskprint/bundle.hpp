#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "taskprint/errors.hpp"

namespace taskprint {

struct MetaLabelSet {
  std::string domain;
  std::vector<std::string> task_types;
};

// A classification task: a sample-feature matrix with optional per-row class
// labels and semantic meta labels. Features live as doubles in memory and as
// little-endian 32-bit floats on disk.
struct TaskBundle {
  std::string id;
  Eigen::MatrixXd features;           // m_total x n
  std::vector<std::uint32_t> labels;  // empty when unlabeled
  std::uint32_t num_classes = 0;      // 0 when unlabeled
  std::string domain;
  std::vector<std::string> task_types;
  std::string provenance;

  bool labeled() const { return !labels.empty(); }
  Eigen::Index sample_count() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
  MetaLabelSet meta() const { return MetaLabelSet{domain, task_types}; }
};

// Rows retained from one task; the raw material for sample-based fingerprints.
struct FeatureMatrix {
  Eigen::MatrixXd data;  // m x n
  std::string source_task;
};

inline void validate_features(const Eigen::MatrixXd& m) {
  if (m.rows() < 1 || m.cols() < 1)
    throw ShapeError("feature matrix must have at least one row and one column");
  if (!m.allFinite()) throw DataError("feature matrix contains non-finite values");
}

inline void validate_bundle(const TaskBundle& b) {
  validate_features(b.features);
  if (b.labels.empty()) {
    if (b.num_classes != 0)
      throw LabelError("bundle '" + b.id + "': num_classes set but no labels present");
    return;
  }
  if (static_cast<Eigen::Index>(b.labels.size()) != b.features.rows())
    throw ShapeError("bundle '" + b.id + "': label count " + std::to_string(b.labels.size()) +
                     " != row count " + std::to_string(b.features.rows()));
  if (b.num_classes == 0)
    throw LabelError("bundle '" + b.id + "': labels present but num_classes is 0");
  std::vector<bool> seen(b.num_classes, false);
  for (std::uint32_t label : b.labels) {
    if (label >= b.num_classes)
      throw LabelError("bundle '" + b.id + "': label " + std::to_string(label) +
                       " out of range [0, " + std::to_string(b.num_classes) + ")");
    seen[label] = true;
  }
  for (std::uint32_t c = 0; c < b.num_classes; ++c)
    if (!seen[c])
      throw LabelError("bundle '" + b.id + "': class " + std::to_string(c) +
                       " has no samples");
}

}  // namespace taskprint
