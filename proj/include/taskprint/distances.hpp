#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskprint/bundle.hpp"
#include "taskprint/errors.hpp"
#include "taskprint/rng.hpp"

namespace taskprint {

enum class Method : std::uint8_t { fed = 0, mmd = 1, kld = 2, emd = 3 };

constexpr std::array<Method, 4> kAllMethods{Method::fed, Method::mmd, Method::kld, Method::emd};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::fed: return "fed";
    case Method::mmd: return "mmd";
    case Method::kld: return "kld";
    case Method::emd: return "emd";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (s == to_string(m)) return m;
  throw ArgumentError("unknown method '" + std::string(s) + "' (expected fed|mmd|kld|emd)");
}

// Kernel bandwidth: a fixed positive sigma, or (when unset) the median
// heuristic over the pooled rows of the two matrices being compared.
struct KernelConfig {
  std::optional<double> sigma;
};

// Discrete probability distribution over the feature dimensions {1..n}.
struct MeanDistribution {
  Eigen::VectorXd p;
};

inline MeanDistribution make_mean_distribution(Eigen::VectorXd p) {
  if (p.size() < 1) throw ShapeError("mean distribution must be nonempty");
  if ((p.array() < 0).any()) throw ArgumentError("mean distribution has negative entries");
  if (std::abs(p.sum() - 1.0) > 1e-12)
    throw ArgumentError("mean distribution does not sum to 1");
  return MeanDistribution{std::move(p)};
}

// ---------------------------------------------------------------------------
// FED: cosine distance between embeddings.

inline double cosine_distance(const Eigen::VectorXd& e, const Eigen::VectorXd& f) {
  if (e.size() != f.size())
    throw ShapeError("cosine distance: embedding lengths differ (" + std::to_string(e.size()) +
                     " vs " + std::to_string(f.size()) + ")");
  const double ee = e.squaredNorm();
  const double ff = f.squaredNorm();
  if (ee == 0 || ff == 0)
    throw ArgumentError("cosine distance undefined for a zero embedding");
  if (e == f) return 0.0;  // exact self-distance
  double c = 1.0 - e.dot(f) / std::sqrt(ee * ff);
  return std::clamp(c, 0.0, 2.0);
}

// ---------------------------------------------------------------------------
// MMD with the Cauchy kernel k(x,y) = (1 + ||x-y||^2 / sigma^2)^-1.

inline double cauchy_kernel_r2(double r2, double inv_sigma2) { return 1.0 / (1.0 + r2 * inv_sigma2); }

inline double cauchy_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double sigma) {
  if (x.size() != y.size()) throw ShapeError("cauchy kernel: vector lengths differ");
  if (!(sigma > 0)) throw ArgumentError("cauchy kernel: sigma must be positive");
  return cauchy_kernel_r2((x - y).squaredNorm(), 1.0 / (sigma * sigma));
}

namespace detail {

constexpr std::uint64_t kMedianSubsampleSeed = 0x9d1a;
constexpr std::size_t kMedianSubsampleCap = 2000;

// Samples as columns (n x m) so each column is contiguous.
inline Eigen::MatrixXd columns_of(const Eigen::MatrixXd& rows) { return rows.transpose(); }

inline double mean_cauchy(const Eigen::MatrixXd& xt, const Eigen::MatrixXd& yt, double inv_sigma2) {
  double sum = 0;
  for (Eigen::Index j = 0; j < xt.cols(); ++j)
    for (Eigen::Index k = 0; k < yt.cols(); ++k)
      sum += cauchy_kernel_r2((xt.col(j) - yt.col(k)).squaredNorm(), inv_sigma2);
  return sum / (static_cast<double>(xt.cols()) * static_cast<double>(yt.cols()));
}

}  // namespace detail

// Median of the pairwise Euclidean distances over the pooled rows of a and b,
// subsampled to at most 2000 rows with a fixed seed. A zero median (heavily
// duplicated rows) falls back to the smallest positive distance, and to 1.0
// when every pooled row is identical (any bandwidth yields MMD 0 there).
inline double median_heuristic_sigma(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw ShapeError("median heuristic: feature dimensions differ");
  const std::size_t total = static_cast<std::size_t>(a.rows() + b.rows());
  std::vector<Eigen::Index> rows(total);
  for (std::size_t i = 0; i < total; ++i) rows[i] = static_cast<Eigen::Index>(i);
  if (total > detail::kMedianSubsampleCap) {
    Rng rng(detail::kMedianSubsampleSeed);
    std::vector<Eigen::Index> chosen;
    chosen.reserve(detail::kMedianSubsampleCap);
    std::sample(rows.begin(), rows.end(), std::back_inserter(chosen),
                detail::kMedianSubsampleCap, rng);
    rows = std::move(chosen);
  }
  Eigen::MatrixXd pooled(a.cols(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = rows[i];
    pooled.col(static_cast<Eigen::Index>(i)) =
        r < a.rows() ? a.row(r).transpose() : b.row(r - a.rows()).transpose();
  }

  std::vector<double> dists;
  dists.reserve(rows.size() * (rows.size() - 1) / 2);
  for (Eigen::Index i = 0; i < pooled.cols(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.cols(); ++j)
      dists.push_back((pooled.col(i) - pooled.col(j)).norm());
  if (dists.empty()) return 1.0;

  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  double med = dists[mid];
  if (dists.size() % 2 == 0) {
    const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (lower + med);
  }
  if (med > 0) return med;
  double smallest = 0;
  for (double d : dists)
    if (d > 0 && (smallest == 0 || d < smallest)) smallest = d;
  return smallest > 0 ? smallest : 1.0;
}

// V-statistic estimate (diagonal terms included) of
//   E k(x1,x2) - 2 E k(x,y) + E k(y1,y2),
// which is nonnegative and exactly zero for identical inputs.
inline double mmd_distance(const FeatureMatrix& a, const FeatureMatrix& b,
                           const KernelConfig& cfg = {}) {
  if (a.data.cols() != b.data.cols())
    throw ShapeError("mmd: feature dimensions differ (" + std::to_string(a.data.cols()) + " vs " +
                     std::to_string(b.data.cols()) + ")");
  validate_features(a.data);
  validate_features(b.data);
  const double sigma = cfg.sigma ? *cfg.sigma : median_heuristic_sigma(a.data, b.data);
  if (!(sigma > 0)) throw ArgumentError("mmd: sigma must be positive");
  const double inv_sigma2 = 1.0 / (sigma * sigma);

  const Eigen::MatrixXd at = detail::columns_of(a.data);
  const Eigen::MatrixXd bt = detail::columns_of(b.data);
  const double kaa = detail::mean_cauchy(at, at, inv_sigma2);
  const double kab = detail::mean_cauchy(at, bt, inv_sigma2);
  const double kbb = detail::mean_cauchy(bt, bt, inv_sigma2);
  return std::max(0.0, kaa - 2.0 * kab + kbb);
}

// ---------------------------------------------------------------------------
// KLD over normalized mean-feature distributions.

constexpr double kKldEpsilon = 1e-8;

// Column means, negatives clamped to zero, epsilon-smoothed, normalized.
inline MeanDistribution kld_embedding(const FeatureMatrix& a) {
  validate_features(a.data);
  Eigen::VectorXd mean = a.data.colwise().mean();
  mean = mean.cwiseMax(0.0);
  mean.array() += kKldEpsilon;
  mean /= mean.sum();
  return make_mean_distribution(std::move(mean));
}

// KL(p || q) in nats. Terms with p_j = 0 contribute zero; q must be strictly
// positive wherever p is (guaranteed for epsilon-smoothed embeddings).
inline double kld_distance_raw(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw ShapeError("kld: distribution lengths differ");
  double sum = 0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (p[j] == 0) continue;
    if (!(q[j] > 0)) throw ArgumentError("kld: q must be strictly positive where p > 0");
    sum += p[j] * std::log(p[j] / q[j]);
  }
  return std::max(0.0, sum);
}

inline double kld_distance(const MeanDistribution& p, const MeanDistribution& q) {
  return kld_distance_raw(p.p, q.p);
}

// ---------------------------------------------------------------------------
// EMD: exact 1-D Wasserstein-1 per feature dimension, averaged.

// W1 between the empirical distributions of u and v: the integral of
// |CDF_u - CDF_v|. For equal sizes this equals the mean absolute difference
// of the sorted values.
inline double wasserstein_1d(std::vector<double> u, std::vector<double> v) {
  if (u.empty() || v.empty()) throw ArgumentError("wasserstein_1d: empty sample list");
  std::sort(u.begin(), u.end());
  std::sort(v.begin(), v.end());

  std::vector<double> all;
  all.reserve(u.size() + v.size());
  std::merge(u.begin(), u.end(), v.begin(), v.end(), std::back_inserter(all));

  double w = 0;
  std::size_t iu = 0, iv = 0;
  for (std::size_t k = 0; k + 1 < all.size(); ++k) {
    const double t = all[k];
    const double dx = all[k + 1] - t;
    while (iu < u.size() && u[iu] <= t) ++iu;
    while (iv < v.size() && v[iv] <= t) ++iv;
    if (dx > 0) {
      const double fu = static_cast<double>(iu) / static_cast<double>(u.size());
      const double fv = static_cast<double>(iv) / static_cast<double>(v.size());
      w += std::abs(fu - fv) * dx;
    }
  }
  return w;
}

inline double emd_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.data.cols() != b.data.cols())
    throw ShapeError("emd: feature dimensions differ (" + std::to_string(a.data.cols()) + " vs " +
                     std::to_string(b.data.cols()) + ")");
  validate_features(a.data);
  validate_features(b.data);
  const Eigen::Index n = a.data.cols();
  double sum = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<double> u(static_cast<std::size_t>(a.data.rows()));
    std::vector<double> v(static_cast<std::size_t>(b.data.rows()));
    for (Eigen::Index r = 0; r < a.data.rows(); ++r) u[static_cast<std::size_t>(r)] = a.data(r, j);
    for (Eigen::Index r = 0; r < b.data.rows(); ++r) v[static_cast<std::size_t>(r)] = b.data(r, j);
    sum += wasserstein_1d(std::move(u), std::move(v));
  }
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Fingerprints and method dispatch.

// fed: 1 x L embedding row; kld: 1 x n distribution row; mmd/emd: m x n
// retained sample matrix. Values are f32-quantized when produced by the index
// so in-memory and on-disk fingerprints agree bit-exactly.
struct Fingerprint {
  Method method = Method::fed;
  Eigen::MatrixXd values;
};

inline void quantize_f32(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<double>(static_cast<float>(m(r, c)));
}

inline double task_distance(Method method, const Fingerprint& a, const Fingerprint& b,
                            const KernelConfig& cfg = {}) {
  if (a.method != method || b.method != method)
    throw ArgumentError("fingerprint variant mismatch: distance method " +
                        std::string(to_string(method)) + " applied to " +
                        std::string(to_string(a.method)) + "/" + std::string(to_string(b.method)) +
                        " fingerprints");
  switch (method) {
    case Method::fed: {
      if (a.values.rows() != 1 || b.values.rows() != 1)
        throw ShapeError("fed fingerprint must be a single row");
      return cosine_distance(a.values.row(0).transpose(), b.values.row(0).transpose());
    }
    case Method::mmd:
      return mmd_distance(FeatureMatrix{a.values, ""}, FeatureMatrix{b.values, ""}, cfg);
    case Method::kld: {
      if (a.values.rows() != 1 || b.values.rows() != 1)
        throw ShapeError("kld fingerprint must be a single row");
      return kld_distance_raw(a.values.row(0).transpose(), b.values.row(0).transpose());
    }
    case Method::emd:
      return emd_distance(FeatureMatrix{a.values, ""}, FeatureMatrix{b.values, ""});
  }
  throw ArgumentError("unknown method");
}

inline bool method_is_symmetric(Method m) { return m != Method::kld; }

}  // namespace taskprint
