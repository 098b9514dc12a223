#include "vaebench/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "vaebench/errors.hpp"

namespace vaebench {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

int vote(const std::vector<std::pair<double, std::size_t>>& neighbors, std::span<const int> labels) {
  std::map<int, std::size_t> counts;
  for (const auto& [d, i] : neighbors) ++counts[labels[i]];
  std::size_t best = 0;
  for (const auto& [label, c] : counts) best = std::max(best, c);
  // Ties go to the tied label seen first, i.e. the closest.
  for (const auto& [d, i] : neighbors)
    if (counts[labels[i]] == best) return labels[i];
  return labels[neighbors.front().second];
}

}  // namespace

PcaResult latent_pca(const Tensor& points) {
  if (points.rank() != 2 || points.cols() < 2) throw ContractError("latent_pca needs at least 2 dimensions");
  const std::size_t n = points.rows(), d = points.cols();
  if (n == 0) throw ContractError("latent_pca of an empty table");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean(static_cast<Eigen::Index>(j)) += points.at(r, j);
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd c(static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) c(static_cast<Eigen::Index>(j)) = points.at(r, j) - mean(static_cast<Eigen::Index>(j));
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd values = solver.eigenvalues();
  const Eigen::MatrixXd vectors = solver.eigenvectors();

  PcaResult out;
  double total = 0.0;
  for (Eigen::Index i = static_cast<Eigen::Index>(d); i-- > 0;) {
    const double v = std::max(values(i), 0.0);
    out.eigenvalues.push_back(v);
    total += v;
  }
  for (double v : out.eigenvalues) out.explained.push_back(total > 0.0 ? v / total : 0.0);

  out.components = Tensor(Shape{2, d});
  for (std::size_t comp = 0; comp < 2; ++comp) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - comp);
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    for (std::size_t j = 0; j < d; ++j) out.components.at(comp, j) = v(static_cast<Eigen::Index>(j));
  }
  const double lead = out.eigenvalues[0];
  if (lead <= 0.0 || out.eigenvalues[1] <= 1e-12 * lead) {
    out.degenerate = true;
    for (std::size_t j = 0; j < d; ++j) out.components.at(1, j) = 0.0;
  }

  out.coords = Tensor(Shape{n, 2});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t comp = 0; comp < 2; ++comp) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (points.at(r, j) - mean(static_cast<Eigen::Index>(j))) * out.components.at(comp, j);
      out.coords.at(r, comp) = s;
    }
  return out;
}

double knn_accuracy(const Tensor& reference, std::span<const int> reference_labels, const Tensor& queries,
                    std::span<const int> query_labels, std::size_t k, bool exclude_same_index) {
  const std::size_t n = reference.rows(), m = queries.rows();
  if (reference_labels.size() != n || query_labels.size() != m) throw DimensionError("knn: label count mismatch");
  if (reference.cols() != queries.cols()) throw DimensionError("knn: dimension mismatch");
  if (m == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t q = 0; q < m; ++q) {
    dist.clear();
    for (std::size_t r = 0; r < n; ++r) {
      if (exclude_same_index && r == q) continue;
      dist.emplace_back(squared_distance(queries.row(q), reference.row(r)), r);
    }
    if (dist.empty()) continue;
    const std::size_t kk = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(kk), dist.end());
    dist.resize(kk);
    if (vote(dist, reference_labels) == query_labels[q]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(m);
}

ClusterMetrics cluster_metrics(const Tensor& points, std::span<const int> labels, std::size_t k) {
  const std::size_t n = points.rows(), d = points.cols();
  if (labels.size() != n) throw DimensionError("cluster_metrics: label count mismatch");
  ClusterMetrics out;
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
  out.classes = members.size();
  if (members.size() < 2) {
    out.knn_accuracy = 1.0;
    out.centroid_separation_ratio = std::numeric_limits<double>::quiet_NaN();
    out.ratio_defined = false;
    return out;
  }
  out.knn_accuracy = knn_accuracy(points, labels, points, labels, k, true);

  std::vector<std::vector<double>> centroids;
  double rms_sum = 0.0;
  for (const auto& [label, idx] : members) {
    std::vector<double> c(d, 0.0);
    for (std::size_t i : idx)
      for (std::size_t j = 0; j < d; ++j) c[j] += points.at(i, j);
    for (double& v : c) v /= static_cast<double>(idx.size());
    double ss = 0.0;
    for (std::size_t i : idx) ss += squared_distance(points.row(i), c);
    rms_sum += std::sqrt(ss / static_cast<double>(idx.size()));
    centroids.push_back(std::move(c));
  }
  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centroids.size(); ++a)
    for (std::size_t b = a + 1; b < centroids.size(); ++b)
      min_sep = std::min(min_sep, std::sqrt(squared_distance(centroids[a], centroids[b])));
  const double mean_rms = rms_sum / static_cast<double>(centroids.size());
  if (mean_rms > 0.0) {
    out.centroid_separation_ratio = min_sep / mean_rms;
  } else {
    out.centroid_separation_ratio = min_sep > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    out.ratio_defined = min_sep > 0.0;
  }
  return out;
}

std::vector<double> nearest_neighbor_distances(const Tensor& points) {
  const std::size_t n = points.rows();
  std::vector<double> out(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dd = squared_distance(points.row(i), points.row(j));
      out[i] = std::min(out[i], dd);
      out[j] = std::min(out[j], dd);
    }
  for (double& v : out) v = std::sqrt(v);
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<long>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace vaebench
