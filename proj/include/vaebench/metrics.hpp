#pragma once

#include <span>
#include <vector>

#include "vaebench/tensor.hpp"

namespace vaebench {

struct PcaResult {
  Tensor coords;                   // [n, 2]
  Tensor components;               // [2, d], rows are unit loadings
  std::vector<double> eigenvalues; // descending, length d
  std::vector<double> explained;   // eigenvalue fractions, descending
  bool degenerate = false;         // second component zeroed
};

/// Mean-centred PCA of the rows of `points` [n, d] onto two components.
/// Each component's largest-magnitude loading is made positive.
PcaResult latent_pca(const Tensor& points);

struct ClusterMetrics {
  double knn_accuracy = 0.0;
  double centroid_separation_ratio = 0.0;
  bool ratio_defined = true;
  std::size_t classes = 0;
};

/// Leave-one-out k-NN accuracy of `labels` from the rows of `points`, and the
/// ratio of the smallest between-centroid distance to the mean within-class RMS
/// distance. A single class gives accuracy 1 and an undefined ratio.
ClusterMetrics cluster_metrics(const Tensor& points, std::span<const int> labels, std::size_t k = 5);

/// k-NN majority vote of each query against a labelled reference set. When
/// `exclude_same_index` is set, reference row i is skipped for query i.
double knn_accuracy(const Tensor& reference, std::span<const int> reference_labels, const Tensor& queries,
                    std::span<const int> query_labels, std::size_t k, bool exclude_same_index);

/// Distance from each row to its nearest other row.
std::vector<double> nearest_neighbor_distances(const Tensor& points);

double median(std::vector<double> values);

}  // namespace vaebench
