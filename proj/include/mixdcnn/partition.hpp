#ifndef MIXDCNN_PARTITION_HPP
#define MIXDCNN_PARTITION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mixdcnn/data.hpp"
#include "mixdcnn/network.hpp"

namespace mixdcnn {

/// Row-major T x dim feature matrix with sample ids aligned to the dataset.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;            // rows * cols, row-major
    std::vector<std::size_t> sample_ids;   // size rows

    double* row(std::size_t r) { return values.data() + r * cols; }
    const double* row(std::size_t r) const { return values.data() + r * cols; }
};

/// Fisher discriminant projection. out_dim <= min(requested D, classes - 1,
/// input_dim); within-class scatter is regularized as S_w + eps*I with
/// eps = 1e-6 * trace(S_w) / dim.
struct LdaModel {
    std::size_t input_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> projection;    // input_dim x out_dim, row-major
    std::vector<std::vector<double>> class_means;
};

/// Assignment of every sample to exactly one of K subsets, 1-based.
/// No subset is empty (empty clusters are repaired by splitting the largest
/// cluster at its two most distant members).
struct DatasetPartition {
    std::size_t K = 0;
    std::vector<int> assignment;               // per sample, in 1..K
    std::vector<std::vector<double>> centroids; // K vectors in clustering space
    std::uint64_t seed = 0;

    std::vector<std::size_t> subset_sizes() const;
    std::vector<std::vector<std::size_t>> subsets() const; // member ids per subset
};

struct KmeansStats {
    std::vector<double> objective_history;   // sum of squared distances, per iteration
    std::size_t iterations = 0;
    std::size_t empty_repairs = 0;
};

/// One row per sample: the (flattened) output of layer `tap_layer`. The final
/// layer is the classifier and cannot be tapped.
FeatureMatrix extract_features(const Network& network, const Dataset& dataset,
                               std::size_t tap_layer);

LdaModel lda_fit(const FeatureMatrix& features, const std::vector<int>& class_labels,
                 std::size_t requested_dim);
FeatureMatrix lda_project(const LdaModel& model, const FeatureMatrix& features);

/// Lloyd iterations from k-means++ seeding; deterministic under `seed`.
DatasetPartition kmeans(const FeatureMatrix& features, std::size_t K, std::uint64_t seed,
                        std::size_t max_iters = 100, KmeansStats* stats = nullptr);

/// extract_features -> lda_fit/project -> kmeans, tapping the penultimate
/// layer by default.
DatasetPartition partition_dataset(const Network& base_network, const Dataset& dataset,
                                   std::size_t K, std::size_t lda_dim, std::uint64_t seed);
DatasetPartition partition_dataset(const Network& base_network, const Dataset& dataset,
                                   std::size_t K, std::size_t lda_dim, std::uint64_t seed,
                                   std::size_t tap_layer);

/// Text format: header `K=<k> T=<t> seed=<s>`, then one
/// `sample_id<TAB>subset_index` line per sample.
void save_partition(const std::string& path, const DatasetPartition& partition);
DatasetPartition load_partition(const std::string& path);

} // namespace mixdcnn

#endif
