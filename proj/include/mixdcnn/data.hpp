#ifndef MIXDCNN_DATA_HPP
#define MIXDCNN_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mixdcnn/tensor.hpp"

namespace mixdcnn {

enum class Split { train, test };

struct Sample {
    Tensor features;
    int label = 0;       // 0-based class index
    int coarse_id = 0;   // ground-truth coarse group, synthetic data only

    bool operator==(const Sample&) const = default;
};

/// Immutable after generation/load. Sample ids are positions in `samples`.
struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;
    Split split = Split::train;

    std::size_t size() const { return samples.size(); }
    const std::vector<std::size_t>& feature_shape() const { return samples.front().features.shape(); }
};

/// Nested-Gaussian generator spec: G coarse appearance groups, each holding
/// `subclasses_per_group` fine classes whose centers sit at distance
/// `fine_separation` from the group center. fine_separation < coarse_separation.
struct SynthSpec {
    std::size_t num_coarse_groups = 2;
    std::size_t subclasses_per_group = 4;
    std::size_t samples_per_subclass = 100;   // per split
    std::size_t feature_dim = 16;
    double coarse_separation = 20.0;
    double fine_separation = 2.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 1;
};

struct SynthDataset {
    Dataset train;
    Dataset test;
};

/// Draws disjoint train/test splits of samples_per_subclass samples per fine
/// class. Coarse centers are placed with pairwise distance >=
/// coarse_separation; labels are (group, subclass) flattened; the coarse
/// group id is recorded per sample.
SynthDataset generate_synthetic(const SynthSpec& spec);

/// MXDS binary container, little-endian:
///   magic "MXDS", version u32, num_classes u32, sample count u64,
///   feature-shape rank u32 + dims u64[], then per sample
///   (label u32, coarse_id u32, features f64[]).
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path, Split split = Split::train);

/// Text import: one sample per line, `label,feat1,...,featD`; an optional
/// header line is skipped. num_classes becomes max label + 1.
Dataset load_csv_dataset(const std::string& path, Split split = Split::train);

/// Dispatches on extension: .csv goes through the text importer, everything
/// else is read as MXDS.
Dataset load_dataset_auto(const std::string& path, Split split = Split::train);

/// Deterministic shuffled mini-batches. Every epoch visits each index exactly
/// once; order is a pure function of (seed, epoch). The last batch may be short.
class BatchIterator {
public:
    BatchIterator(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

    /// Batches for the current epoch; advances the epoch counter.
    std::vector<std::vector<std::size_t>> next_epoch();

    /// Batches for an explicit epoch number, without touching the counter.
    std::vector<std::vector<std::size_t>> epoch_batches(std::uint64_t epoch) const;

    std::uint64_t epoch() const { return epoch_; }

private:
    std::size_t dataset_size_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
};

} // namespace mixdcnn

#endif
