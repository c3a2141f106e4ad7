#ifndef MIXDCNN_TRAINER_HPP
#define MIXDCNN_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mixdcnn/data.hpp"
#include "mixdcnn/mixture.hpp"
#include "mixdcnn/network.hpp"
#include "mixdcnn/partition.hpp"

namespace mixdcnn {

enum class Architecture { single, mix, gated, ensemble };

std::string architecture_name(Architecture arch);
Architecture architecture_from_name(const std::string& name);

enum class GatedProcedure { one, two };

/// Hyperparameters, seeds, and architecture choices for one reproducible run.
/// The desk-scale defaults below are project choices, documented in the README.
struct TrainSpec {
    Architecture architecture = Architecture::mix;
    std::size_t num_experts = 2;            // K
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::size_t pretrain_epochs = 20;
    std::size_t expert_epochs = 10;
    std::size_t joint_epochs = 10;
    std::uint64_t seed = 1;
    AlphaGradientMode alpha_gradient_mode = AlphaGradientMode::full;
    GatedProcedure gated_procedure = GatedProcedure::one;
    std::size_t lda_dim = 0;                // 0 means min(32, classes - 1)
    double bag_fraction = 0.8;
    std::vector<std::size_t> hidden_dims = {32};

    void validate() const;
    std::size_t resolved_lda_dim(std::size_t num_classes) const;
};

struct EpochStat {
    std::string stage;      // pretrain, expert, joint, gate, alternate
    std::size_t epoch = 0;  // within the stage
    double loss = 0.0;      // mean per-sample training loss
    double accuracy = 0.0;  // training accuracy during the pass
};

struct RunReport {
    std::string architecture;
    std::string dataset_name;
    std::vector<EpochStat> epochs;
    double test_accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<std::size_t> per_class_counts;
    std::vector<std::size_t> subset_sizes;
    double alpha_entropy_mean = 0.0;
    double alpha_entropy_max = 0.0;
    double wall_seconds = 0.0;
};

/// Trained weights plus the combination rule used at test time.
struct Model {
    Architecture arch = Architecture::single;
    ExpertBank bank;
    std::optional<GateNetwork> gate;

    std::vector<double> predict_probs(const Tensor& sample) const;
    std::vector<double> alpha(const Tensor& sample) const;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<std::size_t> per_class_counts;
};

// Stable per-stage seed derivation so independent stages shuffle independently.
enum class TrainStage : std::uint64_t {
    net_init = 0,
    pretrain = 1,
    expert = 2,
    joint = 3,
    gate = 4,
    bag = 5,
    gate_init = 6,
};
std::uint64_t stage_seed(std::uint64_t seed, TrainStage stage, std::uint64_t salt = 0);

/// Mini-batch SGD with plain cross-entropy over the view (positions into
/// `data.samples`). Aborts with DivergenceError on non-finite loss.
std::vector<EpochStat> train_network_sgd(Network& net, const Dataset& data,
                                         const std::vector<std::size_t>& view, double learning_rate,
                                         std::size_t batch_size, std::size_t epochs,
                                         std::uint64_t batch_seed, const std::string& stage);

/// Joint mixture training: every expert is updated on every batch via
/// mixture_backward. With K = 1 this reproduces train_network_sgd bit for bit
/// under the same batch seed. `observer`, when set, sees the averaged
/// gradients right before each SGD step.
std::vector<EpochStat> train_bank_joint(
    ExpertBank& bank, const Dataset& data, const std::vector<std::size_t>& view,
    double learning_rate, std::size_t batch_size, std::size_t epochs, std::uint64_t batch_seed,
    AlphaGradientMode mode, const std::string& stage,
    const std::function<void(std::size_t batch_index, const ExpertBank&)>& observer = {});

/// Trains one base network on the full training set (the stand-in for
/// initialization from a network pretrained on a generic task).
Network pretrain_base(const Dataset& train, const TrainSpec& spec,
                      std::vector<EpochStat>* stats = nullptr);

/// K independent deep copies of the base network.
ExpertBank init_experts_from_base(const Network& base, std::size_t num_experts);

/// Fine-tunes expert k on subset k only, for spec.expert_epochs.
std::vector<EpochStat> warmstart_experts(ExpertBank& bank, const DatasetPartition& partition,
                                         const Dataset& train, const TrainSpec& spec);

/// Joint end-to-end training of the bank for spec.joint_epochs.
std::vector<EpochStat> train_mixdcnn(ExpertBank& bank, const Dataset& train,
                                     const TrainSpec& spec);

/// Builds the gate from the base network by replacing the classifier layer
/// with a K-way head.
GateNetwork make_gate_from_base(const Network& base, std::size_t num_experts,
                                std::uint64_t seed);

/// Procedure one: gate trained on the partition labels, experts trained
/// exclusively on their subsets. Procedure two additionally alternates
/// gate-driven expert updates with confidence-based relabeling.
std::vector<EpochStat> train_gated(ExpertBank& bank, GateNetwork& gate, const Dataset& train,
                                   const DatasetPartition& partition, const TrainSpec& spec);

/// Bagging baseline: each expert trains on a seeded random fraction
/// spec.bag_fraction of the training set; equal weights at test time.
ExpertBank train_ensemble(const Dataset& train, const TrainSpec& spec,
                          std::vector<EpochStat>* stats = nullptr,
                          std::vector<std::size_t>* bag_sizes = nullptr);

EvalResult evaluate(const Model& model, const Dataset& dataset);

/// Mean and max entropy of the occupation distribution over a dataset.
std::pair<double, double> alpha_entropy(const Model& model, const Dataset& dataset);

struct PipelineResult {
    Model model;
    RunReport report;
    std::optional<DatasetPartition> partition;
};

/// The full stage schedule for one architecture:
///   single:   pretrain + continued full-set training
///   mix:      pretrain -> partition -> warmstart -> joint
///   gated:    pretrain -> partition -> experts on subsets + gate
///   ensemble: pretrain -> K bagged fine-tunes
/// `partition_in` may supply a precomputed partition for mix/gated; when
/// null one is computed from the pretrained base.
PipelineResult run_pipeline(const TrainSpec& spec, const Dataset& train, const Dataset& test,
                            const DatasetPartition* partition_in = nullptr,
                            const std::string& dataset_name = "");

void write_report_text(std::ostream& os, const RunReport& report);
void write_report_csv(std::ostream& os, const RunReport& report);
RunReport read_report_csv(const std::string& path);

} // namespace mixdcnn

#endif
