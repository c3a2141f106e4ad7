#include "mixdcnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mixdcnn/errors.hpp"
#include "mixdcnn/numerics.hpp"

namespace mixdcnn {

std::string architecture_name(Architecture arch) {
    switch (arch) {
        case Architecture::single: return "single";
        case Architecture::mix: return "mix";
        case Architecture::gated: return "gated";
        case Architecture::ensemble: return "ensemble";
    }
    throw std::invalid_argument("architecture_name: unknown architecture");
}

Architecture architecture_from_name(const std::string& name) {
    if (name == "single") return Architecture::single;
    if (name == "mix") return Architecture::mix;
    if (name == "gated") return Architecture::gated;
    if (name == "ensemble") return Architecture::ensemble;
    throw std::invalid_argument("unknown architecture '" + name + "'");
}

void TrainSpec::validate() const {
    if (num_experts == 0) throw std::invalid_argument("TrainSpec: K must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainSpec: learning_rate must be > 0");
    if (batch_size == 0) throw std::invalid_argument("TrainSpec: batch_size must be >= 1");
    if (bag_fraction <= 0.0 || bag_fraction > 1.0) {
        throw std::invalid_argument("TrainSpec: bag_fraction must be in (0, 1]");
    }
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw std::invalid_argument("TrainSpec: hidden dims must be positive");
    }
}

std::size_t TrainSpec::resolved_lda_dim(std::size_t num_classes) const {
    if (lda_dim > 0) return lda_dim;
    if (num_classes < 2) throw std::invalid_argument("TrainSpec: need at least 2 classes");
    return std::min<std::size_t>(32, num_classes - 1);
}

std::uint64_t stage_seed(std::uint64_t seed, TrainStage stage, std::uint64_t salt) {
    // splitmix64 over (seed, stage, salt)
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(stage) + 1) +
                      0xbf58476d1ce4e5b9ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

namespace {

void check_view(const Dataset& data, const std::vector<std::size_t>& view) {
    if (view.empty()) throw std::invalid_argument("training view is empty");
    for (std::size_t idx : view) {
        if (idx >= data.size()) throw std::invalid_argument("training view index out of range");
    }
}

} // namespace

std::vector<EpochStat> train_network_sgd(Network& net, const Dataset& data,
                                         const std::vector<std::size_t>& view, double learning_rate,
                                         std::size_t batch_size, std::size_t epochs,
                                         std::uint64_t batch_seed, const std::string& stage) {
    check_view(data, view);
    std::vector<EpochStat> stats;
    auto params = net.parameters();
    BatchIterator iter(view.size(), batch_size, batch_seed);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t correct = 0;
        for (const auto& batch : iter.next_epoch()) {
            net.zero_grads();
            for (std::size_t pos : batch) {
                const Sample& s = data.samples[view[pos]];
                const ForwardTrace trace = net.forward_trace(s.features);
                const auto ce =
                    cross_entropy(trace.output().values(), static_cast<std::size_t>(s.label));
                if (!std::isfinite(ce.loss)) {
                    throw DivergenceError("training diverged: non-finite loss in stage '" + stage +
                                          "' epoch " + std::to_string(epoch));
                }
                epoch_loss += ce.loss;
                if (argmax_index(ce.probs) == static_cast<std::size_t>(s.label)) ++correct;
                net.backward(trace, Tensor::vector(ce.grad));
            }
            net.scale_grads(1.0 / static_cast<double>(batch.size()));
            sgd_step(params, learning_rate);
        }
        stats.push_back({stage, epoch, epoch_loss / static_cast<double>(view.size()),
                         static_cast<double>(correct) / static_cast<double>(view.size())});
    }
    return stats;
}

std::vector<EpochStat> train_bank_joint(
    ExpertBank& bank, const Dataset& data, const std::vector<std::size_t>& view,
    double learning_rate, std::size_t batch_size, std::size_t epochs, std::uint64_t batch_seed,
    AlphaGradientMode mode, const std::string& stage,
    const std::function<void(std::size_t, const ExpertBank&)>& observer) {
    check_view(data, view);
    const std::size_t k_count = bank.size();
    std::vector<EpochStat> stats;
    std::vector<std::vector<Parameter*>> params(k_count);
    for (std::size_t k = 0; k < k_count; ++k) params[k] = bank.experts[k].parameters();

    BatchIterator iter(view.size(), batch_size, batch_seed);
    std::size_t batch_index = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t correct = 0;
        for (const auto& batch : iter.next_epoch()) {
            for (std::size_t k = 0; k < k_count; ++k) bank.experts[k].zero_grads();
            for (std::size_t pos : batch) {
                const Sample& s = data.samples[view[pos]];
                std::vector<ForwardTrace> traces;
                traces.reserve(k_count);
                std::vector<std::vector<double>> logits;
                logits.reserve(k_count);
                for (std::size_t k = 0; k < k_count; ++k) {
                    traces.push_back(bank.experts[k].forward_trace(s.features));
                    logits.push_back(traces.back().output().values());
                }
                const MixtureTrace mtrace = make_mixture_trace(std::move(logits));
                const auto ce =
                    cross_entropy(mtrace.mixed_logits, static_cast<std::size_t>(s.label));
                if (!std::isfinite(ce.loss)) {
                    throw DivergenceError("training diverged: non-finite loss in stage '" + stage +
                                          "' epoch " + std::to_string(epoch));
                }
                epoch_loss += ce.loss;
                if (argmax_index(ce.probs) == static_cast<std::size_t>(s.label)) ++correct;
                const auto dz =
                    mixture_backward(mtrace, static_cast<std::size_t>(s.label), mode);
                for (std::size_t k = 0; k < k_count; ++k) {
                    bank.experts[k].backward(traces[k], Tensor::vector(dz[k]));
                }
            }
            const double inv = 1.0 / static_cast<double>(batch.size());
            for (std::size_t k = 0; k < k_count; ++k) bank.experts[k].scale_grads(inv);
            if (observer) observer(batch_index, bank);
            for (std::size_t k = 0; k < k_count; ++k) sgd_step(params[k], learning_rate);
            ++batch_index;
        }
        stats.push_back({stage, epoch, epoch_loss / static_cast<double>(view.size()),
                         static_cast<double>(correct) / static_cast<double>(view.size())});
    }
    return stats;
}

namespace {

std::vector<std::size_t> full_view(const Dataset& data) {
    std::vector<std::size_t> view(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) view[i] = i;
    return view;
}

} // namespace

Network pretrain_base(const Dataset& train, const TrainSpec& spec,
                      std::vector<EpochStat>* stats) {
    spec.validate();
    if (train.samples.empty()) throw std::invalid_argument("pretrain_base: empty dataset");
    if (train.feature_shape().size() != 1) {
        throw std::invalid_argument("pretrain_base: expected flat feature vectors");
    }
    Network net = build_mlp(train.feature_shape()[0], spec.hidden_dims,
                            static_cast<std::size_t>(train.num_classes),
                            stage_seed(spec.seed, TrainStage::net_init));
    auto s = train_network_sgd(net, train, full_view(train), spec.learning_rate, spec.batch_size,
                               spec.pretrain_epochs, stage_seed(spec.seed, TrainStage::pretrain),
                               "pretrain");
    if (stats) stats->insert(stats->end(), s.begin(), s.end());
    return net;
}

ExpertBank init_experts_from_base(const Network& base, std::size_t num_experts) {
    if (num_experts == 0) throw std::invalid_argument("init_experts_from_base: K must be >= 1");
    std::vector<Network> experts(num_experts, base);
    return make_expert_bank(std::move(experts));
}

std::vector<EpochStat> warmstart_experts(ExpertBank& bank, const DatasetPartition& partition,
                                         const Dataset& train, const TrainSpec& spec) {
    spec.validate();
    if (partition.assignment.size() != train.size()) {
        throw std::invalid_argument("warmstart_experts: partition does not cover the dataset");
    }
    if (partition.K != bank.size()) {
        throw std::invalid_argument("warmstart_experts: partition K does not match bank size");
    }
    std::vector<EpochStat> stats;
    const auto subsets = partition.subsets();
    for (std::size_t k = 0; k < bank.size(); ++k) {
        auto s = train_network_sgd(bank.experts[k], train, subsets[k], spec.learning_rate,
                                   spec.batch_size, spec.expert_epochs,
                                   stage_seed(spec.seed, TrainStage::expert, k), "expert");
        stats.insert(stats.end(), s.begin(), s.end());
    }
    return stats;
}

std::vector<EpochStat> train_mixdcnn(ExpertBank& bank, const Dataset& train,
                                     const TrainSpec& spec) {
    spec.validate();
    return train_bank_joint(bank, train, full_view(train), spec.learning_rate, spec.batch_size,
                            spec.joint_epochs, stage_seed(spec.seed, TrainStage::joint),
                            spec.alpha_gradient_mode, "joint");
}

GateNetwork make_gate_from_base(const Network& base, std::size_t num_experts,
                                std::uint64_t seed) {
    if (base.layers().empty() || base.layers().back().spec.kind != LayerKind::linear) {
        throw std::invalid_argument("make_gate_from_base: base must end in a linear classifier");
    }
    auto specs = network_layer_specs(base);
    specs.back() = LayerSpec::linear(specs.back().in_features, num_experts);
    Network gate_net(base.input_shape(),
                     [&] {
                         std::vector<Layer> layers = base.layers();
                         layers.back() =
                             make_layer(specs.back(),
                                        "layer" + std::to_string(layers.size() - 1), seed);
                         return layers;
                     }());
    return make_gate_network(std::move(gate_net), num_experts);
}

std::vector<EpochStat> train_gated(ExpertBank& bank, GateNetwork& gate, const Dataset& train,
                                   const DatasetPartition& partition, const TrainSpec& spec) {
    spec.validate();
    if (partition.assignment.size() != train.size()) {
        throw std::invalid_argument("train_gated: partition does not cover the dataset");
    }
    if (partition.K != bank.size() || gate.network.output_dim() != bank.size()) {
        throw std::invalid_argument("train_gated: K mismatch between bank, gate, and partition");
    }
    std::vector<EpochStat> stats;

    // Training the gate is plain classification of the subset index, so reuse
    // the single-network loop on a relabeled copy of the dataset.
    auto gate_dataset = [&](const std::vector<int>& labels_1based) {
        Dataset d;
        d.num_classes = static_cast<int>(bank.size());
        d.split = train.split;
        d.samples.reserve(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            d.samples.push_back(
                {train.samples[i].features, labels_1based[i] - 1, train.samples[i].coarse_id});
        }
        return d;
    };

    const auto subsets = partition.subsets();
    const std::size_t expert_total = spec.expert_epochs +
                                     (spec.gated_procedure == GatedProcedure::one
                                          ? spec.joint_epochs
                                          : 0);
    for (std::size_t k = 0; k < bank.size(); ++k) {
        auto s = train_network_sgd(bank.experts[k], train, subsets[k], spec.learning_rate,
                                   spec.batch_size, expert_total,
                                   stage_seed(spec.seed, TrainStage::expert, k), "expert");
        stats.insert(stats.end(), s.begin(), s.end());
    }
    {
        const Dataset gd = gate_dataset(partition.assignment);
        auto s = train_network_sgd(gate.network, gd, full_view(gd), spec.learning_rate,
                                   spec.batch_size, spec.joint_epochs,
                                   stage_seed(spec.seed, TrainStage::gate), "gate");
        stats.insert(stats.end(), s.begin(), s.end());
    }

    if (spec.gated_procedure == GatedProcedure::two) {
        std::vector<Tensor> features;
        features.reserve(train.size());
        for (const Sample& s : train.samples) features.push_back(s.features);
        for (std::size_t round = 0; round < spec.joint_epochs; ++round) {
            // (a) fix the gate, update experts on gate-assigned samples
            std::vector<std::vector<std::size_t>> assigned(bank.size());
            for (std::size_t i = 0; i < train.size(); ++i) {
                const auto gate_logits = gate.network.forward(train.samples[i].features);
                assigned[argmax_index(gate_logits.values())].push_back(i);
            }
            for (std::size_t k = 0; k < bank.size(); ++k) {
                if (assigned[k].empty()) continue;   // nothing routed this round
                auto s = train_network_sgd(
                    bank.experts[k], train, assigned[k], spec.learning_rate, spec.batch_size, 1,
                    stage_seed(spec.seed, TrainStage::expert, 1000003 * (round + 1) + k),
                    "alternate");
                stats.insert(stats.end(), s.begin(), s.end());
            }
            // (b) fix the experts, relabel by confidence, retrain the gate
            const SubsetLabelVector labels = assign_subset_labels(bank, features);
            const Dataset gd = gate_dataset(labels.labels);
            auto s = train_network_sgd(gate.network, gd, full_view(gd), spec.learning_rate,
                                       spec.batch_size, 1,
                                       stage_seed(spec.seed, TrainStage::gate, round + 1),
                                       "alternate");
            stats.insert(stats.end(), s.begin(), s.end());
        }
    }
    return stats;
}

ExpertBank train_ensemble(const Dataset& train, const TrainSpec& spec,
                          std::vector<EpochStat>* stats, std::vector<std::size_t>* bag_sizes) {
    spec.validate();
    const Network base = pretrain_base(train, spec, stats);
    ExpertBank bank = init_experts_from_base(base, spec.num_experts);

    const std::size_t bag_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(spec.bag_fraction * static_cast<double>(train.size())));
    const auto all = full_view(train);
    for (std::size_t k = 0; k < bank.size(); ++k) {
        std::vector<std::size_t> bag;
        if (bag_size >= train.size()) {
            bag = all;
        } else {
            std::mt19937_64 rng(stage_seed(spec.seed, TrainStage::bag, k));
            bag.reserve(bag_size);
            std::sample(all.begin(), all.end(), std::back_inserter(bag), bag_size, rng);
        }
        if (bag_sizes) bag_sizes->push_back(bag.size());
        auto s1 = train_network_sgd(bank.experts[k], train, bag, spec.learning_rate,
                                    spec.batch_size, spec.expert_epochs,
                                    stage_seed(spec.seed, TrainStage::expert, k), "expert");
        auto s2 = train_network_sgd(bank.experts[k], train, bag, spec.learning_rate,
                                    spec.batch_size, spec.joint_epochs,
                                    stage_seed(spec.seed, TrainStage::joint, k), "joint");
        if (stats) {
            stats->insert(stats->end(), s1.begin(), s1.end());
            stats->insert(stats->end(), s2.begin(), s2.end());
        }
    }
    return bank;
}

std::vector<double> Model::predict_probs(const Tensor& sample) const {
    switch (arch) {
        case Architecture::single:
            return softmax(bank.experts.front().forward(sample).values());
        case Architecture::mix:
            return mixture_forward(bank, sample).class_probs;
        case Architecture::gated:
        case Architecture::ensemble: {
            std::vector<std::vector<double>> probs;
            probs.reserve(bank.size());
            for (const Network& e : bank.experts) {
                probs.push_back(softmax(e.forward(sample).values()));
            }
            if (arch == Architecture::ensemble) return ensemble_combine(probs);
            return gated_combine(probs, softmax(gate->network.forward(sample).values()));
        }
    }
    throw std::invalid_argument("Model::predict_probs: unknown architecture");
}

std::vector<double> Model::alpha(const Tensor& sample) const {
    switch (arch) {
        case Architecture::single:
            return {1.0};
        case Architecture::mix:
            return mixture_forward(bank, sample).occupation;
        case Architecture::gated:
            return softmax(gate->network.forward(sample).values());
        case Architecture::ensemble:
            return std::vector<double>(bank.size(), 1.0 / static_cast<double>(bank.size()));
    }
    throw std::invalid_argument("Model::alpha: unknown architecture");
}

EvalResult evaluate(const Model& model, const Dataset& dataset) {
    if (dataset.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalResult r;
    const std::size_t num_classes = static_cast<std::size_t>(dataset.num_classes);
    r.per_class_accuracy.assign(num_classes, 0.0);
    r.per_class_counts.assign(num_classes, 0);
    std::vector<std::size_t> correct(num_classes, 0);
    std::size_t total_correct = 0;
    for (const Sample& s : dataset.samples) {
        const auto probs = model.predict_probs(s.features);
        const std::size_t label = static_cast<std::size_t>(s.label);
        r.per_class_counts[label]++;
        if (argmax_index(probs) == label) {
            correct[label]++;
            total_correct++;
        }
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (r.per_class_counts[c] > 0) {
            r.per_class_accuracy[c] =
                static_cast<double>(correct[c]) / static_cast<double>(r.per_class_counts[c]);
        }
    }
    r.accuracy = static_cast<double>(total_correct) / static_cast<double>(dataset.size());
    return r;
}

std::pair<double, double> alpha_entropy(const Model& model, const Dataset& dataset) {
    if (dataset.samples.empty()) throw std::invalid_argument("alpha_entropy: empty dataset");
    double sum = 0.0, max_h = 0.0;
    for (const Sample& s : dataset.samples) {
        const auto a = model.alpha(s.features);
        double h = 0.0;
        for (double v : a) {
            if (v > 0.0) h -= v * std::log(v);
        }
        sum += h;
        max_h = std::max(max_h, h);
    }
    return {sum / static_cast<double>(dataset.size()), max_h};
}

PipelineResult run_pipeline(const TrainSpec& spec, const Dataset& train, const Dataset& test,
                            const DatasetPartition* partition_in,
                            const std::string& dataset_name) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();

    PipelineResult result;
    RunReport& report = result.report;
    report.architecture = architecture_name(spec.architecture);
    report.dataset_name = dataset_name;

    switch (spec.architecture) {
        case Architecture::single: {
            Network net = pretrain_base(train, spec, &report.epochs);
            auto s1 = train_network_sgd(net, train, full_view(train), spec.learning_rate,
                                        spec.batch_size, spec.expert_epochs,
                                        stage_seed(spec.seed, TrainStage::expert, 0), "expert");
            auto s2 = train_network_sgd(net, train, full_view(train), spec.learning_rate,
                                        spec.batch_size, spec.joint_epochs,
                                        stage_seed(spec.seed, TrainStage::joint, 0), "joint");
            report.epochs.insert(report.epochs.end(), s1.begin(), s1.end());
            report.epochs.insert(report.epochs.end(), s2.begin(), s2.end());
            result.model = {Architecture::single, make_expert_bank({std::move(net)}), std::nullopt};
            report.subset_sizes = {train.size()};
            break;
        }
        case Architecture::mix:
        case Architecture::gated: {
            Network base = pretrain_base(train, spec, &report.epochs);
            DatasetPartition partition;
            if (partition_in) {
                partition = *partition_in;
                if (partition.assignment.size() != train.size()) {
                    throw std::invalid_argument("run_pipeline: partition does not cover dataset");
                }
                if (partition.K != spec.num_experts) {
                    throw std::invalid_argument("run_pipeline: partition K " +
                                                std::to_string(partition.K) +
                                                " does not match spec K " +
                                                std::to_string(spec.num_experts));
                }
            } else {
                partition = partition_dataset(
                    base, train, spec.num_experts,
                    spec.resolved_lda_dim(static_cast<std::size_t>(train.num_classes)),
                    spec.seed);
            }
            ExpertBank bank = init_experts_from_base(base, spec.num_experts);
            if (spec.architecture == Architecture::mix) {
                auto s1 = warmstart_experts(bank, partition, train, spec);
                auto s2 = train_mixdcnn(bank, train, spec);
                report.epochs.insert(report.epochs.end(), s1.begin(), s1.end());
                report.epochs.insert(report.epochs.end(), s2.begin(), s2.end());
                result.model = {Architecture::mix, std::move(bank), std::nullopt};
            } else {
                GateNetwork gate = make_gate_from_base(
                    base, spec.num_experts, stage_seed(spec.seed, TrainStage::gate_init));
                auto s = train_gated(bank, gate, train, partition, spec);
                report.epochs.insert(report.epochs.end(), s.begin(), s.end());
                result.model = {Architecture::gated, std::move(bank), std::move(gate)};
            }
            report.subset_sizes = partition.subset_sizes();
            result.partition = std::move(partition);
            break;
        }
        case Architecture::ensemble: {
            std::vector<std::size_t> bag_sizes;
            ExpertBank bank = train_ensemble(train, spec, &report.epochs, &bag_sizes);
            result.model = {Architecture::ensemble, std::move(bank), std::nullopt};
            report.subset_sizes = std::move(bag_sizes);
            break;
        }
    }

    const EvalResult eval = evaluate(result.model, test);
    report.test_accuracy = eval.accuracy;
    report.per_class_accuracy = eval.per_class_accuracy;
    report.per_class_counts = eval.per_class_counts;
    const auto entropy = alpha_entropy(result.model, test);
    report.alpha_entropy_mean = entropy.first;
    report.alpha_entropy_max = entropy.second;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

void write_report_text(std::ostream& os, const RunReport& report) {
    os << "arch = " << report.architecture << "\n";
    os << "dataset = " << report.dataset_name << "\n";
    for (const EpochStat& e : report.epochs) {
        os << "stage " << e.stage << " epoch " << e.epoch << " loss " << fmt_double(e.loss)
           << " acc " << fmt_double(e.accuracy) << "\n";
    }
    os << "test accuracy = " << fmt_double(report.test_accuracy) << "\n";
    os << "subset sizes =";
    for (std::size_t s : report.subset_sizes) os << ' ' << s;
    os << "\n";
    os << "alpha entropy mean = " << fmt_double(report.alpha_entropy_mean)
       << " max = " << fmt_double(report.alpha_entropy_max) << "\n";
    os << "per-class accuracy:";
    for (std::size_t c = 0; c < report.per_class_accuracy.size(); ++c) {
        os << ' ' << c << ':' << fmt_double(report.per_class_accuracy[c]);
    }
    os << "\n";
    os << "wall seconds = " << fmt_double(report.wall_seconds) << "\n";
}

void write_report_csv(std::ostream& os, const RunReport& report) {
    os << "# arch = " << report.architecture << "\n";
    os << "# dataset = " << report.dataset_name << "\n";
    os << "epoch,split,metric,value\n";
    std::size_t pos = 0;
    std::string stage;
    for (const EpochStat& e : report.epochs) {
        if (e.stage != stage) {
            stage = e.stage;
            pos = 0;
        }
        os << pos << ",train," << e.stage << "/loss," << fmt_double(e.loss) << "\n";
        os << pos << ",train," << e.stage << "/accuracy," << fmt_double(e.accuracy) << "\n";
        ++pos;
    }
    os << "-1,test,accuracy," << fmt_double(report.test_accuracy) << "\n";
    os << "-1,test,alpha_entropy_mean," << fmt_double(report.alpha_entropy_mean) << "\n";
    os << "-1,test,alpha_entropy_max," << fmt_double(report.alpha_entropy_max) << "\n";
    for (std::size_t k = 0; k < report.subset_sizes.size(); ++k) {
        os << "-1,train,subset_size_" << (k + 1) << "," << report.subset_sizes[k] << "\n";
    }
    for (std::size_t c = 0; c < report.per_class_accuracy.size(); ++c) {
        os << "-1,test,class_" << c << "_accuracy," << fmt_double(report.per_class_accuracy[c])
           << "\n";
    }
    os << "-1,meta,wall_seconds," << fmt_double(report.wall_seconds) << "\n";
}

RunReport read_report_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_report_csv: cannot open '" + path + "'");
    RunReport report;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            std::string value = line.substr(eq + 1);
            auto trim = [](std::string& s) {
                while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
                while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                    s.pop_back();
            };
            trim(key);
            trim(value);
            if (key == "arch") report.architecture = value;
            if (key == "dataset") report.dataset_name = value;
            continue;
        }
        std::stringstream ss(line);
        std::string epoch_s, split, metric, value_s;
        if (!std::getline(ss, epoch_s, ',') || !std::getline(ss, split, ',') ||
            !std::getline(ss, metric, ',') || !std::getline(ss, value_s)) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": malformed CSV row");
        }
        if (!header_seen && epoch_s == "epoch") {
            header_seen = true;
            continue;
        }
        double value = 0.0;
        try {
            value = std::stod(value_s);
        } catch (const std::logic_error&) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": bad value '" +
                                   value_s + "'");
        }
        if (split == "test" && metric == "accuracy") report.test_accuracy = value;
        if (split == "test" && metric == "alpha_entropy_mean") report.alpha_entropy_mean = value;
        if (split == "test" && metric == "alpha_entropy_max") report.alpha_entropy_max = value;
        if (split == "meta" && metric == "wall_seconds") report.wall_seconds = value;
        if (split == "train" && metric.find("subset_size_") == 0) {
            report.subset_sizes.push_back(static_cast<std::size_t>(value));
        }
        if (split == "train") {
            const auto slash = metric.find('/');
            if (slash != std::string::npos) {
                const std::string tail = metric.substr(slash + 1);
                if (tail == "loss") {
                    EpochStat e;
                    e.stage = metric.substr(0, slash);
                    e.epoch = static_cast<std::size_t>(std::stol(epoch_s));
                    e.loss = value;
                    report.epochs.push_back(e);
                } else if (tail == "accuracy" && !report.epochs.empty()) {
                    report.epochs.back().accuracy = value;
                }
            }
        }
    }
    return report;
}

} // namespace mixdcnn
