// mixdcnn command-line tool: dataset synthesis, training, partitioning,
// evaluation, report comparison, and gradient checking.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mixdcnn/checkpoint.hpp"
#include "mixdcnn/config.hpp"
#include "mixdcnn/data.hpp"
#include "mixdcnn/errors.hpp"
#include "mixdcnn/gradcheck.hpp"
#include "mixdcnn/partition.hpp"
#include "mixdcnn/trainer.hpp"

namespace {

using namespace mixdcnn;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCorruption = 3;

std::string dataset_label(const std::string& path) {
    const std::filesystem::path p(path);
    std::string stem = p.stem().string();
    return stem.empty() ? path : stem;
}

int cmd_synth(const std::string& config_path, const std::string& out_prefix) {
    const ConfigFile config = ConfigFile::parse_file(config_path);
    config.restrict_keys(synth_config_keys());
    const SynthSpec spec = synth_spec_from_config(config);
    const SynthDataset data = generate_synthetic(spec);
    const std::string train_path = out_prefix + "-train.mxds";
    const std::string test_path = out_prefix + "-test.mxds";
    save_dataset(train_path, data.train);
    save_dataset(test_path, data.test);
    std::cout << "wrote " << train_path << " (" << data.train.size() << " samples, "
              << data.train.num_classes << " classes)\n";
    std::cout << "wrote " << test_path << " (" << data.test.size() << " samples)\n";
    return kExitOk;
}

int cmd_train(const std::string& arch_name, const std::string& config_path,
              const std::string& ckpt_path, const std::string& report_path,
              bool auto_partition) {
    const Architecture arch = architecture_from_name(arch_name);
    const ConfigFile config = ConfigFile::parse_file(config_path);
    config.restrict_keys(train_config_keys());
    const TrainSpec spec = train_spec_from_config(config, arch);

    const std::string train_path = config.get_string("data.train");
    const std::string test_path = config.get_string("data.test");
    const Dataset train = load_dataset_auto(train_path, Split::train);
    const Dataset test = load_dataset_auto(test_path, Split::test);

    std::optional<DatasetPartition> partition;
    if (arch == Architecture::mix || arch == Architecture::gated) {
        if (config.has("data.partition")) {
            partition = load_partition(config.get_string("data.partition"));
        } else if (!auto_partition) {
            throw std::invalid_argument(
                "arch '" + arch_name +
                "' needs a partition: set data.partition or pass --auto-partition");
        }
    }

    PipelineResult result = run_pipeline(spec, train, test, partition ? &*partition : nullptr,
                                         dataset_label(train_path));
    save_checkpoint(ckpt_path, result.model);
    {
        std::ofstream os(report_path);
        if (!os) throw std::runtime_error("cannot open report path '" + report_path + "'");
        write_report_csv(os, result.report);
    }
    {
        std::ofstream os(report_path + ".txt");
        if (!os) throw std::runtime_error("cannot open report path '" + report_path + ".txt'");
        write_report_text(os, result.report);
    }
    std::cout << "arch " << arch_name << ": test accuracy "
              << result.report.test_accuracy << "\n";
    std::cout << "wrote " << ckpt_path << ", " << report_path << ", " << report_path << ".txt\n";
    return kExitOk;
}

int cmd_partition(const std::string& config_path, const std::string& ckpt_path,
                  const std::string& out_path, bool verify) {
    const ConfigFile config = ConfigFile::parse_file(config_path);
    config.restrict_keys(train_config_keys());
    const TrainSpec spec = train_spec_from_config(config, Architecture::mix);
    const Dataset train = load_dataset_auto(config.get_string("data.train"), Split::train);

    const Model base = load_checkpoint(ckpt_path);
    if (base.arch != Architecture::single) {
        throw std::invalid_argument("partition expects a single-network checkpoint, got arch '" +
                                    architecture_name(base.arch) + "'");
    }
    const DatasetPartition partition = partition_dataset(
        base.bank.experts.front(), train, spec.num_experts,
        spec.resolved_lda_dim(static_cast<std::size_t>(train.num_classes)), spec.seed);
    save_partition(out_path, partition);
    std::cout << "wrote " << out_path << " (K=" << partition.K << ")\n";

    if (verify) {
        const DatasetPartition reloaded = load_partition(out_path);
        if (reloaded.assignment.size() != train.size()) {
            throw std::runtime_error("partition verification failed: covers " +
                                     std::to_string(reloaded.assignment.size()) + " of " +
                                     std::to_string(train.size()) + " samples");
        }
        const auto sizes = reloaded.subset_sizes();
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            if (sizes[k] == 0) {
                throw std::runtime_error("partition verification failed: subset " +
                                         std::to_string(k + 1) + " is empty");
            }
        }
        std::cout << "partition verified: " << train.size() << " samples covered, sizes";
        for (std::size_t s : sizes) std::cout << ' ' << s;
        std::cout << "\n";
    }
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& trace_path) {
    const Model model = load_checkpoint(ckpt_path);
    const Dataset data = load_dataset_auto(data_path, Split::test);
    const EvalResult result = evaluate(model, data);
    std::cout << "accuracy " << result.accuracy << "\n";
    for (std::size_t c = 0; c < result.per_class_accuracy.size(); ++c) {
        std::cout << "class " << c << ": " << result.per_class_accuracy[c] << " ("
                  << result.per_class_counts[c] << " samples)\n";
    }
    if (!trace_path.empty()) {
        if (model.arch != Architecture::mix) {
            throw std::invalid_argument("--trace requires a mix checkpoint");
        }
        std::ofstream os(trace_path);
        if (!os) throw std::runtime_error("cannot open trace path '" + trace_path + "'");
        for (const Sample& s : data.samples) {
            write_trace_line(os, mixture_forward(model.bank, s.features));
        }
        std::cout << "wrote " << trace_path << "\n";
    }
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& report_paths) {
    // (arch, dataset) -> accuracies; repeated runs (e.g. seed replicates) average
    std::map<std::string, std::map<std::string, std::vector<double>>> cells;
    std::set<std::string> datasets;
    std::vector<std::string> arch_order;
    for (const std::string& path : report_paths) {
        const RunReport report = read_report_csv(path);
        if (report.architecture.empty()) {
            throw CorruptFileError(path + ": report has no `# arch = ...` header");
        }
        const std::string ds = report.dataset_name.empty() ? "(unnamed)" : report.dataset_name;
        if (!cells.contains(report.architecture)) arch_order.push_back(report.architecture);
        cells[report.architecture][ds].push_back(report.test_accuracy);
        datasets.insert(ds);
    }

    std::map<std::string, std::map<std::string, double>> mean;
    std::map<std::string, double> best;
    for (const auto& [arch, by_ds] : cells) {
        for (const auto& [ds, accs] : by_ds) {
            double sum = 0.0;
            for (double a : accs) sum += a;
            const double m = sum / static_cast<double>(accs.size());
            mean[arch][ds] = m;
            if (!best.contains(ds) || m > best[ds]) best[ds] = m;
        }
    }

    std::cout << std::left;
    std::cout.width(12);
    std::cout << "arch";
    for (const std::string& ds : datasets) {
        std::cout << "  ";
        std::cout.width(16);
        std::cout << ds;
    }
    std::cout << "\n";
    std::cout.setf(std::ios::fixed);
    std::cout.precision(2);
    for (const std::string& arch : arch_order) {
        std::cout.width(12);
        std::cout << arch;
        for (const std::string& ds : datasets) {
            std::string cell = "-";
            if (mean[arch].contains(ds)) {
                const double m = mean[arch][ds];
                std::ostringstream os;
                os.setf(std::ios::fixed);
                os.precision(2);
                os << m * 100.0 << "%";
                if (m == best[ds]) os << " *";
                cell = os.str();
            }
            std::cout << "  ";
            std::cout.width(16);
            std::cout << cell;
        }
        std::cout << "\n";
    }
    return kExitOk;
}

int cmd_gradcheck(const std::string& config_path, const std::string& mode, bool corrupt) {
    GradcheckOptions options;
    if (!config_path.empty()) {
        const ConfigFile config = ConfigFile::parse_file(config_path);
        config.restrict_keys(gradcheck_config_keys());
        options.seed = config.get_uint("gradcheck.seed", options.seed);
        options.trials = static_cast<std::size_t>(
            config.get_uint("gradcheck.trials", options.trials));
        options.max_experts = static_cast<std::size_t>(
            config.get_uint("gradcheck.max_experts", options.max_experts));
        options.max_classes = static_cast<std::size_t>(
            config.get_uint("gradcheck.max_classes", options.max_classes));
    }
    if (mode == "full") {
        options.check_stopped = false;
    } else if (mode == "stopped") {
        options.check_full = false;
    } else if (!mode.empty()) {
        throw std::invalid_argument("--mode must be 'full' or 'stopped'");
    }
    if (corrupt) options.corrupt_by = 1e-3;

    const GradcheckResult result = run_gradcheck(options);
    print_gradcheck_result(std::cout, options, result);
    return result.passed ? kExitOk : kExitRuntime;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixture-of-experts classifier lab"};
    app.require_subcommand(1);

    std::string config_path, out_path, report_path, arch_name, ckpt_path, data_path;
    std::string trace_path, mode;
    std::vector<std::string> report_paths;
    bool auto_partition = false, verify = false, corrupt = false;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset pair");
    synth->add_option("--config", config_path, "config file")->required();
    synth->add_option("--out", out_path, "output path prefix")->required();

    CLI::App* train = app.add_subcommand("train", "run the training schedule for one architecture");
    train->add_option("--arch", arch_name, "single|mix|gated|ensemble")->required();
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--out", ckpt_path, "checkpoint output path")->required();
    train->add_option("--report", report_path, "report CSV output path")->required();
    train->add_flag("--auto-partition", auto_partition,
                    "compute the partition from the pretrained base");

    CLI::App* partition = app.add_subcommand("partition", "cluster the training set into subsets");
    partition->add_option("--config", config_path, "config file")->required();
    partition->add_option("--ckpt", ckpt_path, "pretrained single-network checkpoint")->required();
    partition->add_option("--out", out_path, "partition output path")->required();
    partition->add_flag("--verify", verify, "reload and validate the written partition");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    eval->add_option("--data", data_path, "dataset path (.mxds or .csv)")->required();
    eval->add_option("--trace", trace_path, "write per-sample mixing diagnostics (mix only)");

    CLI::App* compare = app.add_subcommand("compare", "tabulate report files");
    compare->add_option("--reports", report_paths, "report CSV paths")->required()->expected(-1);

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the mixing gradient");
    gradcheck->add_option("--config", config_path, "config file");
    gradcheck->add_option("--mode", mode, "full|stopped (default: both)");
    gradcheck->add_flag("--corrupt-gradient", corrupt, "test hook: perturb the analytic gradient")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_path);
        if (train->parsed()) {
            return cmd_train(arch_name, config_path, ckpt_path, report_path, auto_partition);
        }
        if (partition->parsed()) return cmd_partition(config_path, ckpt_path, out_path, verify);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_path, trace_path);
        if (compare->parsed()) return cmd_compare(report_paths);
        if (gradcheck->parsed()) return cmd_gradcheck(config_path, mode, corrupt);
    } catch (const CorruptFileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorruption;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
