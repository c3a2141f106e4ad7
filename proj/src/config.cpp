#include "mixdcnn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mixdcnn/errors.hpp"

namespace mixdcnn {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

} // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& source) {
    ConfigFile cfg;
    cfg.source_ = source;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(line_no) +
                              ": expected `key = value`, got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
        }
        if (cfg.entries_.contains(key)) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                              "' (first on line " + std::to_string(cfg.entries_[key].line) + ")");
        }
        cfg.entries_[key] = {value, line_no};
    }
    return cfg;
}

bool ConfigFile::has(const std::string& key) const { return entries_.contains(key); }

const ConfigFile::Entry& ConfigFile::require(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(source_ + ": missing required key '" + key + "'");
    }
    return it->second;
}

std::size_t ConfigFile::line_of(const std::string& key) const { return require(key).line; }

std::string ConfigFile::get_string(const std::string& key) const { return require(key).value; }

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

std::int64_t ConfigFile::get_int(const std::string& key) const {
    const Entry& e = require(key);
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError(source_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "' is not an integer: '" + e.value + "'");
    }
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t ConfigFile::get_uint(const std::string& key) const {
    const Entry& e = require(key);
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(e.value, &pos);
        if (pos != e.value.size() || e.value.front() == '-') throw std::invalid_argument("");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError(source_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "' is not a non-negative integer: '" + e.value + "'");
    }
}

std::uint64_t ConfigFile::get_uint(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
}

double ConfigFile::get_double(const std::string& key) const {
    const Entry& e = require(key);
    try {
        std::size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError(source_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "' is not a number: '" + e.value + "'");
    }
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::vector<std::size_t> ConfigFile::get_size_list(
    const std::string& key, const std::vector<std::size_t>& fallback) const {
    if (!has(key)) return fallback;
    const Entry& e = require(key);
    std::vector<std::size_t> out;
    std::stringstream ss(e.value);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            std::size_t pos = 0;
            const unsigned long v = std::stoul(trim(field), &pos);
            if (pos != trim(field).size() || v == 0) throw std::invalid_argument("");
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            throw ConfigError(source_ + ":" + std::to_string(e.line) + ": key '" + key +
                              "' expects comma-separated positive integers, got '" + e.value +
                              "'");
        }
    }
    if (out.empty()) {
        throw ConfigError(source_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "' has an empty list");
    }
    return out;
}

void ConfigFile::restrict_keys(const std::set<std::string>& allowed) const {
    for (const auto& [key, entry] : entries_) {
        if (!allowed.contains(key)) {
            throw ConfigError(source_ + ":" + std::to_string(entry.line) + ": unknown key '" +
                              key + "'");
        }
    }
}

const std::set<std::string>& synth_config_keys() {
    static const std::set<std::string> keys = {
        "synth.groups",        "synth.subclasses_per_group",
        "synth.samples_per_subclass", "synth.feature_dim",
        "synth.coarse_separation",    "synth.fine_separation",
        "synth.noise_sigma",   "synth.seed",
    };
    return keys;
}

const std::set<std::string>& train_config_keys() {
    static const std::set<std::string> keys = {
        "train.k",
        "train.learning_rate",
        "train.batch_size",
        "train.pretrain_epochs",
        "train.expert_epochs",
        "train.joint_epochs",
        "train.seed",
        "train.alpha_gradient_mode",
        "train.gated_procedure",
        "train.lda_dim",
        "train.bag_fraction",
        "train.hidden_dims",
        "data.train",
        "data.test",
        "data.partition",
    };
    return keys;
}

const std::set<std::string>& gradcheck_config_keys() {
    static const std::set<std::string> keys = {
        "gradcheck.seed",
        "gradcheck.trials",
        "gradcheck.max_experts",
        "gradcheck.max_classes",
    };
    return keys;
}

SynthSpec synth_spec_from_config(const ConfigFile& config) {
    SynthSpec spec;
    spec.num_coarse_groups = static_cast<std::size_t>(config.get_uint("synth.groups"));
    spec.subclasses_per_group =
        static_cast<std::size_t>(config.get_uint("synth.subclasses_per_group"));
    spec.samples_per_subclass =
        static_cast<std::size_t>(config.get_uint("synth.samples_per_subclass"));
    spec.feature_dim = static_cast<std::size_t>(config.get_uint("synth.feature_dim"));
    spec.coarse_separation = config.get_double("synth.coarse_separation");
    spec.fine_separation = config.get_double("synth.fine_separation");
    spec.noise_sigma = config.get_double("synth.noise_sigma");
    spec.seed = config.get_uint("synth.seed");
    return spec;
}

TrainSpec train_spec_from_config(const ConfigFile& config, Architecture arch) {
    TrainSpec spec;
    spec.architecture = arch;
    spec.num_experts = static_cast<std::size_t>(config.get_uint("train.k", 2));
    spec.learning_rate = config.get_double("train.learning_rate", spec.learning_rate);
    spec.batch_size = static_cast<std::size_t>(config.get_uint("train.batch_size", 32));
    spec.pretrain_epochs =
        static_cast<std::size_t>(config.get_uint("train.pretrain_epochs", spec.pretrain_epochs));
    spec.expert_epochs =
        static_cast<std::size_t>(config.get_uint("train.expert_epochs", spec.expert_epochs));
    spec.joint_epochs =
        static_cast<std::size_t>(config.get_uint("train.joint_epochs", spec.joint_epochs));
    spec.seed = config.get_uint("train.seed", spec.seed);
    const std::string mode = config.get_string("train.alpha_gradient_mode", "full");
    if (mode == "full") {
        spec.alpha_gradient_mode = AlphaGradientMode::full;
    } else if (mode == "stopped") {
        spec.alpha_gradient_mode = AlphaGradientMode::stopped;
    } else {
        throw ConfigError("train.alpha_gradient_mode must be 'full' or 'stopped', got '" + mode +
                          "'");
    }
    const std::string proc = config.get_string("train.gated_procedure", "one");
    if (proc == "one") {
        spec.gated_procedure = GatedProcedure::one;
    } else if (proc == "two") {
        spec.gated_procedure = GatedProcedure::two;
    } else {
        throw ConfigError("train.gated_procedure must be 'one' or 'two', got '" + proc + "'");
    }
    spec.lda_dim = static_cast<std::size_t>(config.get_uint("train.lda_dim", 0));
    spec.bag_fraction = config.get_double("train.bag_fraction", spec.bag_fraction);
    spec.hidden_dims = config.get_size_list("train.hidden_dims", spec.hidden_dims);
    spec.validate();
    return spec;
}

} // namespace mixdcnn
