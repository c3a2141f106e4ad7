#ifndef MIXDCNN_CONFIG_HPP
#define MIXDCNN_CONFIG_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mixdcnn/data.hpp"
#include "mixdcnn/trainer.hpp"

namespace mixdcnn {

/// Flat `key = value` text config with `#` comments. Errors carry the key
/// name and line number; unknown keys are rejected against a per-command
/// allow list.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& source = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;

    /// Comma-separated positive integers ("32,16").
    std::vector<std::size_t> get_size_list(const std::string& key,
                                           const std::vector<std::size_t>& fallback) const;

    /// Rejects any key not in `allowed`, naming the key and its line.
    void restrict_keys(const std::set<std::string>& allowed) const;

    std::size_t line_of(const std::string& key) const;

private:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };
    std::map<std::string, Entry> entries_;
    std::string source_;

    const Entry& require(const std::string& key) const;
};

/// Key sets for the CLI commands.
const std::set<std::string>& synth_config_keys();
const std::set<std::string>& train_config_keys();
const std::set<std::string>& gradcheck_config_keys();

SynthSpec synth_spec_from_config(const ConfigFile& config);
TrainSpec train_spec_from_config(const ConfigFile& config, Architecture arch);

} // namespace mixdcnn

#endif
