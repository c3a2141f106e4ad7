#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mixdcnn/checkpoint.hpp"
#include "mixdcnn/config.hpp"
#include "mixdcnn/errors.hpp"
#include "mixdcnn/trainer.hpp"

using namespace mixdcnn;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mixdcnn_fmt_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    os << bytes;
}

} // namespace

TEST_CASE("config parsing") {
    SUBCASE("keys, comments, whitespace") {
        const ConfigFile cfg = ConfigFile::parse_string(
            "# run settings\n"
            "train.k = 3\n"
            "train.learning_rate = 0.125   # inline comment\n"
            "\n"
            "data.train = bench-train.mxds\n");
        CHECK(cfg.get_uint("train.k") == 3);
        CHECK(cfg.get_double("train.learning_rate") == 0.125);
        CHECK(cfg.get_string("data.train") == "bench-train.mxds");
        CHECK(cfg.get_uint("train.seed", 42) == 42);
    }
    SUBCASE("missing key error names the key") {
        const ConfigFile cfg = ConfigFile::parse_string("a = 1\n");
        CHECK_THROWS_WITH_AS(cfg.get_int("train.k"), doctest::Contains("train.k"), ConfigError);
    }
    SUBCASE("bad value error names key and line") {
        const ConfigFile cfg = ConfigFile::parse_string("x = 1\ntrain.k = banana\n", "cfg");
        CHECK_THROWS_WITH_AS(cfg.get_int("train.k"), doctest::Contains("cfg:2"), ConfigError);
    }
    SUBCASE("unknown keys rejected with line numbers") {
        const ConfigFile cfg =
            ConfigFile::parse_string("train.k = 2\ntrain.turbo = yes\n", "cfg");
        CHECK_THROWS_WITH_AS(cfg.restrict_keys(train_config_keys()),
                             doctest::Contains("train.turbo"), ConfigError);
        CHECK_THROWS_WITH_AS(cfg.restrict_keys(train_config_keys()), doctest::Contains("cfg:2"),
                             ConfigError);
    }
    SUBCASE("malformed line rejected") {
        CHECK_THROWS_AS(ConfigFile::parse_string("this is not a pair\n"), ConfigError);
    }
    SUBCASE("duplicate keys rejected") {
        CHECK_THROWS_AS(ConfigFile::parse_string("a = 1\na = 2\n"), ConfigError);
    }
    SUBCASE("hidden dim lists") {
        const ConfigFile cfg = ConfigFile::parse_string("train.hidden_dims = 32, 16\n");
        const auto dims = cfg.get_size_list("train.hidden_dims", {});
        CHECK(dims == std::vector<std::size_t>{32, 16});
    }
    SUBCASE("spec builders validate enums") {
        const ConfigFile cfg = ConfigFile::parse_string("train.alpha_gradient_mode = sideways\n");
        CHECK_THROWS_AS(train_spec_from_config(cfg, Architecture::mix), ConfigError);
    }
}

TEST_CASE("checkpoint round trip") {
    TempDir tmp;
    SynthSpec sspec;
    sspec.samples_per_subclass = 10;
    const Dataset train = generate_synthetic(sspec).train;
    TrainSpec spec;
    spec.pretrain_epochs = 2;
    spec.hidden_dims = {6};
    const Network base = pretrain_base(train, spec);

    SUBCASE("mix model with two experts") {
        Model model{Architecture::mix, init_experts_from_base(base, 2), std::nullopt};
        model.bank.experts[1].parameters()[0]->value[0] += 0.25;
        const std::string path = tmp.file("mix.ckpt");
        save_checkpoint(path, model);
        const Model loaded = load_checkpoint(path);
        CHECK(loaded.arch == Architecture::mix);
        REQUIRE(loaded.bank.size() == 2);
        for (std::size_t k = 0; k < 2; ++k) {
            const auto pa = model.bank.experts[k].parameters();
            const auto pb = loaded.bank.experts[k].parameters();
            REQUIRE(pa.size() == pb.size());
            for (std::size_t i = 0; i < pa.size(); ++i) {
                CHECK(pa[i]->value == pb[i]->value);
                CHECK(pa[i]->name == pb[i]->name);
            }
        }
        // predictions survive the round trip bit for bit
        const auto a = model.predict_probs(train.samples[0].features);
        const auto b = loaded.predict_probs(train.samples[0].features);
        CHECK(a == b);

        // save -> load -> save is byte-identical
        const std::string path2 = tmp.file("mix2.ckpt");
        save_checkpoint(path2, loaded);
        CHECK(slurp(path) == slurp(path2));
    }
    SUBCASE("gated model carries its gate") {
        const GateNetwork gate = make_gate_from_base(base, 2, 77);
        Model model{Architecture::gated, init_experts_from_base(base, 2), gate};
        const std::string path = tmp.file("gated.ckpt");
        save_checkpoint(path, model);
        const Model loaded = load_checkpoint(path);
        REQUIRE(loaded.gate.has_value());
        const auto a = model.predict_probs(train.samples[3].features);
        const auto b = loaded.predict_probs(train.samples[3].features);
        CHECK(a == b);
    }
    SUBCASE("flipped payload byte fails the CRC") {
        Model model{Architecture::single, make_expert_bank({base}), std::nullopt};
        const std::string path = tmp.file("single.ckpt");
        save_checkpoint(path, model);
        std::string bytes = slurp(path);
        bytes[bytes.size() / 2] ^= 0x40;
        const std::string bad = tmp.file("corrupt.ckpt");
        spit(bad, bytes);
        CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("CRC"), CorruptFileError);
    }
    SUBCASE("version bump raises a version error") {
        Model model{Architecture::single, make_expert_bank({base}), std::nullopt};
        const std::string path = tmp.file("v.ckpt");
        save_checkpoint(path, model);
        std::string bytes = slurp(path);
        // bump the version field, then re-stamp the CRC so only the version differs
        bytes[4] = 9;
        const std::string body = bytes.substr(0, bytes.size() - 4);
        std::uint32_t crc = 0xffffffffu;
        for (const char ch : body) {
            crc ^= static_cast<unsigned char>(ch);
            for (int bit = 0; bit < 8; ++bit) {
                crc = (crc >> 1) ^ (0xedb88320u & (~(crc & 1u) + 1u));
            }
        }
        crc ^= 0xffffffffu;
        for (int i = 0; i < 4; ++i) {
            bytes[bytes.size() - 4 + static_cast<std::size_t>(i)] =
                static_cast<char>((crc >> (8 * i)) & 0xffu);
        }
        const std::string bad = tmp.file("v9.ckpt");
        spit(bad, bytes);
        CHECK_THROWS_AS(load_checkpoint(bad), VersionError);
    }
    SUBCASE("truncated checkpoint rejected") {
        Model model{Architecture::single, make_expert_bank({base}), std::nullopt};
        const std::string path = tmp.file("t.ckpt");
        save_checkpoint(path, model);
        std::string bytes = slurp(path);
        bytes.resize(bytes.size() / 3);
        const std::string bad = tmp.file("trunc.ckpt");
        spit(bad, bytes);
        CHECK_THROWS_AS(load_checkpoint(bad), CorruptFileError);
    }
}

TEST_CASE("report serialization") {
    TempDir tmp;
    RunReport report;
    report.architecture = "mix";
    report.dataset_name = "bench";
    report.epochs = {{"pretrain", 0, 1.5, 0.3}, {"pretrain", 1, 1.2, 0.5}, {"joint", 0, 0.9, 0.7}};
    report.test_accuracy = 0.8125;
    report.per_class_accuracy = {1.0, 0.625};
    report.per_class_counts = {16, 16};
    report.subset_sizes = {20, 12};
    report.alpha_entropy_mean = 0.25;
    report.alpha_entropy_max = 0.66;
    report.wall_seconds = 1.5;

    SUBCASE("csv round trip recovers the comparison fields") {
        const std::string path = tmp.file("report.csv");
        {
            std::ofstream os(path);
            write_report_csv(os, report);
        }
        const RunReport loaded = read_report_csv(path);
        CHECK(loaded.architecture == "mix");
        CHECK(loaded.dataset_name == "bench");
        CHECK(loaded.test_accuracy == 0.8125);
        CHECK(loaded.subset_sizes == report.subset_sizes);
        REQUIRE(loaded.epochs.size() == 3);
        CHECK(loaded.epochs[0].stage == "pretrain");
        CHECK(loaded.epochs[0].loss == 1.5);
        CHECK(loaded.epochs[2].stage == "joint");
        CHECK(loaded.epochs[2].accuracy == 0.7);
        CHECK(loaded.alpha_entropy_mean == 0.25);
        CHECK(loaded.wall_seconds == 1.5);
    }
    SUBCASE("text report carries the headline numbers") {
        std::ostringstream os;
        write_report_text(os, report);
        const std::string text = os.str();
        CHECK(text.find("arch = mix") != std::string::npos);
        CHECK(text.find("test accuracy = 0.8125") != std::string::npos);
        CHECK(text.find("subset sizes = 20 12") != std::string::npos);
    }
    SUBCASE("malformed csv row rejected") {
        const std::string path = tmp.file("broken.csv");
        spit(path, "# arch = mix\nepoch,split,metric,value\n0,train\n");
        CHECK_THROWS_AS(read_report_csv(path), CorruptFileError);
    }
}

TEST_CASE("architecture tag describes the topology") {
    const Network base = build_mlp(8, {4}, 6, 1);
    const Model model{Architecture::mix, init_experts_from_base(base, 2), std::nullopt};
    const std::string tag = architecture_tag(model);
    CHECK(tag.find("mix") == 0);
    CHECK(tag.find("K=2") != std::string::npos);
    CHECK(tag.find("linear:8:4") != std::string::npos);
    CHECK(tag.find("relu") != std::string::npos);
    CHECK(tag.find("linear:4:6") != std::string::npos);
}
