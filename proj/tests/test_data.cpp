#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "mixdcnn/data.hpp"
#include "mixdcnn/errors.hpp"

using namespace mixdcnn;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mixdcnn_data_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

} // namespace

TEST_CASE("generate_synthetic structure") {
    SynthSpec spec;
    spec.num_coarse_groups = 2;
    spec.subclasses_per_group = 3;
    spec.samples_per_subclass = 10;
    spec.feature_dim = 5;
    spec.coarse_separation = 20.0;
    spec.fine_separation = 2.0;
    spec.noise_sigma = 1.0;
    spec.seed = 42;
    const SynthDataset data = generate_synthetic(spec);

    CHECK(data.train.num_classes == 6);
    CHECK(data.train.size() == 60);
    CHECK(data.test.size() == 60);
    CHECK(data.train.split == Split::train);
    CHECK(data.test.split == Split::test);

    // class counts exactly match the spec
    std::map<int, int> counts;
    for (const Sample& s : data.train.samples) {
        counts[s.label]++;
        CHECK(s.label >= 0);
        CHECK(s.label < 6);
        CHECK(s.coarse_id == s.label / 3);
        CHECK(s.features.all_finite());
    }
    for (const auto& [label, count] : counts) CHECK(count == 10);
}

TEST_CASE("generate_synthetic determinism and split independence") {
    SynthSpec spec;
    spec.samples_per_subclass = 5;
    spec.seed = 7;
    const SynthDataset a = generate_synthetic(spec);
    const SynthDataset b = generate_synthetic(spec);
    CHECK(a.train.samples == b.train.samples);
    CHECK(a.test.samples == b.test.samples);
    // train and test are distinct draws
    CHECK(a.train.samples[0].features != a.test.samples[0].features);
}

TEST_CASE("generate_synthetic separations") {
    SynthSpec spec;
    spec.num_coarse_groups = 3;
    spec.subclasses_per_group = 4;
    spec.samples_per_subclass = 50;
    spec.feature_dim = 8;
    spec.coarse_separation = 20.0;
    spec.fine_separation = 2.0;
    spec.noise_sigma = 1.0;
    spec.seed = 3;
    const SynthDataset data = generate_synthetic(spec);

    // recover the empirical subclass and coarse centers
    const std::size_t num_classes = static_cast<std::size_t>(data.train.num_classes);
    std::vector<std::vector<double>> class_mean(num_classes,
                                                std::vector<double>(spec.feature_dim, 0.0));
    std::vector<int> class_count(num_classes, 0);
    for (const Sample& s : data.train.samples) {
        for (std::size_t d = 0; d < spec.feature_dim; ++d) {
            class_mean[static_cast<std::size_t>(s.label)][d] += s.features[d];
        }
        class_count[static_cast<std::size_t>(s.label)]++;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (double& v : class_mean[c]) v /= class_count[c];
    }
    std::vector<std::vector<double>> coarse_mean(spec.num_coarse_groups,
                                                 std::vector<double>(spec.feature_dim, 0.0));
    for (std::size_t c = 0; c < num_classes; ++c) {
        const std::size_t g = c / spec.subclasses_per_group;
        for (std::size_t d = 0; d < spec.feature_dim; ++d) {
            coarse_mean[g][d] += class_mean[c][d] / static_cast<double>(spec.subclasses_per_group);
        }
    }
    // coarse groups are far apart relative to noise
    for (std::size_t g1 = 0; g1 < spec.num_coarse_groups; ++g1) {
        for (std::size_t g2 = g1 + 1; g2 < spec.num_coarse_groups; ++g2) {
            CHECK(distance(coarse_mean[g1], coarse_mean[g2]) > 0.8 * spec.coarse_separation);
        }
    }

    // nearest-coarse-center rule is essentially perfect at 20 sigma,
    // nearest-subclass-center rule is imperfect at 2 sigma
    std::size_t coarse_correct = 0, fine_correct = 0;
    for (const Sample& s : data.test.samples) {
        std::vector<double> x(s.features.values());
        std::size_t best_g = 0, best_c = 0;
        double dg = 1e300, dc = 1e300;
        for (std::size_t g = 0; g < spec.num_coarse_groups; ++g) {
            const double d = distance(x, coarse_mean[g]);
            if (d < dg) {
                dg = d;
                best_g = g;
            }
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double d = distance(x, class_mean[c]);
            if (d < dc) {
                dc = d;
                best_c = c;
            }
        }
        if (best_g == static_cast<std::size_t>(s.coarse_id)) coarse_correct++;
        if (best_c == static_cast<std::size_t>(s.label)) fine_correct++;
    }
    const double coarse_rate =
        static_cast<double>(coarse_correct) / static_cast<double>(data.test.size());
    const double fine_rate =
        static_cast<double>(fine_correct) / static_cast<double>(data.test.size());
    CHECK(coarse_rate >= 0.999);
    CHECK(fine_rate < 1.0);
    CHECK(fine_rate > 1.0 / static_cast<double>(num_classes));
}

TEST_CASE("generate_synthetic noiseless limit") {
    SynthSpec spec;
    spec.num_coarse_groups = 2;
    spec.subclasses_per_group = 3;
    spec.samples_per_subclass = 20;
    spec.feature_dim = 6;
    spec.noise_sigma = 1e-9;   // sigma -> 0: samples sit on their centers
    spec.seed = 9;
    const SynthDataset data = generate_synthetic(spec);

    // nearest-subclass-center rule classifies everything correctly
    const std::size_t num_classes = static_cast<std::size_t>(data.train.num_classes);
    std::vector<std::vector<double>> centers(num_classes);
    for (const Sample& s : data.train.samples) {
        centers[static_cast<std::size_t>(s.label)] = s.features.values();
    }
    std::size_t correct = 0;
    for (const Sample& s : data.test.samples) {
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double d = distance(s.features.values(), centers[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == static_cast<std::size_t>(s.label)) ++correct;
    }
    CHECK(correct == data.test.size());
}

TEST_CASE("generate_synthetic rejects bad specs") {
    SynthSpec spec;
    spec.fine_separation = 30.0;   // must stay below coarse_separation
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
    SynthSpec zero;
    zero.samples_per_subclass = 0;
    CHECK_THROWS_AS(generate_synthetic(zero), std::invalid_argument);
}

TEST_CASE("MXDS round trip") {
    TempDir tmp;
    SynthSpec spec;
    spec.samples_per_subclass = 6;
    spec.seed = 11;
    const SynthDataset data = generate_synthetic(spec);
    const std::string path = tmp.file("roundtrip.mxds");
    save_dataset(path, data.train);
    const Dataset loaded = load_dataset(path, Split::train);
    CHECK(loaded.num_classes == data.train.num_classes);
    CHECK(loaded.samples == data.train.samples);   // bit-exact features included

    // save -> load -> save produces identical bytes
    const std::string path2 = tmp.file("roundtrip2.mxds");
    save_dataset(path2, loaded);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
}

TEST_CASE("MXDS malformed inputs") {
    TempDir tmp;
    SynthSpec spec;
    spec.samples_per_subclass = 2;
    const SynthDataset data = generate_synthetic(spec);
    const std::string path = tmp.file("base.mxds");
    save_dataset(path, data.train);

    SUBCASE("truncated file reports the byte offset") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes.resize(bytes.size() / 2);
        const std::string cut = tmp.file("cut.mxds");
        std::ofstream out(cut, std::ios::binary);
        out << bytes;
        out.close();
        CHECK_THROWS_WITH_AS(load_dataset(cut), doctest::Contains("byte"), CorruptFileError);
    }
    SUBCASE("bad magic") {
        const std::string bad = tmp.file("bad.mxds");
        std::ofstream out(bad, std::ios::binary);
        out << "NOPE notmxds data";
        out.close();
        CHECK_THROWS_AS(load_dataset(bad), CorruptFileError);
    }
    SUBCASE("version 999 raises a version error") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes[4] = static_cast<char>(999 & 0xff);
        bytes[5] = static_cast<char>((999 >> 8) & 0xff);
        const std::string versioned = tmp.file("versioned.mxds");
        std::ofstream out(versioned, std::ios::binary);
        out << bytes;
        out.close();
        CHECK_THROWS_AS(load_dataset(versioned), VersionError);
    }
    SUBCASE("trailing garbage rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes += "extra";
        const std::string padded = tmp.file("padded.mxds");
        std::ofstream out(padded, std::ios::binary);
        out << bytes;
        out.close();
        CHECK_THROWS_AS(load_dataset(padded), CorruptFileError);
    }
}

TEST_CASE("CSV import") {
    TempDir tmp;
    SUBCASE("with header") {
        const std::string path = tmp.file("data.csv");
        std::ofstream out(path);
        out << "label,f1,f2\n0,1.5,2.5\n1,-1.0,0.25\n0,0.0,1.0\n";
        out.close();
        const Dataset ds = load_csv_dataset(path);
        CHECK(ds.size() == 3);
        CHECK(ds.num_classes == 2);
        CHECK(ds.samples[0].features[0] == 1.5);
        CHECK(ds.samples[1].label == 1);
    }
    SUBCASE("without header") {
        const std::string path = tmp.file("plain.csv");
        std::ofstream out(path);
        out << "2,0.5,0.5\n0,1.0,1.0\n";
        out.close();
        const Dataset ds = load_csv_dataset(path);
        CHECK(ds.size() == 2);
        CHECK(ds.num_classes == 3);
    }
    SUBCASE("malformed row names the line") {
        const std::string path = tmp.file("broken.csv");
        std::ofstream out(path);
        out << "0,1.0,2.0\n1,oops,3.0\n";
        out.close();
        CHECK_THROWS_WITH_AS(load_csv_dataset(path), doctest::Contains(":2"), CorruptFileError);
    }
    SUBCASE("ragged row rejected") {
        const std::string path = tmp.file("ragged.csv");
        std::ofstream out(path);
        out << "0,1.0,2.0\n1,3.0\n";
        out.close();
        CHECK_THROWS_AS(load_csv_dataset(path), CorruptFileError);
    }
    SUBCASE("auto loader dispatches on extension") {
        const std::string path = tmp.file("auto.csv");
        std::ofstream out(path);
        out << "0,1.0\n1,2.0\n";
        out.close();
        CHECK(load_dataset_auto(path).size() == 2);
    }
}

TEST_CASE("BatchIterator") {
    SUBCASE("epoch is a permutation, last batch short") {
        BatchIterator iter(10, 4, 5);
        const auto batches = iter.next_epoch();
        REQUIRE(batches.size() == 3);
        CHECK(batches[0].size() == 4);
        CHECK(batches[2].size() == 2);
        std::vector<bool> seen(10, false);
        for (const auto& b : batches) {
            for (std::size_t i : b) {
                CHECK_FALSE(seen[i]);
                seen[i] = true;
            }
        }
        for (bool s : seen) CHECK(s);
    }
    SUBCASE("single batch covers everything") {
        BatchIterator iter(6, 6, 1);
        const auto batches = iter.next_epoch();
        REQUIRE(batches.size() == 1);
        CHECK(batches[0].size() == 6);
    }
    SUBCASE("same seed, same sequences; epochs differ") {
        BatchIterator a(32, 5, 99), b(32, 5, 99);
        const auto ea0 = a.next_epoch();
        const auto eb0 = b.next_epoch();
        CHECK(ea0 == eb0);
        const auto ea1 = a.next_epoch();
        CHECK(ea1 == b.next_epoch());
        CHECK(ea0 != ea1);
        CHECK(a.epoch() == 2);
    }
    SUBCASE("label multiset preserved across an epoch") {
        SynthSpec spec;
        spec.samples_per_subclass = 7;
        const Dataset ds = generate_synthetic(spec).train;
        BatchIterator iter(ds.size(), 13, 3);
        std::map<int, int> expected, got;
        for (const Sample& s : ds.samples) expected[s.label]++;
        for (const auto& batch : iter.next_epoch()) {
            for (std::size_t i : batch) got[ds.samples[i].label]++;
        }
        CHECK(expected == got);
    }
    SUBCASE("invalid construction rejected") {
        CHECK_THROWS_AS(BatchIterator(0, 4, 1), std::invalid_argument);
        CHECK_THROWS_AS(BatchIterator(4, 0, 1), std::invalid_argument);
    }
}
