#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mixdcnn/errors.hpp"
#include "mixdcnn/partition.hpp"
#include "mixdcnn/trainer.hpp"

using namespace mixdcnn;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mixdcnn_part_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

FeatureMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix fm;
    fm.rows = rows.size();
    fm.cols = rows[0].size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        fm.values.insert(fm.values.end(), rows[r].begin(), rows[r].end());
        fm.sample_ids.push_back(r);
    }
    return fm;
}

// direct 2-class Fisher direction: S_w^-1 (mu1 - mu2), solved by Gaussian
// elimination; independent of the library's whitened eigensolver route
std::vector<double> fisher_two_class(const FeatureMatrix& fm, const std::vector<int>& labels) {
    const std::size_t dim = fm.cols;
    std::vector<double> mu[2] = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    std::size_t count[2] = {0, 0};
    for (std::size_t r = 0; r < fm.rows; ++r) {
        const int c = labels[r];
        for (std::size_t d = 0; d < dim; ++d) mu[c][d] += fm.row(r)[d];
        count[c]++;
    }
    for (int c = 0; c < 2; ++c) {
        for (double& v : mu[c]) v /= static_cast<double>(count[c]);
    }
    std::vector<double> sw(dim * dim, 0.0);
    for (std::size_t r = 0; r < fm.rows; ++r) {
        const int c = labels[r];
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                sw[i * dim + j] += (fm.row(r)[i] - mu[c][i]) * (fm.row(r)[j] - mu[c][j]);
            }
        }
    }
    for (std::size_t i = 0; i < dim; ++i) sw[i * dim + i] += 1e-9;
    std::vector<double> rhs(dim);
    for (std::size_t d = 0; d < dim; ++d) rhs[d] = mu[0][d] - mu[1][d];
    // Gaussian elimination with partial pivoting
    for (std::size_t col = 0; col < dim; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < dim; ++r) {
            if (std::abs(sw[r * dim + col]) > std::abs(sw[pivot * dim + col])) pivot = r;
        }
        for (std::size_t c2 = 0; c2 < dim; ++c2) std::swap(sw[col * dim + c2], sw[pivot * dim + c2]);
        std::swap(rhs[col], rhs[pivot]);
        for (std::size_t r = col + 1; r < dim; ++r) {
            const double f = sw[r * dim + col] / sw[col * dim + col];
            for (std::size_t c2 = col; c2 < dim; ++c2) sw[r * dim + c2] -= f * sw[col * dim + c2];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> w(dim);
    for (std::size_t r = dim; r-- > 0;) {
        double acc = rhs[r];
        for (std::size_t c2 = r + 1; c2 < dim; ++c2) acc -= sw[r * dim + c2] * w[c2];
        w[r] = acc / sw[r * dim + r];
    }
    return w;
}

} // namespace

TEST_CASE("extract_features") {
    SynthSpec spec;
    spec.samples_per_subclass = 5;
    spec.feature_dim = 4;
    const Dataset ds = generate_synthetic(spec).train;
    const Network net = build_mlp(4, {6, 5}, static_cast<std::size_t>(ds.num_classes), 9);

    SUBCASE("rows equal independent per-sample forward passes") {
        const std::size_t tap = net.layers().size() - 2;   // last hidden activation
        const FeatureMatrix fm = extract_features(net, ds, tap);
        CHECK(fm.rows == ds.size());
        CHECK(fm.cols == 5);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Tensor row = net.forward_partial(ds.samples[i].features, tap);
            for (std::size_t d = 0; d < fm.cols; ++d) CHECK(fm.row(i)[d] == row[d]);
            CHECK(fm.sample_ids[i] == i);
        }
    }
    SUBCASE("deterministic across runs") {
        const FeatureMatrix a = extract_features(net, ds, 1);
        const FeatureMatrix b = extract_features(net, ds, 1);
        CHECK(a.values == b.values);
    }
    SUBCASE("identity tap reproduces the layer input") {
        // last hidden linear layer set to identity: tapping it yields its input
        Network idnet = build_mlp(4, {4}, 3, 2);
        Layer& hidden = idnet.layers()[0];
        hidden.params[0].value.fill(0.0);
        for (std::size_t i = 0; i < 4; ++i) hidden.params[0].value[i * 4 + i] = 1.0;
        hidden.params[1].value.fill(0.0);
        const FeatureMatrix fm = extract_features(idnet, ds, 0);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (std::size_t d = 0; d < 4; ++d) CHECK(fm.row(i)[d] == ds.samples[i].features[d]);
        }
    }
    SUBCASE("classifier layer cannot be tapped") {
        CHECK_THROWS_AS(extract_features(net, ds, net.layers().size() - 1),
                        std::invalid_argument);
        CHECK_THROWS_AS(extract_features(net, ds, 99), std::invalid_argument);
    }
}

TEST_CASE("lda_fit") {
    SUBCASE("well-separated 2-D Gaussians project far apart") {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        for (int i = 0; i < 200; ++i) {
            rows.push_back({noise(rng), noise(rng)});
            labels.push_back(0);
        }
        for (int i = 0; i < 200; ++i) {
            rows.push_back({10.0 + noise(rng), 10.0 + noise(rng)});
            labels.push_back(1);
        }
        const FeatureMatrix fm = matrix_from_rows(rows);
        const LdaModel model = lda_fit(fm, labels, 1);
        CHECK(model.out_dim == 1);
        const FeatureMatrix projected = lda_project(model, fm);

        double mean0 = 0.0, mean1 = 0.0;
        for (int i = 0; i < 200; ++i) mean0 += projected.row(i)[0] / 200.0;
        for (int i = 200; i < 400; ++i) mean1 += projected.row(i)[0] / 200.0;
        double var = 0.0;
        for (int i = 0; i < 400; ++i) {
            const double mu = i < 200 ? mean0 : mean1;
            var += (projected.row(i)[0] - mu) * (projected.row(i)[0] - mu) / 398.0;
        }
        CHECK(std::abs(mean0 - mean1) > 5.0 * std::sqrt(var));

        // direction agrees with the direct 2-class Fisher formula
        const auto w = fisher_two_class(fm, labels);
        const double na = std::hypot(model.projection[0], model.projection[1]);
        const double nb = std::hypot(w[0], w[1]);
        const double cosine = (model.projection[0] * w[0] + model.projection[1] * w[1]) / (na * nb);
        CHECK(std::abs(cosine) > 0.999);
    }
    SUBCASE("rank cap: D=128 with 5 classes gives out_dim 4") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        for (int c = 0; c < 5; ++c) {
            for (int i = 0; i < 20; ++i) {
                std::vector<double> x(10);
                for (double& v : x) v = dist(rng) + 3.0 * c;
                rows.push_back(x);
                labels.push_back(c);
            }
        }
        const LdaModel model = lda_fit(matrix_from_rows(rows), labels, 128);
        CHECK(model.out_dim == 4);
    }
    SUBCASE("projection is linear: class mean of projections equals projection of means") {
        std::mt19937_64 rng(13);
        std::normal_distribution<double> noise(0.0, 0.5);
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        for (int c = 0; c < 2; ++c) {
            for (int i = 0; i < 50; ++i) {
                rows.push_back({5.0 * c + noise(rng), -2.0 * c + noise(rng), noise(rng)});
                labels.push_back(c);
            }
        }
        const FeatureMatrix fm = matrix_from_rows(rows);
        const LdaModel model = lda_fit(fm, labels, 1);
        const FeatureMatrix projected = lda_project(model, fm);
        for (int c = 0; c < 2; ++c) {
            double mean_proj = 0.0;
            std::vector<double> mean_raw(3, 0.0);
            for (int i = 0; i < 50; ++i) {
                const std::size_t r = static_cast<std::size_t>(c * 50 + i);
                mean_proj += projected.row(r)[0] / 50.0;
                for (std::size_t d = 0; d < 3; ++d) mean_raw[d] += fm.row(r)[d] / 50.0;
            }
            double proj_of_mean = 0.0;
            for (std::size_t d = 0; d < 3; ++d) proj_of_mean += mean_raw[d] * model.projection[d];
            CHECK(mean_proj == doctest::Approx(proj_of_mean).epsilon(1e-9));
        }
    }
    SUBCASE("single class rejected") {
        const FeatureMatrix fm = matrix_from_rows({{1.0, 2.0}, {3.0, 4.0}});
        CHECK_THROWS_AS(lda_fit(fm, {0, 0}, 1), std::invalid_argument);
    }
    SUBCASE("degenerate scatter survives via regularization") {
        // every sample equals its class mean: S_w is exactly zero
        const FeatureMatrix fm =
            matrix_from_rows({{0.0, 0.0}, {0.0, 0.0}, {5.0, 5.0}, {5.0, 5.0}});
        const LdaModel model = lda_fit(fm, {0, 0, 1, 1}, 1);
        CHECK(model.out_dim == 1);
        for (double v : model.projection) CHECK(std::isfinite(v));
    }
}

TEST_CASE("kmeans") {
    SUBCASE("two separated pairs split cleanly") {
        const FeatureMatrix fm =
            matrix_from_rows({{0.0, 0.0}, {0.1, 0.0}, {10.0, 10.0}, {10.1, 10.0}});
        const DatasetPartition part = kmeans(fm, 2, 1);
        CHECK(part.assignment[0] == part.assignment[1]);
        CHECK(part.assignment[2] == part.assignment[3]);
        CHECK(part.assignment[0] != part.assignment[2]);
    }
    SUBCASE("K equals T: every point alone, objective zero") {
        const FeatureMatrix fm = matrix_from_rows({{0.0}, {5.0}, {9.0}});
        KmeansStats stats;
        const DatasetPartition part = kmeans(fm, 3, 2, 100, &stats);
        auto sizes = part.subset_sizes();
        for (std::size_t s : sizes) CHECK(s == 1);
        CHECK(stats.objective_history.back() == 0.0);
    }
    SUBCASE("deterministic under a fixed seed") {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> dist(0.0, 10.0);
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < 60; ++i) rows.push_back({dist(rng), dist(rng), dist(rng)});
        const FeatureMatrix fm = matrix_from_rows(rows);
        const DatasetPartition a = kmeans(fm, 4, 123);
        const DatasetPartition b = kmeans(fm, 4, 123);
        CHECK(a.assignment == b.assignment);
        CHECK(a.centroids == b.centroids);
    }
    SUBCASE("objective non-increasing on random instances") {
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> dist(-5.0, 5.0);
        for (int trial = 0; trial < 40; ++trial) {
            std::uniform_int_distribution<std::size_t> nd(5, 60), kd(1, 5);
            const std::size_t n = nd(rng);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < n; ++i) rows.push_back({dist(rng), dist(rng)});
            const FeatureMatrix fm = matrix_from_rows(rows);
            KmeansStats stats;
            kmeans(fm, std::min(kd(rng), n), rng(), 100, &stats);
            for (std::size_t i = 1; i < stats.objective_history.size(); ++i) {
                CHECK(stats.objective_history[i] <= stats.objective_history[i - 1] + 1e-9);
            }
        }
    }
    SUBCASE("no empty subsets even on nasty duplicates") {
        // many duplicate points force empty-cluster repair paths
        std::vector<std::vector<double>> rows(12, {1.0, 1.0});
        rows.push_back({2.0, 2.0});
        const FeatureMatrix fm = matrix_from_rows(rows);
        const DatasetPartition part = kmeans(fm, 5, 9);
        for (std::size_t s : part.subset_sizes()) CHECK(s > 0);
    }
    SUBCASE("K larger than T rejected") {
        const FeatureMatrix fm = matrix_from_rows({{0.0}, {1.0}});
        CHECK_THROWS_AS(kmeans(fm, 3, 1), std::invalid_argument);
    }
}

TEST_CASE("partition_dataset") {
    SynthSpec spec;
    spec.num_coarse_groups = 2;
    spec.subclasses_per_group = 4;
    spec.samples_per_subclass = 40;
    spec.feature_dim = 12;
    spec.coarse_separation = 20.0;
    spec.fine_separation = 2.0;
    spec.noise_sigma = 1.0;
    spec.seed = 5;
    const Dataset train = generate_synthetic(spec).train;

    TrainSpec tspec;
    tspec.pretrain_epochs = 8;
    tspec.hidden_dims = {16};
    tspec.seed = 5;
    const Network base = pretrain_base(train, tspec);

    SUBCASE("K = 1 puts everything in one subset") {
        const DatasetPartition part = partition_dataset(base, train, 1, 4, 5);
        CHECK(part.K == 1);
        for (int a : part.assignment) CHECK(a == 1);
    }
    SUBCASE("recovers the coarse groups and covers the dataset") {
        const DatasetPartition part = partition_dataset(base, train, 2, 4, 5);
        REQUIRE(part.assignment.size() == train.size());
        std::size_t match_id = 0, match_swap = 0;
        for (std::size_t i = 0; i < train.size(); ++i) {
            const int coarse = train.samples[i].coarse_id;   // 0 or 1
            if (part.assignment[i] == coarse + 1) match_id++;
            if (part.assignment[i] == 2 - coarse) match_swap++;
        }
        const double agreement =
            static_cast<double>(std::max(match_id, match_swap)) /
            static_cast<double>(train.size());
        CHECK(agreement >= 0.9);

        const auto sizes = part.subset_sizes();
        std::size_t total = 0;
        for (std::size_t s : sizes) {
            CHECK(s > 0);
            total += s;
        }
        CHECK(total == train.size());
    }
    SUBCASE("deterministic") {
        const DatasetPartition a = partition_dataset(base, train, 2, 4, 5);
        const DatasetPartition b = partition_dataset(base, train, 2, 4, 5);
        CHECK(a.assignment == b.assignment);
    }
}

TEST_CASE("partition text format") {
    TempDir tmp;
    DatasetPartition part;
    part.K = 3;
    part.seed = 42;
    part.assignment = {1, 2, 3, 1, 2, 3, 1};
    part.centroids = {{0.0}, {1.0}, {2.0}};
    const std::string path = tmp.file("part.txt");
    save_partition(path, part);

    SUBCASE("round trip") {
        const DatasetPartition loaded = load_partition(path);
        CHECK(loaded.K == 3);
        CHECK(loaded.seed == 42);
        CHECK(loaded.assignment == part.assignment);
    }
    SUBCASE("header format") {
        std::ifstream is(path);
        std::string header;
        std::getline(is, header);
        CHECK(header == "K=3 T=7 seed=42");
        std::string row;
        std::getline(is, row);
        CHECK(row == "0\t1");
    }
    SUBCASE("subset index outside 1..K rejected") {
        const std::string bad = tmp.file("bad.txt");
        std::ofstream os(bad);
        os << "K=2 T=2 seed=0\n0\t1\n1\t3\n";
        os.close();
        CHECK_THROWS_AS(load_partition(bad), CorruptFileError);
    }
    SUBCASE("missing rows rejected") {
        const std::string bad = tmp.file("short.txt");
        std::ofstream os(bad);
        os << "K=2 T=3 seed=0\n0\t1\n1\t2\n";
        os.close();
        CHECK_THROWS_AS(load_partition(bad), CorruptFileError);
    }
    SUBCASE("duplicate ids rejected") {
        const std::string bad = tmp.file("dup.txt");
        std::ofstream os(bad);
        os << "K=2 T=2 seed=0\n0\t1\n0\t2\n";
        os.close();
        CHECK_THROWS_AS(load_partition(bad), CorruptFileError);
    }
}
