#include "mixdcnn/partition.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mixdcnn/errors.hpp"

namespace mixdcnn {

std::vector<std::size_t> DatasetPartition::subset_sizes() const {
    std::vector<std::size_t> sizes(K, 0);
    for (int a : assignment) sizes[static_cast<std::size_t>(a - 1)]++;
    return sizes;
}

std::vector<std::vector<std::size_t>> DatasetPartition::subsets() const {
    std::vector<std::vector<std::size_t>> out(K);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        out[static_cast<std::size_t>(assignment[i] - 1)].push_back(i);
    }
    return out;
}

FeatureMatrix extract_features(const Network& network, const Dataset& dataset,
                               std::size_t tap_layer) {
    if (dataset.samples.empty()) throw std::invalid_argument("extract_features: empty dataset");
    if (network.layers().empty() || tap_layer + 1 >= network.layers().size()) {
        throw std::invalid_argument("extract_features: tap layer " + std::to_string(tap_layer) +
                                    " is not a hidden layer of a " +
                                    std::to_string(network.layers().size()) + "-layer network");
    }
    FeatureMatrix fm;
    fm.rows = dataset.size();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Tensor act = network.forward_partial(dataset.samples[i].features, tap_layer);
        if (i == 0) {
            fm.cols = act.size();
            fm.values.reserve(fm.rows * fm.cols);
        }
        fm.values.insert(fm.values.end(), act.values().begin(), act.values().end());
        fm.sample_ids.push_back(i);
    }
    return fm;
}

namespace {

// --- small dense symmetric linear algebra, enough for desk-scale LDA ---

using Matrix = std::vector<double>;   // dim x dim, row-major

// Cholesky factor L (lower), A = L L^T. A must be symmetric positive definite.
Matrix cholesky(const Matrix& a, std::size_t dim) {
    Matrix l(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = a[i * dim + j];
            for (std::size_t k = 0; k < j; ++k) acc -= l[i * dim + k] * l[j * dim + k];
            if (i == j) {
                if (acc <= 0.0) {
                    throw std::runtime_error("cholesky: matrix not positive definite");
                }
                l[i * dim + i] = std::sqrt(acc);
            } else {
                l[i * dim + j] = acc / l[j * dim + j];
            }
        }
    }
    return l;
}

// Solves L x = b (forward substitution).
std::vector<double> solve_lower(const Matrix& l, std::size_t dim, std::vector<double> b) {
    for (std::size_t i = 0; i < dim; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l[i * dim + k] * b[k];
        b[i] = acc / l[i * dim + i];
    }
    return b;
}

// Solves L^T x = b (back substitution on the transpose of L).
std::vector<double> solve_lower_transpose(const Matrix& l, std::size_t dim,
                                          std::vector<double> b) {
    for (std::size_t i = dim; i-- > 0;) {
        double acc = b[i];
        for (std::size_t k = i + 1; k < dim; ++k) acc -= l[k * dim + i] * b[k];
        b[i] = acc / l[i * dim + i];
    }
    return b;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
// and stores eigenvectors as columns of `vecs`.
void jacobi_eigen(Matrix a, std::size_t dim, std::vector<double>& eigvals, Matrix& vecs) {
    vecs.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) vecs[i * dim + i] = 1.0;
    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < dim; ++p)
            for (std::size_t q = p + 1; q < dim; ++q) off += a[p * dim + q] * a[p * dim + q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < dim; ++p) {
            for (std::size_t q = p + 1; q < dim; ++q) {
                const double apq = a[p * dim + q];
                if (apq == 0.0) continue;
                const double app = a[p * dim + p];
                const double aqq = a[q * dim + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < dim; ++i) {
                    const double aip = a[i * dim + p];
                    const double aiq = a[i * dim + q];
                    a[i * dim + p] = c * aip - s * aiq;
                    a[i * dim + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < dim; ++i) {
                    const double api = a[p * dim + i];
                    const double aqi = a[q * dim + i];
                    a[p * dim + i] = c * api - s * aqi;
                    a[q * dim + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < dim; ++i) {
                    const double vip = vecs[i * dim + p];
                    const double viq = vecs[i * dim + q];
                    vecs[i * dim + p] = c * vip - s * viq;
                    vecs[i * dim + q] = s * vip + c * viq;
                }
            }
        }
    }
    eigvals.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) eigvals[i] = a[i * dim + i];
}

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

} // namespace

LdaModel lda_fit(const FeatureMatrix& features, const std::vector<int>& class_labels,
                 std::size_t requested_dim) {
    if (requested_dim == 0) throw std::invalid_argument("lda_fit: requested_dim must be >= 1");
    if (features.rows == 0 || features.rows != class_labels.size()) {
        throw std::invalid_argument("lda_fit: label count does not match feature rows");
    }
    const std::size_t dim = features.cols;
    const std::size_t rows = features.rows;

    // class means, remapping labels to a dense 0..C-1 range
    std::map<int, std::size_t> class_index;
    for (int lbl : class_labels) class_index.emplace(lbl, class_index.size());
    const std::size_t num_classes = class_index.size();
    if (num_classes < 2) throw std::invalid_argument("lda_fit: need at least 2 classes");

    std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(num_classes, 0);
    std::vector<double> global_mean(dim, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t c = class_index.at(class_labels[r]);
        const double* row = features.row(r);
        for (std::size_t d = 0; d < dim; ++d) {
            means[c][d] += row[d];
            global_mean[d] += row[d];
        }
        counts[c]++;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (double& v : means[c]) v /= static_cast<double>(counts[c]);
    }
    for (double& v : global_mean) v /= static_cast<double>(rows);

    // scatter matrices
    Matrix sw(dim * dim, 0.0), sb(dim * dim, 0.0);
    std::vector<double> diff(dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t c = class_index.at(class_labels[r]);
        const double* row = features.row(r);
        for (std::size_t d = 0; d < dim; ++d) diff[d] = row[d] - means[c][d];
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) sw[i * dim + j] += diff[i] * diff[j];
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t d = 0; d < dim; ++d) diff[d] = means[c][d] - global_mean[d];
        const double n_c = static_cast<double>(counts[c]);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) sb[i * dim + j] += n_c * diff[i] * diff[j];
    }

    double trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i) trace += sw[i * dim + i];
    // eps floor keeps all-duplicate degenerate inputs factorizable
    const double eps = std::max(1e-6 * trace / static_cast<double>(dim), 1e-12);
    for (std::size_t i = 0; i < dim; ++i) sw[i * dim + i] += eps;

    // whiten: M = L^-1 Sb L^-T, then eigendecompose the symmetric M
    const Matrix l = cholesky(sw, dim);
    Matrix m(dim * dim, 0.0);
    {
        // columns of Y = L^-1 Sb
        Matrix y(dim * dim, 0.0);
        std::vector<double> col(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            for (std::size_t i = 0; i < dim; ++i) col[i] = sb[i * dim + j];
            const auto solved = solve_lower(l, dim, col);
            for (std::size_t i = 0; i < dim; ++i) y[i * dim + j] = solved[i];
        }
        // M = Y L^-T  <=>  M^T = L^-1 Y^T; M symmetric so solve rows of Y
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) col[j] = y[i * dim + j];
            const auto solved = solve_lower(l, dim, col);
            for (std::size_t j = 0; j < dim; ++j) m[i * dim + j] = solved[j];
        }
        // enforce symmetry lost to rounding
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = i + 1; j < dim; ++j) {
                const double avg = 0.5 * (m[i * dim + j] + m[j * dim + i]);
                m[i * dim + j] = avg;
                m[j * dim + i] = avg;
            }
    }

    std::vector<double> eigvals;
    Matrix eigvecs;
    jacobi_eigen(m, dim, eigvals, eigvecs);

    std::vector<std::size_t> order(dim);
    for (std::size_t i = 0; i < dim; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return eigvals[a] > eigvals[b]; });

    LdaModel model;
    model.input_dim = dim;
    model.out_dim = std::min({requested_dim, num_classes - 1, dim});
    model.class_means = means;
    model.projection.assign(dim * model.out_dim, 0.0);
    for (std::size_t j = 0; j < model.out_dim; ++j) {
        std::vector<double> v(dim);
        for (std::size_t i = 0; i < dim; ++i) v[i] = eigvecs[i * dim + order[j]];
        auto w = solve_lower_transpose(l, dim, std::move(v));
        // unit norm, sign fixed by the largest-magnitude entry
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        std::size_t lead = 0;
        for (std::size_t i = 1; i < dim; ++i) {
            if (std::abs(w[i]) > std::abs(w[lead])) lead = i;
        }
        const double sign = w[lead] < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < dim; ++i) {
            model.projection[i * model.out_dim + j] = w[i] * sign / norm;
        }
    }
    return model;
}

FeatureMatrix lda_project(const LdaModel& model, const FeatureMatrix& features) {
    if (features.cols != model.input_dim) {
        throw std::invalid_argument("lda_project: feature dim " + std::to_string(features.cols) +
                                    " does not match model input dim " +
                                    std::to_string(model.input_dim));
    }
    FeatureMatrix out;
    out.rows = features.rows;
    out.cols = model.out_dim;
    out.sample_ids = features.sample_ids;
    out.values.assign(out.rows * out.cols, 0.0);
    for (std::size_t r = 0; r < features.rows; ++r) {
        const double* x = features.row(r);
        double* y = out.row(r);
        for (std::size_t i = 0; i < model.input_dim; ++i) {
            const double xi = x[i];
            const double* prow = model.projection.data() + i * model.out_dim;
            for (std::size_t j = 0; j < model.out_dim; ++j) y[j] += xi * prow[j];
        }
    }
    return out;
}

namespace {

// Splits the largest subset at its two most distant members to fill `empty_k`
// (1-based). Guarantees progress even on duplicate points.
void split_largest_into(DatasetPartition& part, const FeatureMatrix& features, int empty_k,
                        std::vector<std::vector<std::size_t>>& members) {
    std::size_t largest = 0;
    for (std::size_t k = 1; k < part.K; ++k) {
        if (members[k].size() > members[largest].size()) largest = k;
    }
    auto& pool = members[largest];
    assert(pool.size() >= 2);
    std::size_t ia = 0, ib = 1;
    double best = -1.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.size(); ++j) {
            const double d = sq_dist(features.row(pool[i]), features.row(pool[j]), features.cols);
            if (d > best) {
                best = d;
                ia = i;
                ib = j;
            }
        }
    }
    const std::size_t anchor_keep = pool[ia];
    const std::size_t anchor_move = pool[ib];
    std::vector<std::size_t> keep, move;
    for (std::size_t id : pool) {
        const double da = sq_dist(features.row(id), features.row(anchor_keep), features.cols);
        const double db = sq_dist(features.row(id), features.row(anchor_move), features.cols);
        (db < da ? move : keep).push_back(id);
    }
    if (move.empty()) {
        // all duplicates; peel one point off so the subset is non-empty
        move.push_back(keep.back());
        keep.pop_back();
    }
    for (std::size_t id : move) part.assignment[id] = empty_k;
    members[largest] = std::move(keep);
    members[static_cast<std::size_t>(empty_k - 1)] = std::move(move);
}

void recompute_centroids(DatasetPartition& part, const FeatureMatrix& features) {
    const std::size_t dim = features.cols;
    part.centroids.assign(part.K, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(part.K, 0);
    for (std::size_t i = 0; i < part.assignment.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(part.assignment[i] - 1);
        const double* row = features.row(i);
        for (std::size_t d = 0; d < dim; ++d) part.centroids[k][d] += row[d];
        counts[k]++;
    }
    for (std::size_t k = 0; k < part.K; ++k) {
        if (counts[k] > 0) {
            for (double& v : part.centroids[k]) v /= static_cast<double>(counts[k]);
        }
    }
}

} // namespace

DatasetPartition kmeans(const FeatureMatrix& features, std::size_t K, std::uint64_t seed,
                        std::size_t max_iters, KmeansStats* stats) {
    const std::size_t rows = features.rows;
    const std::size_t dim = features.cols;
    if (K == 0) throw std::invalid_argument("kmeans: K must be >= 1");
    if (K > rows) {
        throw std::invalid_argument("kmeans: K = " + std::to_string(K) + " exceeds sample count " +
                                    std::to_string(rows));
    }

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> centroids;
    centroids.reserve(K);

    // k-means++ seeding
    {
        std::uniform_int_distribution<std::size_t> first(0, rows - 1);
        const double* c0 = features.row(first(rng));
        centroids.emplace_back(c0, c0 + dim);
        std::vector<double> d2(rows);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        while (centroids.size() < K) {
            double total = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& c : centroids) {
                    best = std::min(best, sq_dist(features.row(r), c.data(), dim));
                }
                d2[r] = best;
                total += best;
            }
            std::size_t chosen;
            if (total == 0.0) {
                chosen = first(rng);   // all points coincide with centroids
            } else {
                const double target = unit(rng) * total;
                double acc = 0.0;
                chosen = rows - 1;
                for (std::size_t r = 0; r < rows; ++r) {
                    acc += d2[r];
                    if (acc >= target) {
                        chosen = r;
                        break;
                    }
                }
            }
            const double* c = features.row(chosen);
            centroids.emplace_back(c, c + dim);
        }
    }

    DatasetPartition part;
    part.K = K;
    part.seed = seed;
    part.assignment.assign(rows, 1);

    std::vector<int> previous(rows, 0);
    double prev_objective = std::numeric_limits<double>::infinity();
    std::size_t iter = 0;
    for (; iter < max_iters; ++iter) {
        // assignment step
        double objective = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_k = 0;
            for (std::size_t k = 0; k < K; ++k) {
                const double d = sq_dist(features.row(r), centroids[k].data(), dim);
                if (d < best) {
                    best = d;
                    best_k = k;
                }
            }
            part.assignment[r] = static_cast<int>(best_k) + 1;
            objective += best;
        }
        assert(objective <= prev_objective * (1.0 + 1e-12) + 1e-12);
        prev_objective = objective;
        if (stats) stats->objective_history.push_back(objective);
        if (part.assignment == previous) break;
        previous = part.assignment;

        // update step; clusters that lost all members keep their centroid
        std::vector<std::size_t> counts(K, 0);
        std::vector<std::vector<double>> sums(K, std::vector<double>(dim, 0.0));
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t k = static_cast<std::size_t>(part.assignment[r] - 1);
            const double* row = features.row(r);
            for (std::size_t d = 0; d < dim; ++d) sums[k][d] += row[d];
            counts[k]++;
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (counts[k] > 0) {
                for (std::size_t d = 0; d < dim; ++d) {
                    centroids[k][d] = sums[k][d] / static_cast<double>(counts[k]);
                }
            }
        }
    }
    if (stats) stats->iterations = iter;

    part.centroids = std::move(centroids);

    // empty-subset repair
    auto members = part.subsets();
    for (;;) {
        int empty_k = 0;
        for (std::size_t k = 0; k < K; ++k) {
            if (members[k].empty()) {
                empty_k = static_cast<int>(k) + 1;
                break;
            }
        }
        if (empty_k == 0) break;
        split_largest_into(part, features, empty_k, members);
        if (stats) stats->empty_repairs++;
    }
    recompute_centroids(part, features);
    return part;
}

DatasetPartition partition_dataset(const Network& base_network, const Dataset& dataset,
                                   std::size_t K, std::size_t lda_dim, std::uint64_t seed,
                                   std::size_t tap_layer) {
    const FeatureMatrix raw = extract_features(base_network, dataset, tap_layer);
    std::vector<int> labels(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) labels[i] = dataset.samples[i].label;
    const LdaModel lda = lda_fit(raw, labels, lda_dim);
    const FeatureMatrix reduced = lda_project(lda, raw);
    return kmeans(reduced, K, seed);
}

DatasetPartition partition_dataset(const Network& base_network, const Dataset& dataset,
                                   std::size_t K, std::size_t lda_dim, std::uint64_t seed) {
    if (base_network.layers().size() < 2) {
        throw std::invalid_argument("partition_dataset: network too shallow to tap");
    }
    return partition_dataset(base_network, dataset, K, lda_dim, seed,
                             base_network.layers().size() - 2);
}

void save_partition(const std::string& path, const DatasetPartition& partition) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_partition: cannot open '" + path + "'");
    os << "K=" << partition.K << " T=" << partition.assignment.size() << " seed=" << partition.seed
       << "\n";
    for (std::size_t i = 0; i < partition.assignment.size(); ++i) {
        os << i << '\t' << partition.assignment[i] << '\n';
    }
    if (!os) throw std::runtime_error("save_partition: write failed for '" + path + "'");
}

DatasetPartition load_partition(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_partition: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(is, header)) throw CorruptFileError(path + ": missing header line");

    DatasetPartition part;
    std::size_t count = 0;
    {
        std::istringstream hs(header);
        std::string field;
        bool have_k = false, have_t = false;
        while (hs >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw CorruptFileError(path + ":1: malformed header");
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            try {
                if (key == "K") {
                    part.K = std::stoul(value);
                    have_k = true;
                } else if (key == "T") {
                    count = std::stoul(value);
                    have_t = true;
                } else if (key == "seed") {
                    part.seed = std::stoull(value);
                } else {
                    throw CorruptFileError(path + ":1: unknown header field '" + key + "'");
                }
            } catch (const std::logic_error&) {
                throw CorruptFileError(path + ":1: bad header value '" + value + "'");
            }
        }
        if (!have_k || !have_t || part.K == 0) {
            throw CorruptFileError(path + ":1: header must provide K and T");
        }
    }
    part.assignment.assign(count, 0);
    std::string line;
    std::size_t line_no = 1;
    std::size_t seen = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t id = 0;
        int subset = 0;
        if (!(ls >> id >> subset)) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": malformed row");
        }
        if (id >= count) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": sample id " +
                                   std::to_string(id) + " out of range");
        }
        if (subset < 1 || static_cast<std::size_t>(subset) > part.K) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": subset index " +
                                   std::to_string(subset) + " outside 1.." +
                                   std::to_string(part.K));
        }
        if (part.assignment[id] != 0) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": duplicate sample id " +
                                   std::to_string(id));
        }
        part.assignment[id] = subset;
        ++seen;
    }
    if (seen != count) {
        throw CorruptFileError(path + ": header promises " + std::to_string(count) +
                               " samples, found " + std::to_string(seen));
    }
    return part;
}

} // namespace mixdcnn
