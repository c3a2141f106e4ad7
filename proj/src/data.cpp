#include "mixdcnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"
#include "mixdcnn/errors.hpp"

namespace mixdcnn {

namespace {

constexpr std::uint32_t kMxdsVersion = 1;

void validate_synth_spec(const SynthSpec& s) {
    if (s.num_coarse_groups == 0 || s.subclasses_per_group == 0 || s.samples_per_subclass == 0 ||
        s.feature_dim == 0) {
        throw std::invalid_argument("SynthSpec: counts must be positive");
    }
    if (s.noise_sigma <= 0.0 || s.coarse_separation <= 0.0 || s.fine_separation <= 0.0) {
        throw std::invalid_argument("SynthSpec: separations and noise must be positive");
    }
    if (!(s.fine_separation < s.coarse_separation)) {
        throw std::invalid_argument("SynthSpec: fine_separation must be < coarse_separation");
    }
}

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// Rejection-places G centers with pairwise distance >= min_sep inside an
// origin-centered box that grows whenever placement stalls. Centering keeps
// the generated features roughly zero-mean.
std::vector<std::vector<double>> place_coarse_centers(std::size_t count, std::size_t dim,
                                                      double min_sep, std::mt19937_64& rng) {
    double box = min_sep * (1.0 + std::ceil(std::cbrt(static_cast<double>(count))));
    for (;;) {
        std::uniform_real_distribution<double> coord(-box / 2.0, box / 2.0);
        std::vector<std::vector<double>> centers;
        bool ok = true;
        for (std::size_t g = 0; g < count && ok; ++g) {
            bool placed = false;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                std::vector<double> c(dim);
                for (double& x : c) x = coord(rng);
                bool far_enough = true;
                for (const auto& other : centers) {
                    if (sq_distance(c, other) < min_sep * min_sep) {
                        far_enough = false;
                        break;
                    }
                }
                if (far_enough) {
                    centers.push_back(std::move(c));
                    placed = true;
                    break;
                }
            }
            if (!placed) ok = false;
        }
        if (ok) return centers;
        box *= 2.0;
    }
}

std::vector<double> random_unit_vector(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(dim);
    double norm_sq;
    do {
        norm_sq = 0.0;
        for (double& x : v) {
            x = gauss(rng);
            norm_sq += x * x;
        }
    } while (norm_sq == 0.0);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
    return v;
}

Dataset draw_split(const SynthSpec& spec,
                   const std::vector<std::vector<double>>& subclass_centers, Split split,
                   std::mt19937_64& rng) {
    Dataset ds;
    ds.split = split;
    ds.num_classes = static_cast<int>(spec.num_coarse_groups * spec.subclasses_per_group);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t g = 0; g < spec.num_coarse_groups; ++g) {
        for (std::size_t s = 0; s < spec.subclasses_per_group; ++s) {
            const std::size_t cls = g * spec.subclasses_per_group + s;
            const auto& center = subclass_centers[cls];
            for (std::size_t i = 0; i < spec.samples_per_subclass; ++i) {
                std::vector<double> x(spec.feature_dim);
                for (std::size_t d = 0; d < spec.feature_dim; ++d) x[d] = center[d] + noise(rng);
                ds.samples.push_back(
                    {Tensor::vector(std::move(x)), static_cast<int>(cls), static_cast<int>(g)});
            }
        }
    }
    return ds;
}

} // namespace

SynthDataset generate_synthetic(const SynthSpec& spec) {
    validate_synth_spec(spec);
    std::mt19937_64 rng(spec.seed);

    const auto coarse = place_coarse_centers(spec.num_coarse_groups, spec.feature_dim,
                                             spec.coarse_separation, rng);
    std::vector<std::vector<double>> subclass_centers;
    subclass_centers.reserve(spec.num_coarse_groups * spec.subclasses_per_group);
    for (std::size_t g = 0; g < spec.num_coarse_groups; ++g) {
        for (std::size_t s = 0; s < spec.subclasses_per_group; ++s) {
            auto dir = random_unit_vector(spec.feature_dim, rng);
            std::vector<double> c(spec.feature_dim);
            for (std::size_t d = 0; d < spec.feature_dim; ++d) {
                c[d] = coarse[g][d] + spec.fine_separation * dir[d];
            }
            subclass_centers.push_back(std::move(c));
        }
    }

    SynthDataset out;
    out.train = draw_split(spec, subclass_centers, Split::train, rng);
    out.test = draw_split(spec, subclass_centers, Split::test, rng);
    return out;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    if (dataset.samples.empty()) throw std::invalid_argument("save_dataset: empty dataset");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_dataset: cannot open '" + path + "' for writing");

    binio::put_bytes(os, "MXDS", 4);
    binio::put_u32(os, kMxdsVersion);
    binio::put_u32(os, static_cast<std::uint32_t>(dataset.num_classes));
    binio::put_u64(os, dataset.samples.size());
    const auto& shape = dataset.feature_shape();
    binio::put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) binio::put_u64(os, d);
    for (const Sample& s : dataset.samples) {
        binio::put_u32(os, static_cast<std::uint32_t>(s.label));
        binio::put_u32(os, static_cast<std::uint32_t>(s.coarse_id));
        for (double v : s.features.values()) binio::put_f64(os, v);
    }
    if (!os) throw std::runtime_error("save_dataset: write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path, Split split) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
    binio::Reader r(is, path);

    const std::string magic = r.read_string(4, "magic");
    if (magic != "MXDS") {
        throw CorruptFileError(path + ": bad magic at byte 0 (not an MXDS file)");
    }
    const std::uint32_t version = r.read_u32("version");
    if (version != kMxdsVersion) {
        throw VersionError(path + ": unsupported MXDS version " + std::to_string(version));
    }
    Dataset ds;
    ds.split = split;
    ds.num_classes = static_cast<int>(r.read_u32("num_classes"));
    if (ds.num_classes <= 0) {
        throw CorruptFileError(path + ": zero classes at byte " + std::to_string(r.offset() - 4));
    }
    const std::uint64_t count = r.read_u64("sample count");
    if (count == 0) {
        throw CorruptFileError(path + ": zero samples at byte " + std::to_string(r.offset() - 8));
    }
    const std::uint32_t rank = r.read_u32("shape rank");
    if (rank == 0 || rank > 8) {
        throw CorruptFileError(path + ": implausible feature rank " + std::to_string(rank) +
                               " at byte " + std::to_string(r.offset() - 4));
    }
    std::vector<std::size_t> shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape[i] = static_cast<std::size_t>(r.read_u64("shape dim"));
        if (shape[i] == 0) {
            throw CorruptFileError(path + ": zero feature dim at byte " +
                                   std::to_string(r.offset() - 8));
        }
    }
    const std::size_t numel = shape_numel(shape);
    ds.samples.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Sample s;
        const std::uint64_t label_offset = r.offset();
        s.label = static_cast<int>(r.read_u32("label"));
        if (s.label < 0 || s.label >= ds.num_classes) {
            throw CorruptFileError(path + ": label out of range at byte " +
                                   std::to_string(label_offset));
        }
        s.coarse_id = static_cast<int>(r.read_u32("coarse id"));
        std::vector<double> values(numel);
        for (std::size_t j = 0; j < numel; ++j) {
            const std::uint64_t off = r.offset();
            values[j] = r.read_f64("feature");
            if (!std::isfinite(values[j])) {
                throw CorruptFileError(path + ": non-finite feature at byte " +
                                       std::to_string(off));
            }
        }
        s.features = Tensor(shape, std::move(values));
        ds.samples.push_back(std::move(s));
    }
    if (!r.at_eof()) {
        throw CorruptFileError(path + ": trailing bytes after sample data at byte " +
                               std::to_string(r.offset()));
    }
    return ds;
}

Dataset load_csv_dataset(const std::string& path, Split split) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_csv_dataset: cannot open '" + path + "'");

    Dataset ds;
    ds.split = split;
    std::string line;
    std::size_t line_no = 0;
    std::size_t expected_dim = 0;
    int max_label = -1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 2) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) +
                                   ": expected `label,feat1,...` row");
        }
        // header line: first field of the first row is not an integer
        if (line_no == 1) {
            try {
                std::size_t pos = 0;
                (void)std::stoi(fields[0], &pos);
                if (pos != fields[0].size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                continue;   // skip header
            }
        }
        Sample s;
        try {
            std::size_t pos = 0;
            s.label = std::stoi(fields[0], &pos);
            if (pos != fields[0].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": bad label '" +
                                   fields[0] + "'");
        }
        if (s.label < 0) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": negative label");
        }
        std::vector<double> values;
        values.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            try {
                std::size_t pos = 0;
                values.push_back(std::stod(fields[i], &pos));
                if (pos != fields[i].size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw CorruptFileError(path + ":" + std::to_string(line_no) + ": bad number '" +
                                       fields[i] + "'");
            }
            if (!std::isfinite(values.back())) {
                throw CorruptFileError(path + ":" + std::to_string(line_no) +
                                       ": non-finite feature");
            }
        }
        if (expected_dim == 0) {
            expected_dim = values.size();
        } else if (values.size() != expected_dim) {
            throw CorruptFileError(path + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(expected_dim) + " features, got " +
                                   std::to_string(values.size()));
        }
        max_label = std::max(max_label, s.label);
        s.features = Tensor::vector(std::move(values));
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw CorruptFileError(path + ": no samples");
    ds.num_classes = max_label + 1;
    return ds;
}

Dataset load_dataset_auto(const std::string& path, Split split) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
        return load_csv_dataset(path, split);
    }
    return load_dataset(path, split);
}

BatchIterator::BatchIterator(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : dataset_size_(dataset_size), batch_size_(batch_size), seed_(seed) {
    if (dataset_size_ == 0) throw std::invalid_argument("BatchIterator: empty dataset");
    if (batch_size_ == 0) throw std::invalid_argument("BatchIterator: batch size must be >= 1");
}

std::vector<std::vector<std::size_t>> BatchIterator::next_epoch() {
    return epoch_batches(epoch_++);
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch_batches(std::uint64_t epoch) const {
    std::vector<std::size_t> order(dataset_size_);
    for (std::size_t i = 0; i < dataset_size_; ++i) order[i] = i;
    // splitmix-style epoch mixing keeps epochs independent under one seed
    std::mt19937_64 rng(seed_ ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < dataset_size_; start += batch_size_) {
        const std::size_t end = std::min(start + batch_size_, dataset_size_);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

} // namespace mixdcnn
