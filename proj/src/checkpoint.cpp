#include "mixdcnn/checkpoint.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"
#include "mixdcnn/errors.hpp"

namespace mixdcnn {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::string shape_csv(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

std::vector<std::size_t> parse_shape_csv(const std::string& text) {
    std::vector<std::size_t> shape;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, 'x')) shape.push_back(std::stoul(field));
    return shape;
}

std::string layer_list(const Network& net) {
    std::ostringstream os;
    bool first = true;
    for (const Layer& l : net.layers()) {
        if (!first) os << ',';
        first = false;
        switch (l.spec.kind) {
            case LayerKind::linear:
                os << "linear:" << l.spec.in_features << ':' << l.spec.out_features;
                break;
            case LayerKind::relu:
                os << "relu";
                break;
            case LayerKind::conv2d:
                os << "conv2d:" << l.spec.in_channels << ':' << l.spec.out_channels << ':'
                   << l.spec.kernel << ':' << l.spec.stride;
                break;
        }
    }
    return os.str();
}

std::vector<LayerSpec> parse_layer_list(const std::string& text) {
    std::vector<LayerSpec> specs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream is(item);
        std::string kind;
        std::getline(is, kind, ':');
        std::vector<std::size_t> args;
        std::string arg;
        while (std::getline(is, arg, ':')) args.push_back(std::stoul(arg));
        if (kind == "linear" && args.size() == 2) {
            specs.push_back(LayerSpec::linear(args[0], args[1]));
        } else if (kind == "relu" && args.empty()) {
            specs.push_back(LayerSpec::relu());
        } else if (kind == "conv2d" && args.size() == 4) {
            specs.push_back(LayerSpec::conv2d(args[0], args[1], args[2], args[3]));
        } else {
            throw CorruptFileError("checkpoint: malformed layer item '" + item + "'");
        }
    }
    return specs;
}

} // namespace

std::string architecture_tag(const Model& model) {
    std::ostringstream os;
    os << architecture_name(model.arch);
    os << ";K=" << model.bank.size();
    os << ";input=" << shape_csv(model.bank.experts.front().input_shape());
    os << ";net=" << layer_list(model.bank.experts.front());
    if (model.gate) os << ";gate=" << layer_list(model.gate->network);
    return os.str();
}

void save_checkpoint(const std::string& path, const Model& model) {
    if (model.bank.experts.empty()) throw std::invalid_argument("save_checkpoint: empty bank");
    std::ostringstream body;
    binio::put_bytes(body, "MIXD", 4);
    binio::put_u32(body, kCheckpointVersion);
    const std::string tag = architecture_tag(model);
    binio::put_u32(body, static_cast<std::uint32_t>(tag.size()));
    binio::put_bytes(body, tag.data(), tag.size());
    binio::put_u32(body, static_cast<std::uint32_t>(model.bank.size()));

    auto put_param = [&body](const std::string& name, const Parameter& p) {
        binio::put_u32(body, static_cast<std::uint32_t>(name.size()));
        binio::put_bytes(body, name.data(), name.size());
        binio::put_u32(body, static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape()) binio::put_u64(body, d);
        for (double v : p.value.values()) binio::put_f64(body, v);
    };
    for (std::size_t k = 0; k < model.bank.size(); ++k) {
        for (const Parameter* p : model.bank.experts[k].parameters()) {
            put_param("expert" + std::to_string(k) + "." + p->name, *p);
        }
    }
    if (model.gate) {
        for (const Parameter* p : model.gate->network.parameters()) {
            put_param("gate." + p->name, *p);
        }
    }

    const std::string bytes = body.str();
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
    binio::put_bytes(os, bytes.data(), bytes.size());
    binio::put_u32(os, crc);
    if (!os) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    const std::string bytes = buf.str();
    if (bytes.size() < 4 + 4 + 4 + 4 + 4) {
        throw CorruptFileError(path + ": too short for a MIXD checkpoint");
    }
    const std::string body = bytes.substr(0, bytes.size() - 4);
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i) {
        stored_crc |= static_cast<std::uint32_t>(
                          static_cast<unsigned char>(bytes[bytes.size() - 4 + i]))
                      << (8 * i);
    }
    const auto computed = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    if (computed != stored_crc) {
        throw CorruptFileError(path + ": CRC mismatch (stored " + std::to_string(stored_crc) +
                               ", computed " + std::to_string(computed) + ")");
    }

    std::istringstream body_stream(body);
    binio::Reader r(body_stream, path);
    if (r.read_string(4, "magic") != "MIXD") {
        throw CorruptFileError(path + ": bad magic at byte 0 (not a MIXD checkpoint)");
    }
    const std::uint32_t version = r.read_u32("version");
    if (version != kCheckpointVersion) {
        throw VersionError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t tag_len = r.read_u32("tag length");
    if (tag_len > body.size()) throw CorruptFileError(path + ": implausible tag length");
    const std::string tag = r.read_string(tag_len, "architecture tag");
    const std::uint32_t k_count = r.read_u32("K");
    if (k_count == 0) throw CorruptFileError(path + ": K must be >= 1");

    // parse tag: arch;K=..;input=..;net=..[;gate=..]
    std::string arch_name, input_text, net_text, gate_text;
    {
        std::stringstream ss(tag);
        std::string field;
        bool first = true;
        while (std::getline(ss, field, ';')) {
            if (first) {
                arch_name = field;
                first = false;
                continue;
            }
            const auto eq = field.find('=');
            if (eq == std::string::npos) {
                throw CorruptFileError(path + ": malformed architecture tag '" + tag + "'");
            }
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            if (key == "input") input_text = value;
            else if (key == "net") net_text = value;
            else if (key == "gate") gate_text = value;
            // K is redundant with the explicit field; ignored here
        }
    }
    if (arch_name.empty() || input_text.empty() || net_text.empty()) {
        throw CorruptFileError(path + ": incomplete architecture tag '" + tag + "'");
    }

    Model model;
    try {
        model.arch = architecture_from_name(arch_name);
        const auto input_shape = parse_shape_csv(input_text);
        const auto specs = parse_layer_list(net_text);
        std::vector<Network> experts;
        experts.reserve(k_count);
        for (std::uint32_t k = 0; k < k_count; ++k) {
            experts.push_back(build_network(input_shape, specs, 0));
        }
        model.bank = make_expert_bank(std::move(experts));
        if (!gate_text.empty()) {
            model.gate = GateNetwork{build_network(input_shape, parse_layer_list(gate_text), 0)};
        }
    } catch (const std::invalid_argument& e) {
        throw CorruptFileError(path + ": invalid architecture tag: " + e.what());
    } catch (const std::logic_error& e) {
        throw CorruptFileError(path + ": invalid architecture tag: " + e.what());
    }

    // index the freshly built parameters by qualified name
    std::vector<std::pair<std::string, Parameter*>> slots;
    for (std::uint32_t k = 0; k < k_count; ++k) {
        for (Parameter* p : model.bank.experts[k].parameters()) {
            slots.emplace_back("expert" + std::to_string(k) + "." + p->name, p);
        }
    }
    if (model.gate) {
        for (Parameter* p : model.gate->network.parameters()) {
            slots.emplace_back("gate." + p->name, p);
        }
    }

    std::size_t filled = 0;
    while (r.offset() < body.size()) {
        const std::uint32_t name_len = r.read_u32("parameter name length");
        if (name_len > body.size()) throw CorruptFileError(path + ": implausible name length");
        const std::string name = r.read_string(name_len, "parameter name");
        const std::uint32_t rank = r.read_u32("parameter rank");
        if (rank == 0 || rank > 8) {
            throw CorruptFileError(path + ": implausible parameter rank for '" + name + "'");
        }
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = static_cast<std::size_t>(r.read_u64("parameter dim"));
        }
        Parameter* slot = nullptr;
        for (auto& [slot_name, p] : slots) {
            if (slot_name == name) {
                slot = p;
                break;
            }
        }
        if (!slot) throw CorruptFileError(path + ": unexpected parameter '" + name + "'");
        if (slot->value.shape() != shape) {
            throw CorruptFileError(path + ": parameter '" + name + "' has shape " +
                                   shape_to_string(shape) + ", expected " +
                                   shape_to_string(slot->value.shape()));
        }
        for (double& v : slot->value.values()) v = r.read_f64("parameter data");
        ++filled;
    }
    if (filled != slots.size()) {
        throw CorruptFileError(path + ": expected " + std::to_string(slots.size()) +
                               " parameter tensors, found " + std::to_string(filled));
    }
    return model;
}

} // namespace mixdcnn
