#include "mixdcnn/layers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mixdcnn {

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::linear: return "linear";
        case LayerKind::relu: return "relu";
        case LayerKind::conv2d: return "conv2d";
    }
    throw std::invalid_argument("layer_kind_name: unknown kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "linear") return LayerKind::linear;
    if (name == "relu") return LayerKind::relu;
    if (name == "conv2d") return LayerKind::conv2d;
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
    if (in == 0 || out == 0) throw std::invalid_argument("linear layer: feature counts must be positive");
    LayerSpec s;
    s.kind = LayerKind::linear;
    s.in_features = in;
    s.out_features = out;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride) {
    if (in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0) {
        throw std::invalid_argument("conv2d layer: all dims must be positive");
    }
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& input_shape) {
    switch (spec.kind) {
        case LayerKind::linear: {
            // accepts any input whose total size matches; output is flat
            if (shape_numel(input_shape) != spec.in_features) {
                throw std::invalid_argument("linear layer expects " +
                                            std::to_string(spec.in_features) +
                                            " inputs, got shape " + shape_to_string(input_shape));
            }
            return {spec.out_features};
        }
        case LayerKind::relu:
            return input_shape;
        case LayerKind::conv2d: {
            if (input_shape.size() != 3 || input_shape[0] != spec.in_channels) {
                throw std::invalid_argument("conv2d expects [C,H,W] input with C=" +
                                            std::to_string(spec.in_channels) + ", got " +
                                            shape_to_string(input_shape));
            }
            const std::size_t h = input_shape[1];
            const std::size_t w = input_shape[2];
            if (spec.kernel > h || spec.kernel > w) {
                throw std::invalid_argument("conv2d kernel " + std::to_string(spec.kernel) +
                                            " exceeds input extent " + shape_to_string(input_shape));
            }
            const std::size_t oh = (h - spec.kernel) / spec.stride + 1;
            const std::size_t ow = (w - spec.kernel) / spec.stride + 1;
            return {spec.out_channels, oh, ow};
        }
    }
    throw std::invalid_argument("layer_output_shape: unknown kind");
}

Layer make_layer(const LayerSpec& spec, const std::string& name_prefix, std::uint64_t seed) {
    Layer layer;
    layer.spec = spec;
    std::mt19937_64 rng(seed);
    auto init_uniform = [&rng](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t.values()) v = dist(rng);
    };
    switch (spec.kind) {
        case LayerKind::linear: {
            Tensor w({spec.out_features, spec.in_features});
            init_uniform(w, spec.in_features, spec.out_features);
            layer.params.emplace_back(std::move(w), name_prefix + ".weight");
            layer.params.emplace_back(Tensor({spec.out_features}), name_prefix + ".bias");
            break;
        }
        case LayerKind::relu:
            break;
        case LayerKind::conv2d: {
            Tensor w({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
            const std::size_t patch = spec.kernel * spec.kernel;
            init_uniform(w, spec.in_channels * patch, spec.out_channels * patch);
            layer.params.emplace_back(std::move(w), name_prefix + ".weight");
            layer.params.emplace_back(Tensor({spec.out_channels}), name_prefix + ".bias");
            break;
        }
    }
    return layer;
}

namespace {

Tensor linear_forward(const Layer& layer, const Tensor& input) {
    const auto& spec = layer.spec;
    const Tensor& w = layer.params[0].value;
    const Tensor& b = layer.params[1].value;
    Tensor out({spec.out_features});
    for (std::size_t o = 0; o < spec.out_features; ++o) {
        double acc = b[o];
        const double* wrow = w.data() + o * spec.in_features;
        for (std::size_t i = 0; i < spec.in_features; ++i) acc += wrow[i] * input[i];
        out[o] = acc;
    }
    return out;
}

Tensor linear_backward(Layer& layer, const Tensor& input, const Tensor& up) {
    const auto& spec = layer.spec;
    const Tensor& w = layer.params[0].value;
    Tensor& gw = layer.params[0].grad;
    Tensor& gb = layer.params[1].grad;
    Tensor din(input.shape());
    for (std::size_t o = 0; o < spec.out_features; ++o) {
        const double u = up[o];
        gb[o] += u;
        const double* wrow = w.data() + o * spec.in_features;
        double* gwrow = gw.data() + o * spec.in_features;
        for (std::size_t i = 0; i < spec.in_features; ++i) {
            gwrow[i] += u * input[i];
            din[i] += u * wrow[i];
        }
    }
    return din;
}

Tensor conv2d_forward(const Layer& layer, const Tensor& input) {
    const auto& s = layer.spec;
    const auto out_shape = layer_output_shape(s, input.shape());
    const std::size_t h = input.shape()[1], w = input.shape()[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2];
    const Tensor& weight = layer.params[0].value;
    const Tensor& bias = layer.params[1].value;
    Tensor out(out_shape);
    for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bias[oc];
                for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
                    for (std::size_t ky = 0; ky < s.kernel; ++ky) {
                        const std::size_t iy = oy * s.stride + ky;
                        const double* irow = input.data() + (ic * h + iy) * w + ox * s.stride;
                        const double* wrow =
                            weight.data() + ((oc * s.in_channels + ic) * s.kernel + ky) * s.kernel;
                        for (std::size_t kx = 0; kx < s.kernel; ++kx) acc += irow[kx] * wrow[kx];
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

Tensor conv2d_backward(Layer& layer, const Tensor& input, const Tensor& up) {
    const auto& s = layer.spec;
    const auto out_shape = layer_output_shape(s, input.shape());
    const std::size_t h = input.shape()[1], w = input.shape()[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2];
    const Tensor& weight = layer.params[0].value;
    Tensor& gw = layer.params[0].grad;
    Tensor& gb = layer.params[1].grad;
    Tensor din(input.shape());
    for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double u = up[(oc * oh + oy) * ow + ox];
                gb[oc] += u;
                for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
                    for (std::size_t ky = 0; ky < s.kernel; ++ky) {
                        const std::size_t iy = oy * s.stride + ky;
                        const double* irow = input.data() + (ic * h + iy) * w + ox * s.stride;
                        double* dirow = din.data() + (ic * h + iy) * w + ox * s.stride;
                        const std::size_t wbase =
                            ((oc * s.in_channels + ic) * s.kernel + ky) * s.kernel;
                        for (std::size_t kx = 0; kx < s.kernel; ++kx) {
                            gw[wbase + kx] += u * irow[kx];
                            dirow[kx] += u * weight[wbase + kx];
                        }
                    }
                }
            }
        }
    }
    return din;
}

} // namespace

Tensor layer_forward(const Layer& layer, const Tensor& input) {
    switch (layer.spec.kind) {
        case LayerKind::linear:
            layer_output_shape(layer.spec, input.shape());   // shape check
            return linear_forward(layer, input);
        case LayerKind::relu: {
            Tensor out = input;
            for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
            return out;
        }
        case LayerKind::conv2d:
            return conv2d_forward(layer, input);
    }
    throw std::invalid_argument("layer_forward: unknown kind");
}

Tensor layer_backward(Layer& layer, const Tensor& input, const Tensor& upstream_grad) {
    const auto expected = layer_output_shape(layer.spec, input.shape());
    if (upstream_grad.shape() != expected) {
        throw std::invalid_argument("layer_backward: upstream grad shape " +
                                    shape_to_string(upstream_grad.shape()) + " does not match " +
                                    shape_to_string(expected));
    }
    switch (layer.spec.kind) {
        case LayerKind::linear:
            return linear_backward(layer, input, upstream_grad);
        case LayerKind::relu: {
            Tensor din(input.shape());
            for (std::size_t i = 0; i < input.size(); ++i) {
                // subgradient at 0 is 0
                din[i] = input[i] > 0.0 ? upstream_grad[i] : 0.0;
            }
            return din;
        }
        case LayerKind::conv2d:
            return conv2d_backward(layer, input, upstream_grad);
    }
    throw std::invalid_argument("layer_backward: unknown kind");
}

} // namespace mixdcnn
