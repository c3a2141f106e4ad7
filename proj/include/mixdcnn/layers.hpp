#ifndef MIXDCNN_LAYERS_HPP
#define MIXDCNN_LAYERS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mixdcnn/tensor.hpp"

namespace mixdcnn {

enum class LayerKind { linear, relu, conv2d };

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

/// Structural description of one layer. Only the fields for the given kind
/// are meaningful; all sizes are strictly positive where used.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    // linear
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    // conv2d: valid (no padding) convolution; stride provides the downsampling
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;

    static LayerSpec linear(std::size_t in, std::size_t out);
    static LayerSpec relu();
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride = 1);

    bool operator==(const LayerSpec&) const = default;
};

/// Output shape of a layer applied to `input_shape`; throws invalid_argument
/// when the shapes do not compose (wrong rank, kernel larger than the input
/// spatial extent, feature-count mismatch).
std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& input_shape);

struct Layer {
    LayerSpec spec;
    std::vector<Parameter> params;   // linear: weight, bias; conv2d: weight, bias; relu: none
};

/// Builds a layer with freshly initialized parameters. Weights are uniform in
/// +-sqrt(6/(fan_in+fan_out)) drawn from `rng`; biases start at zero. Names
/// follow "<prefix>.weight" / "<prefix>.bias".
Layer make_layer(const LayerSpec& spec, const std::string& name_prefix, std::uint64_t seed);

Tensor layer_forward(const Layer& layer, const Tensor& input);

/// Transpose-Jacobian product of layer_forward at `input`: accumulates the
/// parameter gradients into layer.params[*].grad and returns d loss / d input.
/// relu routes zero gradient at exactly-zero pre-activations.
Tensor layer_backward(Layer& layer, const Tensor& input, const Tensor& upstream_grad);

} // namespace mixdcnn

#endif
