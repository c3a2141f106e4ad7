#ifndef MIXDCNN_NETWORK_HPP
#define MIXDCNN_NETWORK_HPP

#include <cstdint>
#include <vector>

#include "mixdcnn/layers.hpp"
#include "mixdcnn/tensor.hpp"

namespace mixdcnn {

/// Activations recorded by forward_trace: activations[0] is the input,
/// activations[i+1] the output of layer i.
struct ForwardTrace {
    std::vector<Tensor> activations;
    const Tensor& output() const { return activations.back(); }
};

/// A feed-forward stack of layers ending in a length-N logit vector.
/// Copies are deep (value semantics); forward passes are const and pure.
class Network {
public:
    Network() = default;
    Network(std::vector<std::size_t> input_shape, std::vector<Layer> layers);

    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    std::size_t output_dim() const { return output_dim_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Tensor forward(const Tensor& input) const;
    ForwardTrace forward_trace(const Tensor& input) const;

    /// Forward through layers [0, upto_layer]; the result of layer `upto_layer`.
    Tensor forward_partial(const Tensor& input, std::size_t upto_layer) const;

    /// Backpropagates d loss / d logits, accumulating parameter gradients.
    /// Returns d loss / d input.
    Tensor backward(const ForwardTrace& trace, const Tensor& output_grad);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    void zero_grads();
    void scale_grads(double factor);

private:
    std::vector<std::size_t> input_shape_;
    std::vector<Layer> layers_;
    std::size_t output_dim_ = 0;
};

/// Validates that consecutive layer shapes compose onto `input_shape`, ends
/// in a rank-1 output, and initializes all parameters from `seed`.
Network build_network(const std::vector<std::size_t>& input_shape,
                      const std::vector<LayerSpec>& specs, std::uint64_t seed);

/// linear/relu stack: input_dim -> hidden_dims... -> num_classes.
Network build_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                  std::size_t num_classes, std::uint64_t seed);

std::vector<LayerSpec> network_layer_specs(const Network& net);

} // namespace mixdcnn

#endif
