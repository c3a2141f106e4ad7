#include "mixdcnn/network.hpp"

#include <random>
#include <stdexcept>

namespace mixdcnn {

Network::Network(std::vector<std::size_t> input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    std::vector<std::size_t> shape = input_shape_;
    for (const Layer& l : layers_) shape = layer_output_shape(l.spec, shape);
    if (shape.size() != 1) {
        throw std::invalid_argument("Network: final output must be a flat vector, got " +
                                    shape_to_string(shape));
    }
    output_dim_ = shape[0];
}

Tensor Network::forward(const Tensor& input) const {
    if (input.shape() != input_shape_) {
        throw std::invalid_argument("Network::forward: input shape " +
                                    shape_to_string(input.shape()) + " does not match " +
                                    shape_to_string(input_shape_));
    }
    Tensor act = input;
    for (const Layer& l : layers_) act = layer_forward(l, act);
    return act;
}

ForwardTrace Network::forward_trace(const Tensor& input) const {
    if (input.shape() != input_shape_) {
        throw std::invalid_argument("Network::forward_trace: input shape " +
                                    shape_to_string(input.shape()) + " does not match " +
                                    shape_to_string(input_shape_));
    }
    ForwardTrace trace;
    trace.activations.reserve(layers_.size() + 1);
    trace.activations.push_back(input);
    for (const Layer& l : layers_) {
        trace.activations.push_back(layer_forward(l, trace.activations.back()));
    }
    return trace;
}

Tensor Network::forward_partial(const Tensor& input, std::size_t upto_layer) const {
    if (upto_layer >= layers_.size()) {
        throw std::invalid_argument("Network::forward_partial: layer index " +
                                    std::to_string(upto_layer) + " out of range");
    }
    Tensor act = input;
    for (std::size_t i = 0; i <= upto_layer; ++i) act = layer_forward(layers_[i], act);
    return act;
}

Tensor Network::backward(const ForwardTrace& trace, const Tensor& output_grad) {
    if (trace.activations.size() != layers_.size() + 1) {
        throw std::invalid_argument("Network::backward: trace does not match network depth");
    }
    Tensor grad = output_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        grad = layer_backward(layers_[i], trace.activations[i], grad);
    }
    return grad;
}

std::vector<Parameter*> Network::parameters() {
    std::vector<Parameter*> out;
    for (Layer& l : layers_)
        for (Parameter& p : l.params) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> Network::parameters() const {
    std::vector<const Parameter*> out;
    for (const Layer& l : layers_)
        for (const Parameter& p : l.params) out.push_back(&p);
    return out;
}

void Network::zero_grads() {
    for (Layer& l : layers_)
        for (Parameter& p : l.params) p.zero_grad();
}

void Network::scale_grads(double factor) {
    for (Layer& l : layers_)
        for (Parameter& p : l.params)
            for (double& g : p.grad.values()) g *= factor;
}

Network build_network(const std::vector<std::size_t>& input_shape,
                      const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    if (specs.empty()) throw std::invalid_argument("build_network: no layers");
    std::mt19937_64 seeder(seed);
    std::vector<Layer> layers;
    layers.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        layers.push_back(make_layer(specs[i], "layer" + std::to_string(i), seeder()));
    }
    return Network(input_shape, std::move(layers));
}

Network build_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                  std::size_t num_classes, std::uint64_t seed) {
    std::vector<LayerSpec> specs;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden_dims) {
        specs.push_back(LayerSpec::linear(prev, h));
        specs.push_back(LayerSpec::relu());
        prev = h;
    }
    specs.push_back(LayerSpec::linear(prev, num_classes));
    return build_network({input_dim}, specs, seed);
}

std::vector<LayerSpec> network_layer_specs(const Network& net) {
    std::vector<LayerSpec> specs;
    specs.reserve(net.layers().size());
    for (const Layer& l : net.layers()) specs.push_back(l.spec);
    return specs;
}

} // namespace mixdcnn
