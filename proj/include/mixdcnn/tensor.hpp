#ifndef MIXDCNN_TENSOR_HPP
#define MIXDCNN_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace mixdcnn {

/// Dense row-major tensor of doubles. Shape entries are strictly positive;
/// product(shape) == data.size() always holds for tensors built through this API.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor vector(std::vector<double> values);
    static Tensor zeros_like(const Tensor& other);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(double v);

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

/// A learnable tensor paired with its gradient accumulator. The name is
/// unique within one network and is the identifier used in checkpoints
/// and divergence diagnostics.
struct Parameter {
    Tensor value;
    Tensor grad;
    std::string name;

    Parameter() = default;
    Parameter(Tensor v, std::string n)
        : value(std::move(v)), grad(Tensor::zeros_like(value)), name(std::move(n)) {}

    void zero_grad() { grad.fill(0.0); }
};

} // namespace mixdcnn

#endif
