#include "loyalty/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "loyalty/errors.hpp"

namespace loyalty::nn {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw InvalidInput("tensor shape must have at least one dimension");
    for (auto d : shape) {
        if (d == 0) throw InvalidInput("tensor dimensions must be positive");
    }
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (element_count(shape_) != values_.size()) {
        throw InvalidInput("tensor of shape " + shape_string() + " cannot hold " +
                           std::to_string(values_.size()) + " values");
    }
}

double Tensor::item() const {
    if (values_.size() != 1) throw InvalidInput("item() on tensor of shape " + shape_string());
    return values_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

}  // namespace loyalty::nn
