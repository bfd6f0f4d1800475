#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "loyalty/nn/tensor.hpp"

namespace loyalty::nn {

inline constexpr int kInt8Max = 127;

/// Symmetric per-tensor scale max|v|/127. An all-zero tensor gets scale 1.
double symmetric_scale(std::span<const double> values);

/// round(v / scale) with halves rounded away from zero, clamped to [-127, 127].
std::int8_t quantize_value(double v, double scale);

/// Weight matrix of a linear layer stored as int8 with one scale.
struct QuantizedLinear {
    std::vector<std::int8_t> weights;  // row-major [rows x cols]
    double scale = 1.0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool quantize_activations = true;
    /// Largest |activation| seen on the calibration batch (diagnostic only;
    /// activation scales are computed dynamically per forward call).
    double calibrated_absmax = 0.0;

    /// The integer weights widened to float32 for the GEMM kernel. Products
    /// and sums of int8 values stay exact in float32 while |sum| < 2^24.
    std::vector<float> widened;

    Tensor dequantize() const;
    void widen();

    friend bool operator==(const QuantizedLinear& a, const QuantizedLinear& b) {
        return a.weights == b.weights && a.scale == b.scale && a.rows == b.rows &&
               a.cols == b.cols && a.quantize_activations == b.quantize_activations &&
               a.calibrated_absmax == b.calibrated_absmax;
    }
};

QuantizedLinear quantize_weights(const Tensor& w);

/// Quantize-dequantize of a whole tensor with its own symmetric scale.
Tensor fake_quantize_values(const Tensor& x);

/// y = x * W + bias where x is quantized per call with a symmetric per-tensor
/// scale (when enabled), the product accumulates in int32 and is rescaled.
Tensor int8_linear(const Tensor& x, const QuantizedLinear& w, std::span<const double> bias);

}  // namespace loyalty::nn
