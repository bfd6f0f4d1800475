#include "loyalty/nn/int8.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "loyalty/errors.hpp"

namespace loyalty::nn {

namespace {
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Same result as quantize_value(v, scale) for |v| <= 127 * scale, written so
// the compiler can vectorize it.
inline float quantize_in_range(double v, double scale) {
    const double t = v / scale;
    double r = std::trunc(t);
    const double frac = t - r;
    r += frac >= 0.5 ? 1.0 : (frac <= -0.5 ? -1.0 : 0.0);
    return static_cast<float>(std::clamp(r, -double(kInt8Max), double(kInt8Max)));
}
}  // namespace

double symmetric_scale(std::span<const double> values) {
    if (values.empty()) return 1.0;
    const double absmax =
        Eigen::Map<const Eigen::ArrayXd>(values.data(), static_cast<Eigen::Index>(values.size()))
            .abs()
            .maxCoeff();
    return absmax > 0.0 ? absmax / kInt8Max : 1.0;
}

std::int8_t quantize_value(double v, double scale) {
    const double q = std::round(v / scale);  // std::round rounds halves away from zero
    return static_cast<std::int8_t>(std::clamp(q, -double(kInt8Max), double(kInt8Max)));
}

Tensor QuantizedLinear::dequantize() const {
    Tensor out = Tensor::matrix(rows, cols);
    for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] * scale;
    return out;
}

void QuantizedLinear::widen() {
    widened.assign(weights.begin(), weights.end());
}

QuantizedLinear quantize_weights(const Tensor& w) {
    QuantizedLinear q;
    q.rows = w.rows();
    q.cols = w.cols();
    q.scale = symmetric_scale(w.values());
    q.weights.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) q.weights[i] = quantize_value(w[i], q.scale);
    q.widen();
    return q;
}

Tensor fake_quantize_values(const Tensor& x) {
    const double s = symmetric_scale(x.values());
    Tensor out = x;
    for (double& v : out.values()) v = quantize_value(v, s) * s;
    return out;
}

Tensor int8_linear(const Tensor& x, const QuantizedLinear& w, std::span<const double> bias) {
    if (x.cols() != w.rows) {
        throw InvalidInput("int8_linear: input " + x.shape_string() + " does not match weight rows " +
                           std::to_string(w.rows));
    }
    if (!bias.empty() && bias.size() != w.cols) throw InvalidInput("int8_linear: bias size mismatch");
    const std::size_t m = x.rows(), k = w.rows, n = w.cols;
    Tensor out = Tensor::matrix(m, n);

    if (!w.quantize_activations) {
        const Tensor wf = w.dequantize();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double a = x(i, p);
                for (std::size_t j = 0; j < n; ++j) out(i, j) += a * wf(p, j);
            }
        }
    } else {
        const double xs = symmetric_scale(x.values());
        const double rescale = xs * w.scale;
        constexpr std::size_t kExactFloatDepth = (1u << 24) / (kInt8Max * kInt8Max);
        if (w.widened.size() == w.weights.size() && k < kExactFloatDepth) {
            thread_local FloatMatrix xq, acc;
            xq.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
            const double* xv = x.data();
            float* xqv = xq.data();
            for (std::size_t i = 0; i < m * k; ++i) xqv[i] = quantize_in_range(xv[i], xs);
            const Eigen::Map<const FloatMatrix> wq(w.widened.data(), static_cast<Eigen::Index>(k),
                                                   static_cast<Eigen::Index>(n));
            acc.noalias() = xq * wq;
            for (std::size_t i = 0; i < m * n; ++i) out[i] = acc.data()[i] * rescale;
        } else {
            std::vector<std::int32_t> xq(m * k);
            for (std::size_t i = 0; i < m * k; ++i) xq[i] = quantize_value(x[i], xs);
            std::vector<std::int32_t> acc(n);
            for (std::size_t i = 0; i < m; ++i) {
                std::fill(acc.begin(), acc.end(), 0);
                for (std::size_t p = 0; p < k; ++p) {
                    const std::int32_t a = xq[i * k + p];
                    const std::int8_t* wrow = w.weights.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) acc[j] += a * wrow[j];
                }
                for (std::size_t j = 0; j < n; ++j) out(i, j) = acc[j] * rescale;
            }
        }
    }
    if (!bias.empty()) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) out(i, j) += bias[j];
        }
    }
    return out;
}

}  // namespace loyalty::nn
