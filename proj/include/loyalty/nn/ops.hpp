#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loyalty/nn/tape.hpp"

namespace loyalty::nn {

// Primitive differentiable operations. Every op checks shapes and throws
// InvalidInput on mismatch; outputs live on the inputs' tape.

/// [m x k] * [k x n]
Var matmul(Var a, Var b);
/// a * b^T for a [m x k], b [n x k].
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a [1 x n] row to every row of an [m x n] matrix.
Var add_row(Var a, Var row);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Multiplies every entry of `a` by the 1x1 value `s` (e.g. a head gate).
Var scale_by(Var a, Var s);
Var sum(Var a);
/// Exact (erf) GELU.
Var gelu(Var a);
/// Row-wise layer normalization with [1 x n] gain and bias.
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
/// Row-wise softmax.
Var softmax_rows(Var a);
/// Gathers rows of `table` ([V x d]) in the order of `ids`.
Var embedding(Var table, std::span<const std::size_t> ids);
/// Row `r` of `a` as a [1 x n] matrix.
Var row(Var a, std::size_t r);
/// Symmetric per-tensor int8 quantize-dequantize with a straight-through
/// gradient (identity backward, no clipping).
Var fake_quantize(Var a);

// Fused losses producing 1x1 outputs.

Var cross_entropy(Var logits, std::size_t target);
/// Distillation loss against constant teacher logits; see nn::kd_loss.
Var kd_loss(Var student_logits, std::span<const double> teacher_logits, double temperature);
/// Mean over entries of (a/|a| - target)^2 where `target` is a constant unit vector.
Var normalized_mse(Var a, std::span<const double> target_unit);

}  // namespace loyalty::nn
