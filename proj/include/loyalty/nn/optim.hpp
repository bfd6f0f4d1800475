#pragma once

#include <cstddef>
#include <vector>

#include "loyalty/nn/tape.hpp"

namespace loyalty::nn {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW)
    double clip_norm = 1.0;     // global gradient norm clip; <= 0 disables
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamOptions options = {});

    /// One update with learning rate `lr` using the gradients of the managed
    /// parameters (missing entries count as zero).
    void step(const Gradients& grads, double lr);

    std::size_t steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamOptions options_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::size_t t_ = 0;
};

/// Linear warm-up to `peak` over `warmup` steps, then linear decay to zero at `total`.
double warmup_linear_lr(double peak, std::size_t step, std::size_t warmup, std::size_t total);

}  // namespace loyalty::nn
