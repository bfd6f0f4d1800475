#include "loyalty/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace loyalty::nn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step(const Gradients& grads, double lr) {
    ++t_;
    double clip = 1.0;
    if (options_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const Parameter* p : params_) {
            if (const Tensor* g = grads.find(*p)) {
                for (double v : g->values()) sq += v * v;
            }
        }
        const double norm = std::sqrt(sq);
        if (norm > options_.clip_norm) clip = options_.clip_norm / norm;
    }
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        const Tensor* g = grads.find(p);
        auto w = p.value.values();
        auto m = m_[k].values();
        auto v = v_[k].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g ? (*g)[i] * clip : 0.0;
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
            w[i] -= lr * (update + options_.weight_decay * w[i]);
        }
    }
}

double warmup_linear_lr(double peak, std::size_t step, std::size_t warmup, std::size_t total) {
    if (warmup > 0 && step < warmup) {
        return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    if (total <= warmup || step >= total) return warmup > 0 && total <= warmup ? peak : 0.0;
    return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

}  // namespace loyalty::nn
