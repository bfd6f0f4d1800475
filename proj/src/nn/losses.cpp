#include "loyalty/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loyalty/errors.hpp"

namespace loyalty::nn {

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvalidInput("probability vector must not be empty");
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw InvalidInput("probability entry " + std::to_string(p) + " outside [0, 1]");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
        throw InvalidInput("probabilities sum to " + std::to_string(total) + ", expected 1");
    }
}

std::size_t ProbVector::argmax() const {
    return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) -
                                    probs_.begin());
}

namespace {

void check_logits(std::span<const double> logits) {
    if (logits.empty()) throw InvalidInput("logits must not be empty");
    for (double z : logits) {
        if (!std::isfinite(z)) throw InvalidInput("logits must be finite");
    }
}

std::vector<double> softmax_raw(std::span<const double> logits, double temperature) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - mx) / temperature);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

}  // namespace

ProbVector softmax(std::span<const double> logits, double temperature) {
    check_logits(logits);
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw InvalidInput("softmax temperature must be positive");
    }
    return ProbVector(softmax_raw(logits, temperature));
}

LossAndGrad cross_entropy(std::span<const double> logits, std::size_t target) {
    check_logits(logits);
    if (target >= logits.size()) {
        throw InvalidInput("cross_entropy: target " + std::to_string(target) + " out of range for " +
                           std::to_string(logits.size()) + " classes");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double log_z = mx + std::log(z);

    LossAndGrad out;
    out.loss = log_z - logits[target];
    out.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
    out.grad[target] -= 1.0;
    return out;
}

LossAndGrad kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
                    double temperature) {
    if (teacher_logits.size() != student_logits.size()) {
        throw InvalidInput("kd_loss: teacher has " + std::to_string(teacher_logits.size()) +
                           " logits, student has " + std::to_string(student_logits.size()));
    }
    check_logits(teacher_logits);
    check_logits(student_logits);
    if (!(temperature > 0.0)) throw InvalidInput("kd_loss temperature must be positive");

    const std::size_t n = student_logits.size();
    // Work in log space so the loss stays exact for saturated distributions.
    auto log_softmax = [&](std::span<const double> z) {
        const double mx = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp((v - mx) / temperature);
        const double lse = std::log(s);
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = (z[i] - mx) / temperature - lse;
        return out;
    };
    const auto log_p = log_softmax(teacher_logits);
    const auto log_q = log_softmax(student_logits);

    LossAndGrad out;
    out.grad.resize(n);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::exp(log_p[i]);
        if (p > 0.0) kl += p * (log_p[i] - log_q[i]);
        out.grad[i] = temperature * (std::exp(log_q[i]) - p);
    }
    out.loss = temperature * temperature * std::max(kl, 0.0);
    return out;
}

}  // namespace loyalty::nn
