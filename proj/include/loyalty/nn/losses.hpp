#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loyalty::nn {

/// Categorical distribution over class labels: entries in [0, 1] summing to 1
/// within 1e-9. Construction validates.
class ProbVector {
public:
    static constexpr double kSumTolerance = 1e-9;

    ProbVector() = default;
    explicit ProbVector(std::vector<double> probs);

    std::span<const double> probs() const { return probs_; }
    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    /// Index of the largest entry; the lowest index wins ties.
    std::size_t argmax() const;

    friend bool operator==(const ProbVector&, const ProbVector&) = default;

private:
    std::vector<double> probs_;
};

/// exp(z_i/T) / sum_j exp(z_j/T), evaluated with max subtraction.
ProbVector softmax(std::span<const double> logits, double temperature = 1.0);

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// -log softmax(logits)[target]; gradient is softmax - onehot(target).
LossAndGrad cross_entropy(std::span<const double> logits, std::size_t target);

/// T^2 * KL(softmax(teacher/T) || softmax(student/T)) in nats. The gradient is
/// with respect to the student logits only; the teacher side is a constant.
LossAndGrad kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
                    double temperature);

}  // namespace loyalty::nn
