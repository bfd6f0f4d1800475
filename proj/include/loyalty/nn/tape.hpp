#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "loyalty/nn/tensor.hpp"

namespace loyalty::nn {

/// A named trainable tensor owned by a model.
struct Parameter {
    std::string name;
    Tensor value;
};

/// Gradient accumulators keyed by parameter identity.
class Gradients {
public:
    /// Accumulator for `p`, created as zeros on first access.
    Tensor& at(const Parameter& p);
    /// Copy of the gradient for `p`; zeros when nothing flowed into it.
    Tensor get(const Parameter& p) const;
    const Tensor* find(const Parameter& p) const;
    bool contains(const Parameter& p) const { return grads_.contains(&p); }
    std::size_t size() const { return grads_.size(); }

    void clear() { grads_.clear(); }
    void zero();
    void scale(double factor);

private:
    std::unordered_map<const Parameter*, Tensor> grads_;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode tape. Records primitive operations in execution order and
/// replays them backward. One tape per forward pass and per thread.
class Tape {
public:
    enum class Mode { record, inference };

    /// Receives the gradient of the node's output and accumulates into its inputs.
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return mode_ == Mode::record; }
    std::size_t size() const { return nodes_.size(); }

    /// Tracked leaf referencing the parameter's storage (no copy). In inference
    /// mode it is recorded as a constant.
    Var param(const Parameter& p);
    /// Untracked leaf that owns its value.
    Var constant(Tensor value);
    /// Untracked leaf borrowing `value`; the caller keeps it alive.
    Var constant_ref(const Tensor& value);

    const Tensor& value(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Records a computed node. `backward` is dropped unless recording and at
    /// least one input requires a gradient.
    Var push(Tensor value, bool requires_grad, BackwardFn backward);

    /// Gradient slot of node `id`, zero-initialized on first access.
    Tensor& grad(std::size_t id);

    /// Replays the tape from `loss` (a 1x1 node on this tape) and accumulates
    /// parameter gradients into `into`. Every tracked parameter on the tape gets
    /// an entry, zero if the loss does not depend on it.
    void backward(Var loss, Gradients& into);

private:
    struct Node {
        Tensor owned;
        const Tensor* borrowed = nullptr;
        const Parameter* param = nullptr;
        bool requires_grad = false;
        bool has_grad = false;
        Tensor grad;
        BackwardFn backward;
    };

    Mode mode_;
    std::deque<Node> nodes_;
};

/// Convenience wrapper returning fresh gradients.
Gradients backward(Tape& tape, Var loss);

}  // namespace loyalty::nn
