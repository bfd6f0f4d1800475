#include "loyalty/nn/tape.hpp"

#include "loyalty/errors.hpp"

namespace loyalty::nn {

Tensor& Gradients::at(const Parameter& p) {
    auto it = grads_.find(&p);
    if (it == grads_.end()) it = grads_.emplace(&p, Tensor(p.value.shape())).first;
    return it->second;
}

Tensor Gradients::get(const Parameter& p) const {
    if (const Tensor* g = find(p)) return *g;
    return Tensor(p.value.shape());
}

const Tensor* Gradients::find(const Parameter& p) const {
    auto it = grads_.find(&p);
    return it == grads_.end() ? nullptr : &it->second;
}

void Gradients::zero() {
    for (auto& [_, g] : grads_) g.fill(0.0);
}

void Gradients::scale(double factor) {
    for (auto& [_, g] : grads_) {
        for (double& v : g.values()) v *= factor;
    }
}

const Tensor& Var::value() const {
    if (!tape_) throw InvalidInput("value() on an empty Var");
    return tape_->value(id_);
}

Var Tape::param(const Parameter& p) {
    Node n;
    n.borrowed = &p.value;
    if (recording()) {
        n.param = &p;
        n.requires_grad = true;
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant_ref(const Tensor& value) {
    Node n;
    n.borrowed = &value;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.borrowed ? *n.borrowed : n.owned;
}

Var Tape::push(Tensor value, bool requires_grad, BackwardFn backward) {
    Node n;
    n.owned = std::move(value);
    if (recording() && requires_grad) {
        n.requires_grad = true;
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(value(id).shape());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var loss, Gradients& into) {
    if (loss.tape() != this || loss.id() >= nodes_.size()) {
        throw InvalidInput("backward: loss is not recorded on this tape");
    }
    if (!recording()) throw InvalidInput("backward: tape was created in inference mode");
    if (value(loss.id()).size() != 1) {
        throw InvalidInput("backward: loss must be a scalar, got " +
                           value(loss.id()).shape_string());
    }
    for (Node& n : nodes_) {
        if (n.param) into.at(*n.param);
    }
    if (!nodes_[loss.id()].requires_grad) return;

    grad(loss.id()).fill(1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad) continue;
        if (n.param) {
            Tensor& acc = into.at(*n.param);
            const auto g = n.grad.values();
            auto a = acc.values();
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += g[k];
        } else if (n.backward) {
            n.backward(*this, n.grad);
        }
        // Free the slot; each node's gradient is consumed exactly once.
        n.grad = Tensor();
        n.has_grad = false;
    }
}

Gradients backward(Tape& tape, Var loss) {
    Gradients g;
    tape.backward(loss, g);
    return g;
}

}  // namespace loyalty::nn
