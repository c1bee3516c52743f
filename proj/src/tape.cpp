#include "awp/tape.hpp"

#include <string>

#include "awp/error.hpp"

namespace awp {

Var GradTape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = true;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var GradTape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var GradTape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (Var in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
    // Inference-only graphs keep no closures (and no references to inputs).
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

const GradTape::Node& GradTape::node(Var v) const {
    if (v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
        throw ValidationError("invalid tape variable " + std::to_string(v.id));
    }
    return nodes_[static_cast<size_t>(v.id)];
}

GradTape::Node& GradTape::node(Var v) {
    return const_cast<Node&>(static_cast<const GradTape&>(*this).node(v));
}

Tensor& GradTape::grad_buffer(Var v) {
    Node& n = node(v);
    if (!n.grad) n.grad = Tensor::zeros(n.value.shape());
    return *n.grad;
}

void GradTape::backward(Var loss) {
    if (node(loss).value.numel() != 1) {
        throw DimensionError("backward() needs a scalar loss, got " + shape_str(node(loss).value.shape()));
    }
    for (auto& n : nodes_) n.grad.reset();
    grad_buffer(loss)[0] = 1.0f;
    for (int64_t i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.grad || !n.backward) continue;
        // Copy the handle: the callback may allocate grads for other nodes.
        const Tensor g = *n.grad;
        n.backward(*this, g);
    }
    for (auto& n : nodes_) {
        if (n.is_leaf && n.requires_grad && !n.grad) n.grad = Tensor::zeros(n.value.shape());
    }
}

const Tensor& GradTape::grad(Var v) const {
    const Node& n = node(v);
    if (!n.grad) throw ValidationError("no gradient recorded for variable " + std::to_string(v.id));
    return *n.grad;
}

}  // namespace awp
