#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "awp/tensor.hpp"

namespace awp {

/// Handle to a value recorded on a GradTape.
struct Var {
    int32_t id = -1;
    bool valid() const noexcept { return id >= 0; }
};

class GradTape;

/// Propagates the output gradient of one node into its inputs' gradients.
using BackwardFn = std::function<void(GradTape& tape, const Tensor& grad_out)>;

/// Linear record of primitive operations. Nodes are appended in evaluation
/// order, so walking the record backwards is a reverse topological order.
class GradTape {
public:
    /// Trainable input. After backward() it always owns a gradient of its shape.
    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& value(Var v) const { return node(v).value; }
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    size_t size() const noexcept { return nodes_.size(); }

    /// Runs reverse-mode accumulation from a scalar `loss`, seeding d loss = 1.
    /// Any gradients from a previous call are discarded first.
    void backward(Var loss);

    /// Gradient of `v` from the last backward(). Leaves that requested gradients
    /// always have one; other nodes throw if no gradient reached them.
    const Tensor& grad(Var v) const;

    /// Used by op implementations.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);
    /// Zero-initialized on first access.
    Tensor& grad_buffer(Var v);

private:
    struct Node {
        Tensor value;
        std::optional<Tensor> grad;
        bool requires_grad = false;
        bool is_leaf = false;
        BackwardFn backward;
    };

    const Node& node(Var v) const;
    Node& node(Var v);

    std::vector<Node> nodes_;
};

}  // namespace awp
