#pragma once

#include <string>
#include <utility>
#include <vector>

#include "awp/tensor.hpp"

namespace awp {

/// Named parameter tensors in canonical (model declaration) order.
class ParameterSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    ParameterSet() = default;

    /// Throws ValidationError on a duplicate name.
    void add(std::string name, Tensor tensor);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::vector<Entry>& entries() noexcept { return entries_; }
    size_t size() const noexcept { return entries_.size(); }
    int64_t total_count() const noexcept { return total_; }

    const Tensor& at(const std::string& name) const;

    /// Independent storage for every tensor.
    ParameterSet clone() const;

    /// Same names, shapes and bit-identical values.
    bool bit_equal(const ParameterSet& other) const;

private:
    std::vector<Entry> entries_;
    int64_t total_ = 0;
};

/// Concatenation of every entry in canonical order.
Tensor flatten_params(const ParameterSet& params);

/// Inverse of flatten_params against a template with the same layout.
ParameterSet unflatten_params(const Tensor& vec, const ParameterSet& layout);

}  // namespace awp
