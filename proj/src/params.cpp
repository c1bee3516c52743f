#include "awp/params.hpp"

#include <algorithm>

#include "awp/error.hpp"

namespace awp {

void ParameterSet::add(std::string name, Tensor tensor) {
    for (const auto& e : entries_) {
        if (e.name == name) throw ValidationError("duplicate parameter name '" + name + "'");
    }
    total_ += tensor.numel();
    entries_.push_back(Entry{std::move(name), std::move(tensor)});
}

const Tensor& ParameterSet::at(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ValidationError("no parameter named '" + name + "'");
}

ParameterSet ParameterSet::clone() const {
    ParameterSet out;
    for (const auto& e : entries_) out.add(e.name, e.tensor.clone());
    return out;
}

bool ParameterSet::bit_equal(const ParameterSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name != other.entries_[i].name) return false;
        if (!entries_[i].tensor.bit_equal(other.entries_[i].tensor)) return false;
    }
    return true;
}

Tensor flatten_params(const ParameterSet& params) {
    std::vector<float> flat;
    flat.reserve(static_cast<size_t>(params.total_count()));
    for (const auto& e : params.entries()) flat.insert(flat.end(), e.tensor.data().begin(), e.tensor.data().end());
    if (flat.empty()) throw DimensionError("cannot flatten an empty parameter set");
    const auto n = static_cast<int64_t>(flat.size());
    return Tensor({n}, std::move(flat));
}

ParameterSet unflatten_params(const Tensor& vec, const ParameterSet& layout) {
    if (vec.numel() != layout.total_count()) {
        throw DimensionError("unflatten_params: vector of length " + std::to_string(vec.numel()) +
                             " for a layout with " + std::to_string(layout.total_count()) + " parameters");
    }
    ParameterSet out;
    int64_t offset = 0;
    for (const auto& e : layout.entries()) {
        Tensor t(e.tensor.shape());
        std::copy_n(vec.ptr() + offset, t.numel(), t.ptr());
        offset += t.numel();
        out.add(e.name, std::move(t));
    }
    return out;
}

}  // namespace awp
