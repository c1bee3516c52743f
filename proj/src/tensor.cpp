#include "awp/tensor.hpp"

#include <cstring>
#include <sstream>

#include "awp/error.hpp"

namespace awp {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (auto d : shape) {
        if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor() : Tensor(Shape{}, 0.0f) {}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<float>>(static_cast<size_t>(shape_numel(shape_)), fill)) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<float>>(std::move(values))) {
    if (static_cast<int64_t>(data_->size()) != shape_numel(shape_)) {
        throw DimensionError("tensor of shape " + shape_str(shape_) + " given " +
                             std::to_string(data_->size()) + " values");
    }
}

Tensor Tensor::from(Shape shape, std::initializer_list<float> values) {
    return Tensor(std::move(shape), std::vector<float>(values));
}

float Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
    return (*data_)[0];
}

Tensor Tensor::reshape(Shape shape) const {
    if (shape_numel(shape) != numel()) {
        throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

Tensor Tensor::clone() const { return Tensor(shape_, *data_); }

bool Tensor::bit_equal(const Tensor& other) const {
    if (shape_ != other.shape_) return false;
    return std::memcmp(data_->data(), other.data_->data(), data_->size() * sizeof(float)) == 0;
}

}  // namespace awp
