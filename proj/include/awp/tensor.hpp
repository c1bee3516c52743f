#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace awp {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float32 array. Storage is shared between a tensor and
/// its reshaped views; the shape of a given value never changes.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }
    static Tensor from(Shape shape, std::initializer_list<float> values);

    const Shape& shape() const noexcept { return shape_; }
    int64_t dim(size_t i) const { return shape_.at(i); }
    size_t rank() const noexcept { return shape_.size(); }
    int64_t numel() const noexcept { return static_cast<int64_t>(data_->size()); }

    std::span<float> data() noexcept { return *data_; }
    std::span<const float> data() const noexcept { return *data_; }
    float* ptr() noexcept { return data_->data(); }
    const float* ptr() const noexcept { return data_->data(); }

    float& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

    /// Scalar value of a one-element tensor.
    float item() const;

    /// New tensor sharing storage with this one.
    Tensor reshape(Shape shape) const;
    /// Deep copy with independent storage.
    Tensor clone() const;

    bool shares_storage_with(const Tensor& other) const noexcept { return data_ == other.data_; }

    /// Same shape and bit-identical values.
    bool bit_equal(const Tensor& other) const;

private:
    Shape shape_;
    std::shared_ptr<std::vector<float>> data_;
};

}  // namespace awp
