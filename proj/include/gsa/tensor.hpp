#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsa {

using Shape = std::vector<std::size_t>;

/// Raised when operand extents are inconsistent with an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for malformed arguments that are not shape problems (empty axis
/// sets, unsupported contraction specs, bad configs).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Storage precision tag. Arithmetic is always carried out in double; the
/// tag controls how a tensor is serialized.
enum class Dtype : std::uint8_t { f64 = 0, f32 = 1 };

std::string shape_to_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/**
 * Dense row-major N-dimensional array of doubles.
 *
 * A rank-0 tensor is a scalar holding one element. Every extent is at least
 * one, so `size() == product(shape)` always holds and is never zero.
 */
class Tensor {
public:
    Tensor() : data_(1, 0.0) {}
    explicit Tensor(Shape shape, double fill = 0.0, Dtype dtype = Dtype::f64);
    Tensor(Shape shape, std::vector<double> data, Dtype dtype = Dtype::f64);

    static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t extent(std::size_t axis) const;
    Dtype dtype() const noexcept { return dtype_; }
    std::vector<std::size_t> strides() const;

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    /// Same data viewed with a new shape of equal volume.
    Tensor reshaped(Shape shape) const;
    Tensor with_dtype(Dtype dtype) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::size_t flat_index(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<double> data_;
    Dtype dtype_ = Dtype::f64;
};

}  // namespace gsa
