#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cobot {

struct Shape {
    int n1 = 0;
    int n2 = 0;
    int n3 = 1;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(n1) * n2 * n3;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const {
        return "(" + std::to_string(n1) + "," + std::to_string(n2) + "," + std::to_string(n3) + ")";
    }
};

// Dense rank-<=3 real tensor. Layout: frontal slices contiguous, column-major
// within a slice, i.e. (i,j,k) lives at k*n1*n2 + j*n1 + i. Matrices use n3 == 1.
class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(Shape shape, double fill = 0.0)
        : shape_(shape), data_(static_cast<std::size_t>(shape.numel()), fill) {
        if (shape.n1 < 0 || shape.n2 < 0 || shape.n3 < 0)
            throw std::invalid_argument("DenseTensor: negative dimension " + shape.str());
    }

    DenseTensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != shape.numel())
            throw std::invalid_argument("DenseTensor: data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape.str());
    }

    static DenseTensor matrix(int rows, int cols) { return DenseTensor({rows, cols, 1}); }

    static DenseTensor identity(int n) {
        DenseTensor t({n, n, 1});
        for (int i = 0; i < n; ++i) t.at(i, i, 0) = 1.0;
        return t;
    }

    static DenseTensor scalar(double v) {
        DenseTensor t({1, 1, 1});
        t.data_[0] = v;
        return t;
    }

    const Shape& shape() const { return shape_; }
    int n1() const { return shape_.n1; }
    int n2() const { return shape_.n2; }
    int n3() const { return shape_.n3; }
    std::int64_t numel() const { return shape_.numel(); }

    double& at(int i, int j, int k = 0) {
        return data_[static_cast<std::size_t>(k) * shape_.n1 * shape_.n2 +
                     static_cast<std::size_t>(j) * shape_.n1 + i];
    }
    double at(int i, int j, int k = 0) const {
        return data_[static_cast<std::size_t>(k) * shape_.n1 * shape_.n2 +
                     static_cast<std::size_t>(j) * shape_.n1 + i];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* slice(int k) { return data_.data() + static_cast<std::size_t>(k) * shape_.n1 * shape_.n2; }
    const double* slice(int k) const {
        return data_.data() + static_cast<std::size_t>(k) * shape_.n1 * shape_.n2;
    }
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    bool is_scalar() const { return shape_ == Shape{1, 1, 1}; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // reinterpretation of the same linear buffer; numel must match
    DenseTensor reshaped(Shape s) const {
        if (s.numel() != numel())
            throw std::invalid_argument("reshape: numel mismatch " + shape_.str() + " -> " + s.str());
        return DenseTensor(s, data_);
    }

    bool operator==(const DenseTensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    Shape shape_{0, 0, 0};
    std::vector<double> data_;
};

inline double max_abs(const DenseTensor& t) {
    double m = 0.0;
    for (double v : t.flat()) m = std::max(m, std::abs(v));
    return m;
}

inline double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("max_abs_diff: shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
    double m = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
    return m;
}

} // namespace cobot
