#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fen/core/error.hpp"

namespace fen {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles. Value type; copies are deep.
///
/// Most of the library works on rank-2 tensors (a list of n instruments by
/// k features); scalars are represented as 1x1.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
        check_shape();
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape();
        if (shape_size(shape_) != data_.size()) {
            throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
        }
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        std::vector<double> data;
        std::size_t r = 0, c = 0;
        for (const auto& row : rows) {
            if (r == 0) c = row.size();
            if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
            data.insert(data.end(), row.begin(), row.end());
            ++r;
        }
        return Tensor({r, c}, std::move(data));
    }

    static Tensor column(std::span<const double> v) {
        return Tensor({v.size(), 1}, std::vector<double>(v.begin(), v.end()));
    }

    static Tensor row(std::span<const double> v) {
        return Tensor({1, v.size()}, std::vector<double>(v.begin(), v.end()));
    }

    static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const {
        require_rank2("rows()");
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank2("cols()");
        return shape_[1];
    }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    std::span<const double> row_span(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols(), cols());
    }

    double item() const {
        if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
        return data_[0];
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    // Bitwise-equal shapes and values.
    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_shape() const {
        for (auto d : shape_) {
            if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
        }
    }
    void require_rank2(const char* what) const {
        if (shape_.size() != 2) {
            throw ShapeError(std::string(what) + " requires a rank-2 tensor, got " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("max_abs_diff shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace fen
