#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpse {

/// Dense row-major T x F grid. Rows are frames, columns are frequency bins.
template <typename Value>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, Value fill = Value{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Grid(std::size_t rows, std::size_t cols, std::vector<Value> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("grid data size does not match shape");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    Value& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const Value& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    Value& operator[](std::size_t i) noexcept { return data_[i]; }
    const Value& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<Value> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const Value> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<Value>& values() noexcept { return data_; }
    const std::vector<Value>& values() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    template <typename Other>
    bool same_shape(const Grid<Other>& o) const noexcept {
        return rows_ == o.rows() && cols_ == o.cols();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Value> data_;
};

using RealGrid = Grid<double>;
using ComplexSpectrum = Grid<std::complex<double>>;
/// |S| per cell; non-negative. Also used for compressed magnitudes.
using MagnitudeSpectrum = Grid<double>;
/// Principal-value angle per cell, radians in (-pi, pi].
using PhaseSpectrum = Grid<double>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
}

}  // namespace mpse
