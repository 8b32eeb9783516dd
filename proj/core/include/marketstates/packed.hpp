#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "marketstates/error.hpp"

namespace marketstates {

/// Number of stored values for an n x n symmetric matrix (diagonal included).
constexpr std::size_t packed_size(std::size_t n) noexcept { return n * (n + 1) / 2; }

/// Offset of (i, j) in row-major upper-triangle storage.
///
///          j
///      +-------+
///      | 0 1 2 |
///    i |   3 4 |   -> idx = i*n - i*(i-1)/2 + (j - i)   for i <= j
///      |     5 |
///      +-------+
constexpr std::size_t packed_index(std::size_t n, std::size_t i, std::size_t j) noexcept
{
    if (i > j) {
        std::swap(i, j);
    }
    return i * n - i * (i - 1) / 2 + (j - i);
}

/// Symmetric matrix stored as its packed upper triangle.
class PackedSymmetric {
public:
    PackedSymmetric() = default;

    explicit PackedSymmetric(std::size_t dim, double fill = 0.0)
        : dim_(dim), values_(packed_size(dim), fill)
    {
    }

    /// Adopts `packed`, which must hold packed_size(dim) values.
    PackedSymmetric(std::size_t dim, std::vector<double> packed)
        : dim_(dim), values_(std::move(packed))
    {
        if (values_.size() != packed_size(dim)) {
            throw Error(ErrorCode::DimensionMismatch, "packed storage does not match dimension");
        }
    }

    std::size_t dim() const noexcept { return dim_; }

    double operator()(std::size_t i, std::size_t j) const noexcept
    {
        assert(i < dim_ && j < dim_);
        return values_[packed_index(dim_, i, j)];
    }

    double& operator()(std::size_t i, std::size_t j) noexcept
    {
        assert(i < dim_ && j < dim_);
        return values_[packed_index(dim_, i, j)];
    }

    std::span<const double> packed() const noexcept { return values_; }
    std::span<double> packed() noexcept { return values_; }

    friend bool operator==(const PackedSymmetric&, const PackedSymmetric&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

}  // namespace marketstates
