#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "shapley/errors.hpp"

namespace shapley {

// Maximum number of input variables for power-set enumeration.
inline constexpr int kMaxSubsetDim = 25;

// Subset of the variable indices [0, p), stored as a bitmask. Bit i is set
// iff variable i belongs to the subset.
class SubsetMask {
public:
    SubsetMask(std::uint32_t bits, int dim) : bits_(bits), dim_(dim) {
        if (dim < 1 || dim > kMaxSubsetDim)
            throw DimensionTooLarge("SubsetMask: dimension must be in [1, 25], got " +
                                    std::to_string(dim));
        if (bits >> dim)
            throw Error("SubsetMask: bits set outside [0, p)");
    }

    static SubsetMask empty(int dim) { return SubsetMask(0, dim); }
    static SubsetMask full(int dim) {
        return SubsetMask((std::uint32_t{1} << dim) - 1, dim);
    }

    [[nodiscard]] std::uint32_t bits() const { return bits_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int count() const { return std::popcount(bits_); }
    [[nodiscard]] bool is_empty() const { return bits_ == 0; }
    [[nodiscard]] bool is_full() const { return count() == dim_; }
    [[nodiscard]] bool contains(int i) const { return (bits_ >> i) & 1u; }

    [[nodiscard]] SubsetMask with(int i) const {
        return SubsetMask(bits_ | (std::uint32_t{1} << i), dim_);
    }
    [[nodiscard]] SubsetMask without(int i) const {
        return SubsetMask(bits_ & ~(std::uint32_t{1} << i), dim_);
    }
    [[nodiscard]] SubsetMask complement() const {
        return SubsetMask(~bits_ & ((std::uint32_t{1} << dim_) - 1), dim_);
    }

    // Member indices in increasing order.
    [[nodiscard]] std::vector<int> indices() const {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(count()));
        for (int i = 0; i < dim_; ++i)
            if (contains(i)) out.push_back(i);
        return out;
    }

    friend bool operator==(const SubsetMask& a, const SubsetMask& b) {
        return a.bits_ == b.bits_ && a.dim_ == b.dim_;
    }

private:
    std::uint32_t bits_;
    int dim_;
};

// Binomial coefficients C(n, k) for n <= 25, exact in 64-bit integers.
inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    // Pascal's rule; values fit easily (C(25,12) ~ 5.2e6).
    std::vector<std::uint64_t> row(static_cast<std::size_t>(n) + 1, 0);
    row[0] = 1;
    for (int i = 1; i <= n; ++i)
        for (int j = i; j >= 1; --j) row[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j) - 1];
    return row[static_cast<std::size_t>(k)];
}

} // namespace shapley
