#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

#include "sissle/common/types.hpp"
#include "sissle/kernels/bitset_kernels.hpp"

namespace sissle {

// Fixed-size set of node ids backed by 64-bit words. Bulk operations go through
// the dispatched kernels.
class NodeBitset {
public:
    NodeBitset() = default;
    explicit NodeBitset(std::size_t num_nodes) : size_(num_nodes), words_((num_nodes + 63) / 64, 0) {}

    std::size_t size() const { return size_; }
    std::size_t word_count() const { return words_.size(); }
    const std::uint64_t* data() const { return words_.data(); }
    std::uint64_t* data() { return words_.data(); }

    bool test(NodeId n) const { return (words_[n >> 6] >> (n & 63)) & 1U; }
    void set(NodeId n) { words_[n >> 6] |= std::uint64_t{1} << (n & 63); }
    void reset(NodeId n) { words_[n >> 6] &= ~(std::uint64_t{1} << (n & 63)); }
    void clear() { std::fill(words_.begin(), words_.end(), 0); }

    std::size_t count() const { return k().popcount(words_.data(), words_.size()); }
    bool any() const { return k().any(words_.data(), words_.size()); }
    bool none() const { return !any(); }

    std::size_t intersect_count(const NodeBitset& other) const {
        return k().and_popcount(words_.data(), other.words_.data(), words_.size());
    }

    NodeBitset& operator|=(const NodeBitset& other) {
        k().or_into(words_.data(), other.words_.data(), words_.size());
        return *this;
    }

    // this = a & ~b
    void assign_and_not(const NodeBitset& a, const NodeBitset& b) {
        k().and_not(words_.data(), a.words_.data(), b.words_.data(), words_.size());
    }

    // this |= a & ~b; true when something new was added.
    bool merge_and_not(const NodeBitset& a, const NodeBitset& b) {
        return k().or_and_not(words_.data(), a.words_.data(), b.words_.data(), words_.size());
    }

    template <class F>
    void for_each(F&& f) const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits) {
                const int b = std::countr_zero(bits);
                f(static_cast<NodeId>(w * 64 + static_cast<std::size_t>(b)));
                bits &= bits - 1;
            }
        }
    }

    friend bool operator==(const NodeBitset&, const NodeBitset&) = default;

private:
    static const kernels::BitsetKernels& k() {
        static const kernels::BitsetKernels& chosen = kernels::active_kernels();
        return chosen;
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace sissle
