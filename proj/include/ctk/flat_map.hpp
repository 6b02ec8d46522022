#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace ctk {

/// Minimal open-addressing map from a dense-ish uint32 key space to a
/// small trivially-copyable value. Linear probing, power-of-two capacity,
/// tombstoned erase. No per-entry allocation; clear() keeps capacity.
template <typename Value>
class FlatMap {
    static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();
    static constexpr std::uint32_t kDead = kEmpty - 1;

  public:
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    void clear() {
        std::fill(keys_.begin(), keys_.end(), kEmpty);
        size_ = 0;
        used_ = 0;
    }

    bool contains(std::uint32_t key) const { return find_slot(key) != npos; }

    Value* find(std::uint32_t key) {
        std::size_t slot = find_slot(key);
        return slot == npos ? nullptr : &values_[slot];
    }
    const Value* find(std::uint32_t key) const {
        std::size_t slot = find_slot(key);
        return slot == npos ? nullptr : &values_[slot];
    }

    /// Returns false when the key was already present (value untouched).
    bool emplace(std::uint32_t key, const Value& value) {
        if ((used_ + 1) * 10 >= keys_.size() * 7) grow();
        std::size_t mask = keys_.size() - 1;
        std::size_t slot = hash(key) & mask;
        std::size_t insert_at = npos;
        while (true) {
            std::uint32_t k = keys_[slot];
            if (k == key) return false;
            if (k == kDead && insert_at == npos) insert_at = slot;
            if (k == kEmpty) {
                if (insert_at == npos) {
                    insert_at = slot;
                    ++used_;
                }
                keys_[insert_at] = key;
                values_[insert_at] = value;
                ++size_;
                return true;
            }
            slot = (slot + 1) & mask;
        }
    }

    void erase(std::uint32_t key) {
        std::size_t slot = find_slot(key);
        if (slot == npos) return;
        keys_[slot] = kDead;
        --size_;
    }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            if (keys_[i] != kEmpty && keys_[i] != kDead) fn(keys_[i], values_[i]);
        }
    }

  private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    static std::size_t hash(std::uint32_t key) {
        std::uint64_t x = key;
        x *= 0x9E3779B97F4A7C15ull;
        return static_cast<std::size_t>(x >> 32);
    }

    std::size_t find_slot(std::uint32_t key) const {
        if (keys_.empty()) return npos;
        std::size_t mask = keys_.size() - 1;
        std::size_t slot = hash(key) & mask;
        while (true) {
            std::uint32_t k = keys_[slot];
            if (k == key) return slot;
            if (k == kEmpty) return npos;
            slot = (slot + 1) & mask;
        }
    }

    void grow() {
        std::size_t cap = keys_.empty() ? 16 : keys_.size() * 2;
        std::vector<std::uint32_t> old_keys = std::move(keys_);
        std::vector<Value> old_values = std::move(values_);
        keys_.assign(cap, kEmpty);
        values_.assign(cap, Value{});
        size_ = 0;
        used_ = 0;
        for (std::size_t i = 0; i < old_keys.size(); ++i) {
            if (old_keys[i] != kEmpty && old_keys[i] != kDead) {
                emplace(old_keys[i], old_values[i]);
            }
        }
    }

    std::vector<std::uint32_t> keys_;
    std::vector<Value> values_;
    std::size_t size_ = 0;
    std::size_t used_ = 0;  // live + tombstones
};

}  // namespace ctk
