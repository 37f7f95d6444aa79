/*
 * Copyright (C) 2026 The memattr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MEMATTR_TREE_HPP
#define MEMATTR_TREE_HPP

#include "memattr/errors.hpp"
#include "memattr/tags.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <unordered_map>

namespace memattr {

namespace detail {

inline std::uint64_t tracker_thread_ordinal() noexcept {
    static std::atomic<std::uint64_t> next{0};
    thread_local const std::uint64_t id = next.fetch_add(1, std::memory_order_relaxed) + 1;
    return id;
}

} // namespace detail

/// Monotone event counter with one cell per writing thread, so the hot
/// path is a plain store instead of a locked read-modify-write. Cells are
/// owned by the counter and survive their thread; totals are exact at
/// quiescence and reflect some linearization during concurrent updates.
class distributed_counter {
public:
    distributed_counter() : epoch_(next_epoch()) {}
    distributed_counter(const distributed_counter&) = delete;
    distributed_counter& operator=(const distributed_counter&) = delete;

    void increment() noexcept {
        std::atomic<std::uint64_t>* cell = cached_cell();
        cell->store(cell->load(std::memory_order_relaxed) + 1, std::memory_order_relaxed);
    }

    std::uint64_t total() const {
        std::lock_guard lock(mutex_);
        std::uint64_t sum = 0;
        for (const auto& [ordinal, cell] : cells_) {
            sum += cell->load(std::memory_order_relaxed);
        }
        return sum;
    }

    void reset() {
        std::lock_guard lock(mutex_);
        for (auto& [ordinal, cell] : cells_) {
            cell->store(0, std::memory_order_relaxed);
        }
    }

private:
    struct thread_slot {
        std::uint64_t epoch = 0;
        std::atomic<std::uint64_t>* cell = nullptr;
    };

    static std::uint64_t next_epoch() noexcept {
        static std::atomic<std::uint64_t> next{0};
        return next.fetch_add(1, std::memory_order_relaxed) + 1;
    }

    // Epochs are process-unique and never reused, so a slot left behind by
    // a destroyed counter can never match a live one.
    std::atomic<std::uint64_t>* cached_cell() noexcept {
        thread_local thread_slot slot;
        if (slot.epoch == epoch_) {
            return slot.cell;
        }
        std::lock_guard lock(mutex_);
        auto& cell = cells_[detail::tracker_thread_ordinal()];
        if (!cell) {
            cell = std::make_unique<std::atomic<std::uint64_t>>(0);
        }
        slot = {epoch_, cell.get()};
        return cell.get();
    }

    const std::uint64_t epoch_;
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, std::unique_ptr<std::atomic<std::uint64_t>>> cells_;
};

/// Plain value copy of one node's counters, used by snapshots and tests.
struct cell_values {
    std::uint64_t live_bytes = 0;
    std::uint64_t live_count = 0;
    std::uint64_t cumulative_bytes = 0;
    std::uint64_t cumulative_count = 0;
    std::uint64_t peak_live_bytes = 0;

    friend bool operator==(const cell_values&, const cell_values&) = default;
};

/// Per-node counters. Each field individually reflects some linearization
/// of the applied events; at quiescence all invariants hold exactly.
class stat_cell {
public:
    void add(std::uint64_t bytes, std::uint64_t count) noexcept {
        // Cumulative counters move first, and the live bump releases them,
        // so a concurrent reader never sees live above cumulative.
        cumulative_bytes_.fetch_add(bytes, std::memory_order_relaxed);
        cumulative_count_.fetch_add(count, std::memory_order_relaxed);
        std::uint64_t live = live_bytes_.fetch_add(bytes, std::memory_order_release) + bytes;
        live_count_.fetch_add(count, std::memory_order_release);
        raise_peak(live);
    }

    void remove(std::uint64_t bytes, std::uint64_t count) noexcept {
        live_bytes_.fetch_sub(bytes, std::memory_order_relaxed);
        live_count_.fetch_sub(count, std::memory_order_relaxed);
    }

    cell_values values() const noexcept {
        cell_values v;
        v.live_bytes = live_bytes_.load(std::memory_order_acquire);
        v.live_count = live_count_.load(std::memory_order_acquire);
        v.cumulative_bytes = cumulative_bytes_.load(std::memory_order_relaxed);
        v.cumulative_count = cumulative_count_.load(std::memory_order_relaxed);
        v.peak_live_bytes = peak_live_bytes_.load(std::memory_order_relaxed);
        return v;
    }

private:
    void raise_peak(std::uint64_t live) noexcept {
        std::uint64_t peak = peak_live_bytes_.load(std::memory_order_relaxed);
        while (live > peak &&
               !peak_live_bytes_.compare_exchange_weak(peak, live, std::memory_order_relaxed)) {
        }
    }

    std::atomic<std::uint64_t> live_bytes_{0};
    std::atomic<std::uint64_t> live_count_{0};
    std::atomic<std::uint64_t> cumulative_bytes_{0};
    std::atomic<std::uint64_t> cumulative_count_{0};
    std::atomic<std::uint64_t> peak_live_bytes_{0};
};

/// Metadata kept per live allocation so a later free can be billed back to
/// the owning tag. Lives in a side table keyed by address, never inside the
/// user's memory.
struct allocation_record {
    std::uintptr_t address = 0;
    std::uint64_t size = 0;       // bytes, > 0
    tag_path path;
    std::uint64_t thread_id = 0;
    std::uint64_t timestamp_ns = 0;
    std::uint32_t weight = 1;     // sampling rate in effect at creation
    std::uint64_t flags = 0;      // carried opaquely, never interpreted
};

/// The attribution tree: one stat_cell per tag path that ever received an
/// event, a live-allocation side table, and global counters. All mutating
/// operations are thread-safe.
class attribution_tree {
public:
    attribution_tree() = default;
    attribution_tree(const attribution_tree&) = delete;
    attribution_tree& operator=(const attribution_tree&) = delete;

    /// Bills size*weight to the record's path. Throws duplicate_address if
    /// the address is already live; the tree is left unchanged in that case.
    void record_alloc(const allocation_record& record) {
        if (record.size == 0) {
            throw precondition_error("allocation size must be > 0");
        }
        if (record.weight == 0) {
            throw precondition_error("allocation weight must be >= 1");
        }
        {
            shard& s = shard_for(record.address);
            std::lock_guard lock(s.mutex);
            if (!s.records.emplace(record.address, record).second) {
                throw duplicate_address("address already live");
            }
        }
        live_records_.fetch_add(1, std::memory_order_relaxed);
        std::uint64_t bytes = record.size * record.weight;
        cell_for(record.path).add(bytes, record.weight);
        std::uint64_t total = total_live_bytes_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
        raise_global_peak(total);
    }

    /// Unbills a live address. Unknown addresses (e.g. allocated before
    /// tracking was enabled) bump unmatched_frees and change nothing else.
    void record_free(std::uintptr_t address, std::uint64_t timestamp_ns) {
        // Nothing tracked means the address cannot be live; skip the shard
        // lock so never-enabled trackers stay cheap on the free path.
        if (live_records_.load(std::memory_order_relaxed) == 0) {
            unmatched_frees_.increment();
            return;
        }
        record_free_slow(address, timestamp_ns);
    }

    /// Free followed by alloc of the new size with the same path, thread,
    /// weight, and flags. Cumulative totals gain new_size*weight.
    void record_resize(std::uintptr_t address, std::uint64_t new_size,
                       std::uint64_t timestamp_ns) {
        if (new_size == 0) {
            throw precondition_error("resize size must be > 0");
        }
        allocation_record record;
        {
            shard& s = shard_for(address);
            std::lock_guard lock(s.mutex);
            auto it = s.records.find(address);
            if (it == s.records.end()) {
                throw unknown_address("resize of unknown address");
            }
            record = it->second;
            s.records.erase(it);
        }
        live_records_.fetch_sub(1, std::memory_order_relaxed);
        std::uint64_t old_bytes = record.size * record.weight;
        cell_for(record.path).remove(old_bytes, record.weight);
        total_live_bytes_.fetch_sub(old_bytes, std::memory_order_relaxed);

        record.size = new_size;
        record.timestamp_ns = timestamp_ns;
        {
            shard& s = shard_for(address);
            std::lock_guard lock(s.mutex);
            s.records.emplace(address, record);
        }
        live_records_.fetch_add(1, std::memory_order_relaxed);
        std::uint64_t new_bytes = new_size * record.weight;
        cell_for(record.path).add(new_bytes, record.weight);
        std::uint64_t total = total_live_bytes_.fetch_add(new_bytes, std::memory_order_relaxed) + new_bytes;
        raise_global_peak(total);
    }

    bool is_live(std::uintptr_t address) const {
        const shard& s = shard_for(address);
        std::lock_guard lock(s.mutex);
        return s.records.count(address) != 0;
    }

    std::optional<allocation_record> live_record(std::uintptr_t address) const {
        const shard& s = shard_for(address);
        std::lock_guard lock(s.mutex);
        auto it = s.records.find(address);
        if (it == s.records.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    /// Returns all cells, the live table, and the global counters to the
    /// empty state. The tag registry is not touched.
    void reset() {
        std::unique_lock nodes_lock(nodes_mutex_);
        nodes_.clear();
        for (shard& s : shards_) {
            std::lock_guard lock(s.mutex);
            s.records.clear();
        }
        live_records_.store(0, std::memory_order_relaxed);
        total_live_bytes_.store(0, std::memory_order_relaxed);
        global_peak_bytes_.store(0, std::memory_order_relaxed);
        unmatched_frees_.reset();
    }

    std::uint64_t total_live_bytes() const noexcept {
        return total_live_bytes_.load(std::memory_order_relaxed);
    }
    std::uint64_t global_peak_bytes() const noexcept {
        return global_peak_bytes_.load(std::memory_order_relaxed);
    }
    std::uint64_t unmatched_frees() const { return unmatched_frees_.total(); }

    template <typename Fn>
    void for_each_node(Fn&& fn) const {
        std::shared_lock lock(nodes_mutex_);
        for (const auto& [path, cell] : nodes_) {
            fn(path, cell->values());
        }
    }

    template <typename Fn>
    void for_each_live(Fn&& fn) const {
        for (const shard& s : shards_) {
            std::lock_guard lock(s.mutex);
            for (const auto& [address, record] : s.records) {
                fn(record);
            }
        }
    }

private:
    struct shard {
        mutable std::mutex mutex;
        std::unordered_map<std::uintptr_t, allocation_record> records;
    };

    static constexpr std::size_t shard_count = 16;

    shard& shard_for(std::uintptr_t address) noexcept {
        return shards_[(address >> 4) % shard_count];
    }
    const shard& shard_for(std::uintptr_t address) const noexcept {
        return shards_[(address >> 4) % shard_count];
    }

    void record_free_slow(std::uintptr_t address, std::uint64_t /*timestamp_ns*/) {
        allocation_record record;
        {
            shard& s = shard_for(address);
            std::lock_guard lock(s.mutex);
            auto it = s.records.find(address);
            if (it == s.records.end()) {
                unmatched_frees_.increment();
                return;
            }
            record = it->second;
            s.records.erase(it);
        }
        live_records_.fetch_sub(1, std::memory_order_relaxed);
        std::uint64_t bytes = record.size * record.weight;
        cell_for(record.path).remove(bytes, record.weight);
        total_live_bytes_.fetch_sub(bytes, std::memory_order_relaxed);
    }

    stat_cell& cell_for(const tag_path& path) {
        {
            std::shared_lock lock(nodes_mutex_);
            auto it = nodes_.find(path);
            if (it != nodes_.end()) {
                return *it->second;
            }
        }
        std::unique_lock lock(nodes_mutex_);
        auto [it, inserted] = nodes_.try_emplace(path, nullptr);
        if (inserted) {
            it->second = std::make_unique<stat_cell>();
        }
        return *it->second;
    }

    void raise_global_peak(std::uint64_t total) noexcept {
        std::uint64_t peak = global_peak_bytes_.load(std::memory_order_relaxed);
        while (total > peak &&
               !global_peak_bytes_.compare_exchange_weak(peak, total, std::memory_order_relaxed)) {
        }
    }

    mutable std::shared_mutex nodes_mutex_;
    std::unordered_map<tag_path, std::unique_ptr<stat_cell>, tag_path_hash> nodes_;
    std::array<shard, shard_count> shards_;
    std::atomic<std::uint64_t> live_records_{0};
    std::atomic<std::uint64_t> total_live_bytes_{0};
    std::atomic<std::uint64_t> global_peak_bytes_{0};
    distributed_counter unmatched_frees_;
};

} // namespace memattr

#endif // MEMATTR_TREE_HPP
