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

#ifndef MEMATTR_INTERCEPTOR_HPP
#define MEMATTR_INTERCEPTOR_HPP

#include "memattr/errors.hpp"
#include "memattr/scope.hpp"
#include "memattr/tags.hpp"
#include "memattr/tree.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace memattr {

/// Maps an opaque callsite token to a tag when neither an explicit tag nor
/// a scope is available. Must be deterministic and must not allocate through
/// the tracked path.
using caller_classifier = std::function<std::optional<tag_id>(std::uint64_t callsite)>;

inline std::uint64_t steady_clock_ns() noexcept {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

namespace detail {

inline void* default_alloc(std::size_t n) {
    return std::malloc(n);
}
inline void default_free(void* p) {
    std::free(p);
}
inline void* default_resize(void* p, std::size_t n) {
    return std::realloc(p, n);
}

} // namespace detail

// Plain function pointers: the shim sits on the allocation hot path, and
// the disabled mode has to stay within shouting distance of raw malloc.
using alloc_function = void* (*)(std::size_t);
using free_function = void (*)(void*);
using resize_function = void* (*)(void*, std::size_t);

/// Construction-time wiring. Clock, thread-id, and the underlying allocator
/// are injected so tests can replay events deterministically.
struct interceptor_options {
    bool enabled = true;
    std::uint32_t sampling_rate = 1;
    std::function<std::uint64_t()> clock = steady_clock_ns;
    std::function<std::uint64_t()> thread_id = this_thread_ordinal;
    alloc_function alloc_fn = detail::default_alloc;
    free_function free_fn = detail::default_free;
    resize_function resize_fn = detail::default_resize;

    /// Built-in defaults overridden by MEMATTR_ENABLED (0/1) and
    /// MEMATTR_SAMPLING (integer >= 1). Unparsable values are ignored.
    static interceptor_options from_env() {
        interceptor_options opts;
        if (const char* v = std::getenv("MEMATTR_ENABLED")) {
            std::string s(v);
            if (s == "0") {
                opts.enabled = false;
            } else if (s == "1") {
                opts.enabled = true;
            }
        }
        if (const char* v = std::getenv("MEMATTR_SAMPLING")) {
            char* end = nullptr;
            unsigned long long n = std::strtoull(v, &end, 10);
            if (end && *end == '\0' && n >= 1 && n <= 0xFFFFFFFFull) {
                opts.sampling_rate = static_cast<std::uint32_t>(n);
            }
        }
        return opts;
    }
};

namespace detail {

inline bool& reentrancy_flag() noexcept {
    thread_local bool inside = false;
    return inside;
}

// Per-thread sampling counter, lazily re-seeded when a different
// interceptor instance shows up on this thread.
struct sampling_slot {
    std::uint64_t epoch = 0;
    std::uint64_t pending = 0;
};

inline sampling_slot& this_thread_sampling() noexcept {
    thread_local sampling_slot slot;
    return slot;
}

inline std::uint64_t next_interceptor_epoch() noexcept {
    static std::atomic<std::uint64_t> next{0};
    return next.fetch_add(1, std::memory_order_relaxed) + 1;
}

} // namespace detail

/// Marks the calling thread as "inside the tracker" for its lifetime.
/// Allocation events that arrive while the flag is set are dropped, which
/// is what breaks the recursion when tracker internals allocate.
class reentrancy_guard {
public:
    reentrancy_guard() noexcept {
        bool& flag = detail::reentrancy_flag();
        owned_ = !flag;
        flag = true;
    }
    ~reentrancy_guard() {
        if (owned_) {
            detail::reentrancy_flag() = false;
        }
    }
    reentrancy_guard(const reentrancy_guard&) = delete;
    reentrancy_guard& operator=(const reentrancy_guard&) = delete;

private:
    bool owned_;
};

/// Routes allocation events through scope resolution, sampling, and the
/// attribution tree. The hook entry points never fail the host: internal
/// errors are swallowed (duplicate addresses are counted).
///
/// Billing precedence per event: explicit tag, then a non-empty scope path,
/// then the classifier's verdict on the callsite token, then /untagged.
class interceptor {
public:
    explicit interceptor(attribution_tree& tree,
                         interceptor_options options = interceptor_options::from_env())
        : tree_(tree),
          epoch_(detail::next_interceptor_epoch()),
          enabled_(options.enabled),
          sampling_rate_(options.sampling_rate == 0 ? 1 : options.sampling_rate),
          clock_(std::move(options.clock)),
          thread_id_(std::move(options.thread_id)),
          alloc_fn_(options.alloc_fn),
          free_fn_(options.free_fn),
          resize_fn_(options.resize_fn),
          default_allocator_(options.alloc_fn == detail::default_alloc &&
                             options.free_fn == detail::default_free &&
                             options.resize_fn == detail::default_resize) {}

    interceptor(const interceptor&) = delete;
    interceptor& operator=(const interceptor&) = delete;

    // ---- hook entry points -------------------------------------------

    /// Allocation hook; call after a successful underlying allocation.
    void on_alloc(std::uintptr_t address, std::uint64_t size, std::uint64_t flags = 0,
                  std::optional<tag_id> explicit_tag = std::nullopt,
                  std::optional<std::uint64_t> callsite = std::nullopt) noexcept {
        if (detail::reentrancy_flag() || !enabled_.load(std::memory_order_relaxed)) {
            return;
        }
        reentrancy_guard guard;
        try {
            apply_alloc(address, size, flags, explicit_tag, callsite);
        } catch (...) {
            // Tracking must never fail the host's allocation.
        }
    }

    /// Free hook. Runs even when tracking is disabled so previously
    /// tracked memory is decremented truthfully.
    void on_free(std::uintptr_t address) noexcept {
        if (detail::reentrancy_flag()) {
            return;
        }
        reentrancy_guard guard;
        try {
            tree_.record_free(address, 0);
        } catch (...) {
        }
    }

    /// Resize hook. Applies only to addresses the tracker already owns;
    /// like frees, it runs regardless of the enabled switch. Does not
    /// advance the sampling counter.
    void on_resize(std::uintptr_t address, std::uint64_t new_size) noexcept {
        if (detail::reentrancy_flag()) {
            return;
        }
        reentrancy_guard guard;
        try {
            if (tree_.is_live(address)) {
                tree_.record_resize(address, new_size, clock_());
            }
        } catch (...) {
        }
    }

    // ---- configuration ------------------------------------------------

    /// Takes effect for events that begin after the call. Idempotent.
    void set_enabled(bool flag) noexcept {
        enabled_.store(flag, std::memory_order_relaxed);
    }
    bool enabled() const noexcept { return enabled_.load(std::memory_order_relaxed); }

    /// Subsequent events are tracked once per n per-thread events, each
    /// with weight n. Already-live records keep their original weight.
    void set_sampling_rate(std::uint32_t n) {
        if (n < 1) {
            throw invalid_rate("sampling rate must be >= 1");
        }
        sampling_rate_.store(n, std::memory_order_relaxed);
    }
    std::uint32_t sampling_rate() const noexcept {
        return sampling_rate_.load(std::memory_order_relaxed);
    }

    const std::function<std::uint64_t()>& clock() const noexcept { return clock_; }

    void register_classifier(caller_classifier classifier) {
        std::unique_lock lock(classifier_mutex_);
        classifier_ = std::move(classifier);
    }

    /// Count of events dropped because their address was already live.
    /// Nonzero means the host's hook wiring is broken.
    std::uint64_t duplicate_address_count() const noexcept {
        return duplicate_addresses_.load(std::memory_order_relaxed);
    }

    // ---- manual shim ----------------------------------------------------

    /// Allocates through the injected allocator and records the event the
    /// same way the on_alloc hook would.
    void* traced_alloc(std::size_t size, std::optional<tag_id> explicit_tag = std::nullopt,
                       std::optional<std::uint64_t> callsite = std::nullopt,
                       std::uint64_t flags = 0) {
        if (size == 0) {
            throw precondition_error("traced_alloc requires size > 0");
        }
        reentrancy_guard guard;
        void* p = default_allocator_ ? std::malloc(size) : alloc_fn_(size);
        if (p == nullptr) {
            throw allocation_failure("underlying allocator refused " + std::to_string(size) +
                                     " bytes");
        }
        if (enabled_.load(std::memory_order_relaxed)) {
            try {
                apply_alloc(reinterpret_cast<std::uintptr_t>(p), size, flags, explicit_tag,
                            callsite);
            } catch (...) {
            }
        }
        return p;
    }

    void traced_free(void* p) noexcept {
        if (p == nullptr) {
            return;
        }
        reentrancy_guard guard;
        try {
            tree_.record_free(reinterpret_cast<std::uintptr_t>(p), 0);
        } catch (...) {
        }
        if (default_allocator_) {
            std::free(p);
        } else {
            free_fn_(p);
        }
    }

    /// realloc-style shim. The returned block may move; tracked records
    /// follow the move with their original path, thread, weight, and flags.
    void* traced_resize(void* p, std::size_t new_size) {
        if (p == nullptr || new_size == 0) {
            throw precondition_error("traced_resize requires a live pointer and size > 0");
        }
        reentrancy_guard guard;
        std::uintptr_t old_address = reinterpret_cast<std::uintptr_t>(p);
        std::optional<allocation_record> record = tree_.live_record(old_address);
        void* moved = resize_fn_(p, new_size);
        if (moved == nullptr) {
            throw allocation_failure("underlying allocator refused resize to " +
                                     std::to_string(new_size) + " bytes");
        }
        if (record) {
            try {
                tree_.record_free(old_address, 0);
                record->address = reinterpret_cast<std::uintptr_t>(moved);
                record->size = new_size;
                record->timestamp_ns = clock_();
                tree_.record_alloc(*record);
            } catch (...) {
            }
        }
        return moved;
    }

private:
    // Caller has checked the enabled switch and holds the reentrancy flag.
    void apply_alloc(std::uintptr_t address, std::uint64_t size, std::uint64_t flags,
                     std::optional<tag_id> explicit_tag, std::optional<std::uint64_t> callsite) {
        std::uint32_t rate = sampling_rate_.load(std::memory_order_relaxed);
        detail::sampling_slot& slot = detail::this_thread_sampling();
        if (slot.epoch != epoch_) {
            slot.epoch = epoch_;
            slot.pending = 0;
        }
        slot.pending += 1;
        if (slot.pending < rate) {
            return;
        }
        slot.pending = 0;

        allocation_record record;
        record.address = address;
        record.size = size;
        record.path = resolve_path(explicit_tag, callsite);
        record.thread_id = thread_id_();
        record.timestamp_ns = clock_();
        record.weight = rate;
        record.flags = flags;
        try {
            tree_.record_alloc(record);
        } catch (const duplicate_address&) {
            duplicate_addresses_.fetch_add(1, std::memory_order_relaxed);
        }
    }

    tag_path resolve_path(std::optional<tag_id> explicit_tag,
                          std::optional<std::uint64_t> callsite) const {
        if (explicit_tag) {
            // Explicit per-call tags name the billing bucket outright and
            // ignore the surrounding scope.
            return tag_path{*explicit_tag};
        }
        tag_path scope = current_path();
        if (!scope.is_root()) {
            return scope;
        }
        if (callsite) {
            std::shared_lock lock(classifier_mutex_);
            if (classifier_) {
                if (std::optional<tag_id> tag = classifier_(*callsite)) {
                    return tag_path{*tag};
                }
            }
        }
        return tag_path{untagged_tag};
    }

    attribution_tree& tree_;
    const std::uint64_t epoch_;
    std::atomic<bool> enabled_;
    std::atomic<std::uint32_t> sampling_rate_;
    std::function<std::uint64_t()> clock_;
    std::function<std::uint64_t()> thread_id_;
    alloc_function alloc_fn_;
    free_function free_fn_;
    resize_function resize_fn_;
    const bool default_allocator_;
    mutable std::shared_mutex classifier_mutex_;
    caller_classifier classifier_;
    std::atomic<std::uint64_t> duplicate_addresses_{0};
};

} // namespace memattr

#endif // MEMATTR_INTERCEPTOR_HPP
