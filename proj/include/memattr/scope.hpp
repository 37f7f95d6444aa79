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

#ifndef MEMATTR_SCOPE_HPP
#define MEMATTR_SCOPE_HPP

#include "memattr/errors.hpp"
#include "memattr/tags.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <utility>

namespace memattr {

/// Process-unique ordinal for the calling thread. Cheaper than hashing
/// std::thread::id and usable as the thread field of allocation records.
inline std::uint64_t this_thread_ordinal() noexcept {
    static std::atomic<std::uint64_t> next{0};
    thread_local const std::uint64_t id = next.fetch_add(1, std::memory_order_relaxed) + 1;
    return id;
}

/// Proof of a push. Valid for exactly one pop on the pushing thread.
struct scope_handle {
    std::uint64_t thread_id = 0;
    std::uint32_t restore_depth = 0; // stack depth before the push
    std::uint64_t generation = 0;
};

namespace detail {

// Scope stacks are per-thread and process-global, mirroring how scope
// tagging systems behave: a new thread starts at the root.
struct scope_stack_state {
    struct slot {
        tag_id tag = 0;
        std::uint64_t generation = 0;
    };
    std::array<slot, max_path_depth> slots{};
    std::uint32_t depth = 0;
    std::uint64_t next_generation = 0;
    // Outstanding adoption of the root path (an empty adoption leaves no
    // slot to stamp, but its handle must still pop exactly once).
    std::uint64_t root_adoption = 0;
};

inline scope_stack_state& this_thread_scopes() noexcept {
    thread_local scope_stack_state state;
    return state;
}

} // namespace detail

/// Pushes one tag onto the calling thread's scope stack. Allocator activity
/// on this thread is billed to the stack's path until the matching pop.
inline scope_handle push_scope(tag_id tag) {
    if (tag == root_tag) {
        throw precondition_error("root tag cannot be pushed as a scope");
    }
    auto& state = detail::this_thread_scopes();
    if (state.depth >= max_path_depth) {
        throw depth_exceeded("scope depth limit reached");
    }
    std::uint64_t generation = ++state.next_generation;
    state.slots[state.depth] = {tag, generation};
    scope_handle handle{this_thread_ordinal(), state.depth, generation};
    state.depth += 1;
    return handle;
}

/// Pops the most recent unpopped scope. Wrong thread, double pop, and
/// out-of-order pop are hard errors; a silently repaired stack would
/// misattribute everything downstream.
inline void pop_scope(const scope_handle& handle) {
    if (handle.thread_id != this_thread_ordinal()) {
        throw scope_mismatch("scope popped on a different thread than it was pushed");
    }
    auto& state = detail::this_thread_scopes();
    if (state.depth == 0) {
        if (state.root_adoption != 0 && state.root_adoption == handle.generation) {
            state.root_adoption = 0;
            return;
        }
        throw scope_mismatch("scope stack is empty");
    }
    if (state.slots[state.depth - 1].generation != handle.generation) {
        throw scope_mismatch("stale or out-of-order scope handle");
    }
    state.depth = handle.restore_depth;
}

/// The calling thread's current attribution path. Empty stack means root.
inline tag_path current_path() {
    const auto& state = detail::this_thread_scopes();
    tag_path path;
    for (std::uint32_t i = 0; i < state.depth; ++i) {
        path.append(state.slots[i].tag);
    }
    return path;
}

inline std::uint32_t current_scope_depth() noexcept {
    return detail::this_thread_scopes().depth;
}

/// Seeds an empty stack with a full path so a worker thread can join its
/// parent's attribution context. One pop of the returned handle restores
/// the empty stack.
inline scope_handle adopt_path(const tag_path& path) {
    auto& state = detail::this_thread_scopes();
    if (state.depth != 0) {
        throw stack_not_empty("adopt_path requires an empty scope stack");
    }
    if (path.size() > max_path_depth) {
        throw depth_exceeded("adopted path exceeds depth limit");
    }
    std::uint64_t generation = ++state.next_generation;
    for (std::size_t i = 0; i < path.size(); ++i) {
        state.slots[i] = {path[i], generation};
    }
    state.depth = static_cast<std::uint32_t>(path.size());
    if (path.is_root()) {
        state.root_adoption = generation;
    }
    return scope_handle{this_thread_ordinal(), 0, generation};
}

/// Guard form of push/pop. Pop runs on every exit path.
class scoped_tag {
public:
    explicit scoped_tag(tag_id tag) : handle_(push_scope(tag)) {}
    scoped_tag(tag_registry& registry, std::string_view name)
        : handle_(push_scope(registry.intern(name))) {}

    scoped_tag(const scoped_tag&) = delete;
    scoped_tag& operator=(const scoped_tag&) = delete;

    ~scoped_tag() {
        try {
            pop_scope(handle_);
        } catch (const scope_mismatch&) {
            // Someone already corrupted the stack; throwing from a
            // destructor would only turn the report into a terminate.
        }
    }

private:
    scope_handle handle_;
};

/// Runs action with tag pushed; the pop is guaranteed even when the action
/// throws, in which case the exception propagates after the pop.
template <typename Action>
auto with_scope(tag_id tag, Action&& action) -> decltype(std::forward<Action>(action)()) {
    scoped_tag guard(tag);
    return std::forward<Action>(action)();
}

} // namespace memattr

#endif // MEMATTR_SCOPE_HPP
