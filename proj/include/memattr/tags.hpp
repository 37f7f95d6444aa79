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

#ifndef MEMATTR_TAGS_HPP
#define MEMATTR_TAGS_HPP

#include "memattr/errors.hpp"

#include <array>
#include <cstdint>
#include <cstddef>
#include <deque>
#include <initializer_list>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

namespace memattr {

/// Dense identifier assigned by the registry in interning order.
using tag_id = std::uint32_t;

/// Reserved ids. Every registry starts with these two entries.
inline constexpr tag_id root_tag = 0;
inline constexpr tag_id untagged_tag = 1;

inline constexpr std::size_t max_path_depth = 32;
inline constexpr std::size_t max_tag_name_bytes = 128;

/// A name is 1..128 bytes, no '/', no bytes below 0x20. Comparison is
/// byte-exact; no case folding or normalization.
inline bool is_valid_tag_name(std::string_view name) noexcept {
    if (name.empty() || name.size() > max_tag_name_bytes) {
        return false;
    }
    for (unsigned char c : name) {
        if (c < 0x20 || c == '/') {
            return false;
        }
    }
    return true;
}

/// Ordered sequence of tag ids, implicitly rooted. The empty path is the
/// root itself. Inline storage keeps paths copyable without touching the
/// heap, which the allocation hooks depend on.
class tag_path {
public:
    tag_path() = default;

    tag_path(std::initializer_list<tag_id> segments) {
        for (tag_id id : segments) {
            append(id);
        }
    }

    static tag_path from_segments(std::span<const tag_id> segments) {
        tag_path path;
        for (tag_id id : segments) {
            path.append(id);
        }
        return path;
    }

    void append(tag_id id) {
        if (id == root_tag) {
            throw malformed_path("root tag cannot appear as a path segment");
        }
        if (size_ >= max_path_depth) {
            throw malformed_path("path exceeds maximum depth");
        }
        segments_[size_++] = id;
    }

    tag_path parent() const {
        if (is_root()) {
            throw root_has_no_parent("root path has no parent");
        }
        tag_path result = *this;
        result.size_ -= 1;
        return result;
    }

    bool is_root() const noexcept { return size_ == 0; }
    std::size_t size() const noexcept { return size_; }
    tag_id operator[](std::size_t i) const noexcept { return segments_[i]; }

    std::span<const tag_id> segments() const noexcept {
        return {segments_.data(), size_};
    }

    friend bool operator==(const tag_path& a, const tag_path& b) noexcept {
        if (a.size_ != b.size_) {
            return false;
        }
        for (std::size_t i = 0; i < a.size_; ++i) {
            if (a.segments_[i] != b.segments_[i]) {
                return false;
            }
        }
        return true;
    }

private:
    std::array<tag_id, max_path_depth> segments_{};
    std::uint32_t size_ = 0;
};

struct tag_path_hash {
    std::size_t operator()(const tag_path& path) const noexcept {
        // FNV-1a over the segment words.
        std::uint64_t h = 1469598103934665603ull;
        for (tag_id id : path.segments()) {
            h ^= id;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Append-only bidirectional mapping between names and dense ids.
/// Interning is idempotent and linearizes under concurrency: two racing
/// interns of the same name observe the same id. Ids are never reused.
class tag_registry {
public:
    tag_registry() {
        add_locked("root");     // id 0
        add_locked("untagged"); // id 1
    }

    tag_registry(const tag_registry&) = delete;
    tag_registry& operator=(const tag_registry&) = delete;

    tag_id intern(std::string_view name) {
        if (!is_valid_tag_name(name)) {
            throw invalid_tag_name("invalid tag name: \"" + std::string(name) + "\"");
        }
        {
            std::shared_lock lock(mutex_);
            auto it = ids_.find(name);
            if (it != ids_.end()) {
                return it->second;
            }
        }
        std::unique_lock lock(mutex_);
        auto it = ids_.find(name);
        if (it != ids_.end()) {
            return it->second;
        }
        return add_locked(name);
    }

    /// Returns the exact name passed at interning time. The view stays
    /// valid for the registry's lifetime (storage is append-only).
    std::string_view name_of(tag_id id) const {
        std::shared_lock lock(mutex_);
        if (id >= names_.size()) {
            throw unknown_tag_id("unknown tag id " + std::to_string(id));
        }
        return names_[id];
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return names_.size();
    }

    /// Root renders as "/", everything else as "/" + names joined by "/".
    std::string canonical_path_string(const tag_path& path) const {
        if (path.is_root()) {
            return "/";
        }
        std::string out;
        for (tag_id id : path.segments()) {
            out += '/';
            out += name_of(id);
        }
        return out;
    }

    /// Inverse of canonical_path_string; interns segment names it has not
    /// seen before.
    tag_path parse_path(std::string_view text) {
        if (text.empty() || text.front() != '/') {
            throw malformed_path("path must start with '/'");
        }
        if (text == "/") {
            return {};
        }
        tag_path path;
        std::size_t pos = 1;
        while (pos <= text.size()) {
            std::size_t next = text.find('/', pos);
            std::string_view segment = (next == std::string_view::npos)
                ? text.substr(pos)
                : text.substr(pos, next - pos);
            if (!is_valid_tag_name(segment)) {
                throw malformed_path("invalid path segment in \"" + std::string(text) + "\"");
            }
            tag_id id = intern(segment);
            if (id == root_tag) {
                throw malformed_path("\"root\" cannot appear as a path segment");
            }
            path.append(id);
            if (next == std::string_view::npos) {
                break;
            }
            pos = next + 1;
        }
        return path;
    }

private:
    tag_id add_locked(std::string_view name) {
        names_.emplace_back(name);
        tag_id id = static_cast<tag_id>(names_.size() - 1);
        ids_.emplace(names_.back(), id);
        return id;
    }

    mutable std::shared_mutex mutex_;
    std::deque<std::string> names_;
    std::unordered_map<std::string_view, tag_id> ids_;
};

inline tag_path parent_of(const tag_path& path) {
    return path.parent();
}

} // namespace memattr

#endif // MEMATTR_TAGS_HPP
