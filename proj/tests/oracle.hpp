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

// Test-only machinery: an event-script model, a shadow oracle that replays
// scripts with plain maps and string paths (independent of the library), a
// driver that feeds the same script through a real tracker, and a comparer.

#ifndef MEMATTR_TESTS_ORACLE_HPP
#define MEMATTR_TESTS_ORACLE_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace script {

struct alloc_event {
    std::uint64_t address = 0;
    std::uint64_t size = 0;
    std::optional<std::string> explicit_tag;
    std::optional<std::uint64_t> callsite;
    std::uint64_t flags = 0;
};
struct free_event {
    std::uint64_t address = 0;
};
struct resize_event {
    std::uint64_t address = 0;
    std::uint64_t new_size = 0;
};
struct push_event {
    std::string tag;
};
struct pop_event {};
struct set_enabled_event {
    bool enabled = true;
};
struct set_rate_event {
    std::uint32_t rate = 1;
};

using event = std::variant<alloc_event, free_event, resize_event, push_event, pop_event,
                           set_enabled_event, set_rate_event>;

struct config {
    bool enabled = true;
    std::uint32_t sampling_rate = 1;
    // Token -> tag name consulted when an alloc has a callsite, no explicit
    // tag, and an empty scope.
    std::map<std::uint64_t, std::string> classifier;
};

// ---- shadow oracle ---------------------------------------------------------

struct oracle_cell {
    std::uint64_t live_bytes = 0;
    std::uint64_t live_count = 0;
    std::uint64_t cumulative_bytes = 0;
    std::uint64_t cumulative_count = 0;
    std::uint64_t peak_live_bytes = 0;
};

struct oracle_result {
    std::map<std::string, oracle_cell> cells;
    std::uint64_t total_live_bytes = 0;
    std::uint64_t global_peak_bytes = 0;
    std::uint64_t unmatched_frees = 0;
};

// Linear replay with the dumbest possible data structures. This is the
// arbiter the attribution tree is judged against.
inline oracle_result oracle_replay(const std::vector<event>& events, const config& cfg) {
    struct live_entry {
        std::uint64_t size = 0;
        std::uint64_t weight = 0;
        std::string path;
    };

    oracle_result result;
    std::vector<std::string> scope;
    std::unordered_map<std::uint64_t, live_entry> live;
    bool enabled = cfg.enabled;
    std::uint32_t rate = cfg.sampling_rate;
    std::uint64_t pending = 0;

    auto join_scope = [&scope]() {
        std::string path;
        for (const std::string& tag : scope) {
            path += '/';
            path += tag;
        }
        return path;
    };

    auto bill = [&result](const std::string& path, std::uint64_t bytes, std::uint64_t count) {
        oracle_cell& cell = result.cells[path];
        cell.live_bytes += bytes;
        cell.live_count += count;
        cell.cumulative_bytes += bytes;
        cell.cumulative_count += count;
        cell.peak_live_bytes = std::max(cell.peak_live_bytes, cell.live_bytes);
        result.total_live_bytes += bytes;
        result.global_peak_bytes = std::max(result.global_peak_bytes, result.total_live_bytes);
    };

    auto unbill = [&result](const std::string& path, std::uint64_t bytes, std::uint64_t count) {
        oracle_cell& cell = result.cells.at(path);
        cell.live_bytes -= bytes;
        cell.live_count -= count;
        result.total_live_bytes -= bytes;
    };

    for (const event& e : events) {
        if (const auto* push = std::get_if<push_event>(&e)) {
            scope.push_back(push->tag);
        } else if (std::get_if<pop_event>(&e)) {
            scope.pop_back();
        } else if (const auto* toggle = std::get_if<set_enabled_event>(&e)) {
            enabled = toggle->enabled;
        } else if (const auto* rated = std::get_if<set_rate_event>(&e)) {
            rate = rated->rate;
        } else if (const auto* alloc = std::get_if<alloc_event>(&e)) {
            if (!enabled) {
                continue;
            }
            pending += 1;
            if (pending < rate) {
                continue;
            }
            pending = 0;
            if (live.count(alloc->address) != 0) {
                continue; // duplicate; the tree counts it in diagnostics only
            }
            std::string path;
            if (alloc->explicit_tag) {
                path = "/" + *alloc->explicit_tag;
            } else if (!scope.empty()) {
                path = join_scope();
            } else if (alloc->callsite && cfg.classifier.count(*alloc->callsite) != 0) {
                path = "/" + cfg.classifier.at(*alloc->callsite);
            } else {
                path = "/untagged";
            }
            std::uint64_t bytes = alloc->size * rate;
            bill(path, bytes, rate);
            live[alloc->address] = {alloc->size, rate, path};
        } else if (const auto* freed = std::get_if<free_event>(&e)) {
            auto it = live.find(freed->address);
            if (it == live.end()) {
                result.unmatched_frees += 1;
                continue;
            }
            unbill(it->second.path, it->second.size * it->second.weight, it->second.weight);
            live.erase(it);
        } else if (const auto* resized = std::get_if<resize_event>(&e)) {
            auto it = live.find(resized->address);
            if (it == live.end()) {
                continue; // untracked resizes are ignored
            }
            live_entry& entry = it->second;
            unbill(entry.path, entry.size * entry.weight, entry.weight);
            bill(entry.path, resized->new_size * entry.weight, entry.weight);
            entry.size = resized->new_size;
        }
    }
    return result;
}

// ---- script generator --------------------------------------------------------

struct generator_options {
    std::size_t event_count = 1000;
    bool initial_enabled = true;
    std::uint32_t initial_rate = 1;
    bool allow_toggles = true;
    bool allow_rate_changes = true;
    bool allow_resizes = true;
    bool allow_explicit_tags = true;
    bool allow_callsites = true;
    bool free_everything_at_end = false;
    std::uint64_t address_base = 0x1000;
    std::uint32_t max_scope_depth = 6;
    std::vector<std::string> tags = {"net", "ui", "db", "cache", "io", "gpu", "fs", "rpc"};
};

inline std::map<std::uint64_t, std::string> default_classifier() {
    return {{1, "cls_io"}, {2, "cls_gpu"}};
}

inline std::vector<event> generate_script(std::mt19937_64& rng, const generator_options& opts) {
    std::vector<event> events;
    events.reserve(opts.event_count + 64);
    std::uint64_t next_address = opts.address_base;
    std::uint64_t next_bogus = opts.address_base + 0x4000000000000000ull;
    std::vector<std::uint64_t> script_live; // host view: allocated, not yet freed
    std::vector<std::uint64_t> reusable;    // freed addresses that may come back
    std::uint32_t depth = 0;

    auto pick = [&rng](std::uint64_t bound) {
        return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(rng);
    };

    for (std::size_t i = 0; i < opts.event_count; ++i) {
        std::uint64_t roll = pick(100);
        if (roll < 40) {
            alloc_event alloc;
            if (!reusable.empty() && pick(10) == 0) {
                alloc.address = reusable.back();
                reusable.pop_back();
            } else {
                alloc.address = next_address++;
            }
            alloc.size = 1 + pick(4096);
            alloc.flags = pick(4);
            if (opts.allow_explicit_tags && pick(100) < 15) {
                alloc.explicit_tag = opts.tags[pick(opts.tags.size())];
            } else if (opts.allow_callsites && pick(100) < 20) {
                alloc.callsite = 1 + pick(3); // token 3 is unmapped on purpose
            }
            script_live.push_back(alloc.address);
            events.push_back(alloc);
        } else if (roll < 65) {
            free_event freed;
            if (!script_live.empty() && pick(100) < 85) {
                std::uint64_t index = pick(script_live.size());
                freed.address = script_live[index];
                script_live.erase(script_live.begin() + static_cast<std::ptrdiff_t>(index));
                reusable.push_back(freed.address);
            } else {
                freed.address = next_bogus++;
            }
            events.push_back(freed);
        } else if (roll < 75) {
            if (depth < opts.max_scope_depth) {
                events.push_back(push_event{opts.tags[pick(opts.tags.size())]});
                depth += 1;
            }
        } else if (roll < 85) {
            if (depth > 0) {
                events.push_back(pop_event{});
                depth -= 1;
            }
        } else if (roll < 93) {
            if (opts.allow_resizes && !script_live.empty()) {
                resize_event resized;
                resized.address = script_live[pick(script_live.size())];
                resized.new_size = 1 + pick(4096);
                events.push_back(resized);
            }
        } else if (roll < 97) {
            if (opts.allow_toggles) {
                events.push_back(set_enabled_event{pick(2) == 0});
            }
        } else {
            if (opts.allow_rate_changes) {
                static const std::uint32_t rates[] = {1, 2, 3, 4, 8};
                events.push_back(set_rate_event{rates[pick(5)]});
            }
        }
    }
    if (opts.free_everything_at_end) {
        for (std::uint64_t address : script_live) {
            events.push_back(free_event{address});
        }
        script_live.clear();
    }
    return events;
}

} // namespace script

#endif // MEMATTR_TESTS_ORACLE_HPP
