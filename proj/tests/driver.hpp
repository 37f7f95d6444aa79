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

// Drives event scripts through a real tracker and compares the outcome
// against the shadow oracle.

#ifndef MEMATTR_TESTS_DRIVER_HPP
#define MEMATTR_TESTS_DRIVER_HPP

#include "memattr/memattr.hpp"
#include "oracle.hpp"

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace script {

/// Applies a script to an existing tracker on the calling thread. Scopes
/// left open by the script are closed before returning.
inline void run_script(memattr::tracker& tracker, const std::vector<event>& events) {
    std::vector<memattr::scope_handle> open_scopes;
    for (const event& e : events) {
        if (const auto* push = std::get_if<push_event>(&e)) {
            open_scopes.push_back(memattr::push_scope(tracker.intern(push->tag)));
        } else if (std::get_if<pop_event>(&e)) {
            memattr::pop_scope(open_scopes.back());
            open_scopes.pop_back();
        } else if (const auto* toggle = std::get_if<set_enabled_event>(&e)) {
            tracker.hooks().set_enabled(toggle->enabled);
        } else if (const auto* rated = std::get_if<set_rate_event>(&e)) {
            tracker.hooks().set_sampling_rate(rated->rate);
        } else if (const auto* alloc = std::get_if<alloc_event>(&e)) {
            std::optional<memattr::tag_id> explicit_tag;
            if (alloc->explicit_tag) {
                explicit_tag = tracker.intern(*alloc->explicit_tag);
            }
            tracker.hooks().on_alloc(alloc->address, alloc->size, alloc->flags, explicit_tag,
                                     alloc->callsite);
        } else if (const auto* freed = std::get_if<free_event>(&e)) {
            tracker.hooks().on_free(freed->address);
        } else if (const auto* resized = std::get_if<resize_event>(&e)) {
            tracker.hooks().on_resize(resized->address, resized->new_size);
        }
    }
    while (!open_scopes.empty()) {
        memattr::pop_scope(open_scopes.back());
        open_scopes.pop_back();
    }
}

inline memattr::tracker make_tracker(const config& cfg) {
    memattr::interceptor_options options;
    options.enabled = cfg.enabled;
    options.sampling_rate = cfg.sampling_rate;
    return memattr::tracker(options);
}

inline void install_classifier(memattr::tracker& tracker, const config& cfg) {
    if (cfg.classifier.empty()) {
        return;
    }
    std::map<std::uint64_t, memattr::tag_id> mapping;
    for (const auto& [token, name] : cfg.classifier) {
        mapping[token] = tracker.intern(name);
    }
    tracker.hooks().register_classifier(
        [mapping](std::uint64_t token) -> std::optional<memattr::tag_id> {
            auto it = mapping.find(token);
            if (it == mapping.end()) {
                return std::nullopt;
            }
            return it->second;
        });
}

/// Empty string means the snapshot matches the oracle exactly; otherwise a
/// description of the first mismatch.
inline std::string compare_with_oracle(const memattr::snapshot& snap,
                                       const oracle_result& expected,
                                       bool check_global_peak) {
    std::ostringstream out;
    std::map<std::string, oracle_cell> actual;
    for (const memattr::snapshot_node& node : snap.nodes) {
        actual[node.path] = {node.cell.live_bytes, node.cell.live_count,
                             node.cell.cumulative_bytes, node.cell.cumulative_count,
                             node.cell.peak_live_bytes};
    }
    for (const auto& [path, cell] : expected.cells) {
        auto it = actual.find(path);
        if (it == actual.end()) {
            out << "missing node " << path;
            return out.str();
        }
        const oracle_cell& got = it->second;
        if (got.live_bytes != cell.live_bytes || got.live_count != cell.live_count ||
            got.cumulative_bytes != cell.cumulative_bytes ||
            got.cumulative_count != cell.cumulative_count ||
            got.peak_live_bytes != cell.peak_live_bytes) {
            out << "cell mismatch at " << path << ": got {" << got.live_bytes << ", "
                << got.live_count << ", " << got.cumulative_bytes << ", "
                << got.cumulative_count << ", " << got.peak_live_bytes << "} expected {"
                << cell.live_bytes << ", " << cell.live_count << ", " << cell.cumulative_bytes
                << ", " << cell.cumulative_count << ", " << cell.peak_live_bytes << "}";
            return out.str();
        }
    }
    for (const auto& [path, cell] : actual) {
        if (expected.cells.count(path) == 0) {
            out << "unexpected node " << path;
            return out.str();
        }
    }
    if (snap.total_live_bytes != expected.total_live_bytes) {
        out << "total_live_bytes " << snap.total_live_bytes << " != "
            << expected.total_live_bytes;
        return out.str();
    }
    if (snap.unmatched_frees != expected.unmatched_frees) {
        out << "unmatched_frees " << snap.unmatched_frees << " != "
            << expected.unmatched_frees;
        return out.str();
    }
    if (check_global_peak && snap.global_peak_bytes != expected.global_peak_bytes) {
        out << "global_peak_bytes " << snap.global_peak_bytes << " != "
            << expected.global_peak_bytes;
        return out.str();
    }
    return {};
}

/// Conservation: total == sum of self cells == weighted live-table sum, and
/// the root rollup agrees. Empty string on success.
inline std::string check_conservation(const memattr::tracker& tracker) {
    memattr::snapshot snap = tracker.take_snapshot();
    std::uint64_t cell_sum = 0;
    for (const memattr::snapshot_node& node : snap.nodes) {
        cell_sum += node.cell.live_bytes;
    }
    std::uint64_t table_sum = 0;
    tracker.tree().for_each_live([&table_sum](const memattr::allocation_record& record) {
        table_sum += record.size * record.weight;
    });
    std::ostringstream out;
    if (cell_sum != snap.total_live_bytes) {
        out << "sum of self cells " << cell_sum << " != total " << snap.total_live_bytes;
        return out.str();
    }
    if (table_sum != snap.total_live_bytes) {
        out << "live-table sum " << table_sum << " != total " << snap.total_live_bytes;
        return out.str();
    }
    memattr::rollup_cell root = memattr::rollup(snap, "/");
    if (root.live_bytes != snap.total_live_bytes) {
        out << "rollup(/) " << root.live_bytes << " != total " << snap.total_live_bytes;
        return out.str();
    }
    return {};
}

} // namespace script

#endif // MEMATTR_TESTS_DRIVER_HPP
