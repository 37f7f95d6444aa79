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

#ifndef MEMATTR_REPORT_HPP
#define MEMATTR_REPORT_HPP

#include "memattr/snapshot.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memattr {

// Every renderer is a pure function of its inputs: identical snapshots
// always produce byte-identical text. Numbers come straight from the
// snapshot and rollup results; no arithmetic happens here beyond deltas
// already computed by diff().

struct report_options {
    std::uint64_t min_bytes = 0; // prune rows with rollup live bytes below this
    std::uint32_t max_depth = std::numeric_limits<std::uint32_t>::max();
};

namespace detail {

inline std::string parent_path_of(const std::string& path) {
    std::size_t slash = path.rfind('/');
    return (slash == 0) ? "/" : path.substr(0, slash);
}

inline std::string last_segment_of(const std::string& path) {
    return path.substr(path.rfind('/') + 1);
}

inline std::uint32_t path_depth(const std::string& path) {
    if (path == "/") {
        return 0;
    }
    return static_cast<std::uint32_t>(std::count(path.begin(), path.end(), '/'));
}

inline std::string render_header(const snapshot& snap) {
    std::string out;
    out += "taken_at_ns: " + std::to_string(snap.taken_at_ns) + "\n";
    out += "sampling_rate: " + std::to_string(snap.sampling_rate) + "\n";
    out += "enabled: " + std::string(snap.enabled ? "true" : "false") + "\n";
    out += "total_live_bytes: " + std::to_string(snap.total_live_bytes) + "\n";
    out += "global_peak_bytes: " + std::to_string(snap.global_peak_bytes) + "\n";
    out += "unmatched_frees: " + std::to_string(snap.unmatched_frees) + "\n";
    return out;
}

} // namespace detail

/// Tree report: snapshot nodes nested under their ancestors, children
/// sorted by rollup live bytes descending (ties by name). Rows below the
/// min-bytes or beyond the depth cutoff are pruned.
inline std::string render_report(const snapshot& snap, const report_options& options = {}) {
    std::string out = detail::render_header(snap);
    if (snap.nodes.empty()) {
        out += "\n(no allocations)\n";
        return out;
    }

    // Materialize implicit ancestors so every node hangs off the root row.
    std::map<std::string, std::vector<std::string>> children;
    std::map<std::string, cell_values> self_cells;
    for (const snapshot_node& node : snap.nodes) {
        self_cells[node.path] = node.cell;
        std::string current = node.path;
        while (current != "/") {
            std::string parent = detail::parent_path_of(current);
            auto& siblings = children[parent];
            if (std::find(siblings.begin(), siblings.end(), current) == siblings.end()) {
                siblings.push_back(current);
            }
            current = parent;
        }
    }

    std::string body;
    bool any_row = false;
    auto emit = [&](const std::string& path, std::uint32_t depth, auto&& self) -> void {
        rollup_cell rolled = rollup(snap, path);
        if (rolled.live_bytes < options.min_bytes || depth > options.max_depth) {
            return;
        }
        cell_values self_cell;
        if (auto it = self_cells.find(path); it != self_cells.end()) {
            self_cell = it->second;
        }
        body.append(2 * static_cast<std::size_t>(depth), ' ');
        body += (path == "/") ? "/" : detail::last_segment_of(path);
        body += " live=" + std::to_string(rolled.live_bytes);
        body += " self=" + std::to_string(self_cell.live_bytes);
        body += " count=" + std::to_string(rolled.live_count);
        body += " cum=" + std::to_string(rolled.cumulative_bytes);
        body += "\n";
        any_row = true;

        auto it = children.find(path);
        if (it == children.end()) {
            return;
        }
        std::vector<std::string> ordered = it->second;
        std::sort(ordered.begin(), ordered.end(),
                  [&](const std::string& a, const std::string& b) {
                      std::uint64_t la = rollup(snap, a).live_bytes;
                      std::uint64_t lb = rollup(snap, b).live_bytes;
                      if (la != lb) {
                          return la > lb;
                      }
                      return a < b;
                  });
        for (const std::string& child : ordered) {
            self(child, depth + 1, self);
        }
    };
    emit("/", 0, emit);

    if (any_row) {
        out += "\n";
        out += body;
    }
    return out;
}

/// Top-N table, one "path value" row per entry.
inline std::string render_top(const snapshot& snap, std::size_t n, stat_key key) {
    std::string out;
    for (const auto& [path, value] : top_n(snap, n, key, top_mode::self)) {
        out += path + " " + std::to_string(value) + "\n";
    }
    return out;
}

/// Per-path deltas on the chosen key, descending, zero rows omitted.
inline std::string render_diff(const snapshot& before, const snapshot& after, stat_key key) {
    snapshot_diff d = diff(before, after);
    std::vector<std::pair<std::string, std::int64_t>> rows;
    for (const snapshot_diff::entry& entry : d.entries) {
        std::int64_t delta = (key == stat_key::live) ? entry.live_bytes
                                                     : entry.cumulative_bytes;
        if (delta != 0) {
            rows.emplace_back(entry.path, delta);
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    if (rows.empty()) {
        return "(no change)\n";
    }
    std::string out;
    for (const auto& [path, delta] : rows) {
        out += path + " ";
        out += (delta > 0) ? "+" + std::to_string(delta) : std::to_string(delta);
        out += "\n";
    }
    return out;
}

struct check_rendering {
    std::string text;
    bool exceeded = false;
};

inline check_rendering render_check(const snapshot& snap, const budget_set& budgets) {
    std::vector<budget_exceedance> exceedances = check_budgets(snap, budgets);
    if (exceedances.empty()) {
        return {"OK\n", false};
    }
    std::string out;
    for (const budget_exceedance& e : exceedances) {
        out += e.path + " limit=" + std::to_string(e.limit) +
               " actual=" + std::to_string(e.actual) +
               " over=" + std::to_string(e.overshoot) + "\n";
    }
    return {out, true};
}

struct verify_rendering {
    std::string text;
    bool all_drained = true;
};

inline verify_rendering render_verify(const snapshot& snap,
                                      std::span<const std::string> paths) {
    verify_rendering result;
    for (const std::string& path : paths) {
        drain_result drain = verify_drained(snap, path);
        if (drain.drained) {
            result.text += "drained " + path + "\n";
        } else {
            result.text += "LEAK " + path + " live_bytes=" + std::to_string(drain.live_bytes) +
                           " live_count=" + std::to_string(drain.live_count) + "\n";
            result.all_drained = false;
        }
    }
    return result;
}

} // namespace memattr

#endif // MEMATTR_REPORT_HPP
