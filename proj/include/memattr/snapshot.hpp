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

#ifndef MEMATTR_SNAPSHOT_HPP
#define MEMATTR_SNAPSHOT_HPP

#include "memattr/errors.hpp"
#include "memattr/tags.hpp"
#include "memattr/tree.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace memattr {

struct snapshot_node {
    std::string path; // canonical path string
    cell_values cell;

    friend bool operator==(const snapshot_node&, const snapshot_node&) = default;
};

/// Immutable point-in-time copy of the attribution tree. Nodes are sorted
/// ascending by canonical path string; only paths that ever received an
/// event appear.
struct snapshot {
    std::uint64_t taken_at_ns = 0;
    std::uint32_t sampling_rate = 1;
    bool enabled = true;
    std::uint64_t total_live_bytes = 0;
    std::uint64_t global_peak_bytes = 0;
    std::uint64_t unmatched_frees = 0;
    std::vector<snapshot_node> nodes;

    friend bool operator==(const snapshot&, const snapshot&) = default;
};

inline snapshot take_snapshot(const attribution_tree& tree, const tag_registry& registry,
                              std::uint64_t taken_at_ns, std::uint32_t sampling_rate,
                              bool enabled) {
    snapshot snap;
    snap.taken_at_ns = taken_at_ns;
    snap.sampling_rate = sampling_rate;
    snap.enabled = enabled;
    snap.total_live_bytes = tree.total_live_bytes();
    snap.global_peak_bytes = tree.global_peak_bytes();
    snap.unmatched_frees = tree.unmatched_frees();
    tree.for_each_node([&](const tag_path& path, const cell_values& cell) {
        snap.nodes.push_back({registry.canonical_path_string(path), cell});
    });
    std::sort(snap.nodes.begin(), snap.nodes.end(),
              [](const snapshot_node& a, const snapshot_node& b) { return a.path < b.path; });
    return snap;
}

/// Aggregate over a node and all of its descendants. Peaks are excluded:
/// the max of sums is not the sum of maxes.
struct rollup_cell {
    std::uint64_t live_bytes = 0;
    std::uint64_t live_count = 0;
    std::uint64_t cumulative_bytes = 0;
    std::uint64_t cumulative_count = 0;

    friend bool operator==(const rollup_cell&, const rollup_cell&) = default;
};

namespace detail {

inline bool path_is_or_descends_from(std::string_view node, std::string_view base) {
    if (base == "/") {
        return true;
    }
    if (node == base) {
        return true;
    }
    return node.size() > base.size() && node.compare(0, base.size(), base) == 0 &&
           node[base.size()] == '/';
}

} // namespace detail

/// Sums self cells over `path` and every descendant. Absent paths roll up
/// to zeros.
inline rollup_cell rollup(const snapshot& snap, std::string_view path) {
    rollup_cell total;
    for (const snapshot_node& node : snap.nodes) {
        if (detail::path_is_or_descends_from(node.path, path)) {
            total.live_bytes += node.cell.live_bytes;
            total.live_count += node.cell.live_count;
            total.cumulative_bytes += node.cell.cumulative_bytes;
            total.cumulative_count += node.cell.cumulative_count;
        }
    }
    return total;
}

enum class stat_key { live, cumulative };
enum class top_mode { self, rollup };

/// Top entries by the chosen key, descending, ties broken by ascending
/// path. Self mode ranks individual nodes; rollup mode ranks the maximal
/// non-overlapping subtrees at depth 1.
inline std::vector<std::pair<std::string, std::uint64_t>> top_n(const snapshot& snap,
                                                                std::size_t n, stat_key key,
                                                                top_mode mode) {
    if (n < 1) {
        throw invalid_n("top_n requires n >= 1");
    }
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    if (mode == top_mode::self) {
        entries.reserve(snap.nodes.size());
        for (const snapshot_node& node : snap.nodes) {
            std::uint64_t value = (key == stat_key::live) ? node.cell.live_bytes
                                                          : node.cell.cumulative_bytes;
            entries.emplace_back(node.path, value);
        }
    } else {
        std::vector<std::string> subtrees;
        for (const snapshot_node& node : snap.nodes) {
            if (node.path == "/") {
                continue; // self-billed root belongs to no depth-1 subtree
            }
            std::size_t slash = node.path.find('/', 1);
            std::string head = (slash == std::string::npos) ? node.path
                                                            : node.path.substr(0, slash);
            if (std::find(subtrees.begin(), subtrees.end(), head) == subtrees.end()) {
                subtrees.push_back(head);
            }
        }
        for (const std::string& head : subtrees) {
            rollup_cell cell = rollup(snap, head);
            std::uint64_t value = (key == stat_key::live) ? cell.live_bytes
                                                          : cell.cumulative_bytes;
            entries.emplace_back(head, value);
        }
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    if (entries.size() > n) {
        entries.resize(n);
    }
    return entries;
}

/// Per-path after-minus-before deltas; a path absent on one side counts as
/// zeros there. Keyed by canonical path string so snapshots from different
/// runs or processes can be compared.
struct snapshot_diff {
    struct entry {
        std::string path;
        std::int64_t live_bytes = 0;
        std::int64_t live_count = 0;
        std::int64_t cumulative_bytes = 0;
        std::int64_t cumulative_count = 0;

        friend bool operator==(const entry&, const entry&) = default;
    };
    std::vector<entry> entries; // sorted ascending by path

    friend bool operator==(const snapshot_diff&, const snapshot_diff&) = default;
};

inline snapshot_diff diff(const snapshot& before, const snapshot& after) {
    snapshot_diff result;
    std::size_t i = 0;
    std::size_t j = 0;
    auto signed_delta = [](std::uint64_t after_v, std::uint64_t before_v) {
        return static_cast<std::int64_t>(after_v) - static_cast<std::int64_t>(before_v);
    };
    auto push = [&](const std::string& path, const cell_values& b, const cell_values& a) {
        snapshot_diff::entry e;
        e.path = path;
        e.live_bytes = signed_delta(a.live_bytes, b.live_bytes);
        e.live_count = signed_delta(a.live_count, b.live_count);
        e.cumulative_bytes = signed_delta(a.cumulative_bytes, b.cumulative_bytes);
        e.cumulative_count = signed_delta(a.cumulative_count, b.cumulative_count);
        result.entries.push_back(std::move(e));
    };
    while (i < before.nodes.size() || j < after.nodes.size()) {
        if (j >= after.nodes.size() ||
            (i < before.nodes.size() && before.nodes[i].path < after.nodes[j].path)) {
            push(before.nodes[i].path, before.nodes[i].cell, cell_values{});
            ++i;
        } else if (i >= before.nodes.size() || after.nodes[j].path < before.nodes[i].path) {
            push(after.nodes[j].path, cell_values{}, after.nodes[j].cell);
            ++j;
        } else {
            push(before.nodes[i].path, before.nodes[i].cell, after.nodes[j].cell);
            ++i;
            ++j;
        }
    }
    return result;
}

// ---- budgets ------------------------------------------------------------

/// Byte quota on a subtree's rolled-up live bytes.
struct budget {
    std::string path;
    std::uint64_t max_bytes = 0;

    friend bool operator==(const budget&, const budget&) = default;
};

/// Ordered set of budgets, one per path (setting a path again replaces it).
class budget_set {
public:
    void set_budget(std::string_view path, std::uint64_t max_bytes) {
        validate_path_string(path);
        for (budget& b : budgets_) {
            if (b.path == path) {
                b.max_bytes = max_bytes;
                return;
            }
        }
        budgets_.push_back({std::string(path), max_bytes});
    }

    const std::vector<budget>& budgets() const noexcept { return budgets_; }

    /// Strict path grammar check for externally supplied path strings.
    static void validate_path_string(std::string_view path) {
        if (path.empty() || path.front() != '/') {
            throw malformed_path("path must start with '/'");
        }
        if (path == "/") {
            return;
        }
        std::size_t pos = 1;
        while (pos <= path.size()) {
            std::size_t next = path.find('/', pos);
            std::string_view segment = (next == std::string_view::npos)
                ? path.substr(pos)
                : path.substr(pos, next - pos);
            if (!is_valid_tag_name(segment)) {
                throw malformed_path("invalid path segment in \"" + std::string(path) + "\"");
            }
            if (next == std::string_view::npos) {
                break;
            }
            pos = next + 1;
        }
    }

private:
    std::vector<budget> budgets_;
};

struct budget_exceedance {
    std::string path;
    std::uint64_t limit = 0;
    std::uint64_t actual = 0;
    std::uint64_t overshoot = 0;

    friend bool operator==(const budget_exceedance&, const budget_exceedance&) = default;
};

/// One entry per budget whose rolled-up live bytes strictly exceed the
/// limit (a quota met exactly is compliant). Sorted by overshoot
/// descending, ties by path ascending.
inline std::vector<budget_exceedance> check_budgets(const snapshot& snap,
                                                    const budget_set& budgets) {
    std::vector<budget_exceedance> exceedances;
    for (const budget& b : budgets.budgets()) {
        std::uint64_t actual = rollup(snap, b.path).live_bytes;
        if (actual > b.max_bytes) {
            exceedances.push_back({b.path, b.max_bytes, actual, actual - b.max_bytes});
        }
    }
    std::sort(exceedances.begin(), exceedances.end(),
              [](const budget_exceedance& a, const budget_exceedance& b) {
                  if (a.overshoot != b.overshoot) {
                      return a.overshoot > b.overshoot;
                  }
                  return a.path < b.path;
              });
    return exceedances;
}

// ---- drain verification ---------------------------------------------------

struct drain_result {
    bool drained = false;
    std::uint64_t live_bytes = 0;
    std::uint64_t live_count = 0;

    friend bool operator==(const drain_result&, const drain_result&) = default;
};

/// The unload check: a subtree is drained when its rolled-up live bytes and
/// live count are both zero. Failure is a reported result, never a crash.
inline drain_result verify_drained(const snapshot& snap, std::string_view path) {
    budget_set::validate_path_string(path);
    rollup_cell cell = rollup(snap, path);
    return {cell.live_bytes == 0 && cell.live_count == 0, cell.live_bytes, cell.live_count};
}

// ---- canonical serialization ----------------------------------------------
//
// UTF-8 text, LF endings, trailing newline. One "key value" pair per line,
// fixed key order:
//
//   version 1
//   taken_at_ns N
//   sampling_rate N
//   enabled true|false
//   total_live_bytes N
//   global_peak_bytes N
//   unmatched_frees N
//   nodes COUNT
//   path /a/b            } repeated COUNT times,
//   live_bytes N         } nodes sorted ascending by path
//   live_count N
//   cumulative_bytes N
//   cumulative_count N
//   peak_live_bytes N
//
// Integers are base-10 without leading zeros. deserialize accepts only this
// canonical form, which makes serialization a bijection between valid
// snapshots and their byte streams.

inline std::string serialize(const snapshot& snap) {
    std::string out;
    auto line = [&out](std::string_view key, std::string_view value) {
        out += key;
        out += ' ';
        out += value;
        out += '\n';
    };
    line("version", "1");
    line("taken_at_ns", std::to_string(snap.taken_at_ns));
    line("sampling_rate", std::to_string(snap.sampling_rate));
    line("enabled", snap.enabled ? "true" : "false");
    line("total_live_bytes", std::to_string(snap.total_live_bytes));
    line("global_peak_bytes", std::to_string(snap.global_peak_bytes));
    line("unmatched_frees", std::to_string(snap.unmatched_frees));
    line("nodes", std::to_string(snap.nodes.size()));
    for (const snapshot_node& node : snap.nodes) {
        line("path", node.path);
        line("live_bytes", std::to_string(node.cell.live_bytes));
        line("live_count", std::to_string(node.cell.live_count));
        line("cumulative_bytes", std::to_string(node.cell.cumulative_bytes));
        line("cumulative_count", std::to_string(node.cell.cumulative_count));
        line("peak_live_bytes", std::to_string(node.cell.peak_live_bytes));
    }
    return out;
}

namespace detail {

class snapshot_parser {
public:
    explicit snapshot_parser(std::string_view text) : text_(text) {}

    snapshot parse() {
        snapshot snap;
        if (value_for("version") != "1") {
            throw malformed_snapshot("unsupported snapshot version");
        }
        snap.taken_at_ns = parse_u64(value_for("taken_at_ns"));
        std::uint64_t rate = parse_u64(value_for("sampling_rate"));
        if (rate < 1 || rate > 0xFFFFFFFFull) {
            throw malformed_snapshot("sampling_rate out of range");
        }
        snap.sampling_rate = static_cast<std::uint32_t>(rate);
        snap.enabled = parse_bool(value_for("enabled"));
        snap.total_live_bytes = parse_u64(value_for("total_live_bytes"));
        snap.global_peak_bytes = parse_u64(value_for("global_peak_bytes"));
        snap.unmatched_frees = parse_u64(value_for("unmatched_frees"));
        std::uint64_t count = parse_u64(value_for("nodes"));
        for (std::uint64_t i = 0; i < count; ++i) {
            snapshot_node node;
            node.path = std::string(value_for("path"));
            try {
                budget_set::validate_path_string(node.path);
            } catch (const malformed_path& e) {
                throw malformed_snapshot(e.what());
            }
            if (!snap.nodes.empty() && snap.nodes.back().path >= node.path) {
                throw malformed_snapshot("node paths must be strictly ascending");
            }
            node.cell.live_bytes = parse_u64(value_for("live_bytes"));
            node.cell.live_count = parse_u64(value_for("live_count"));
            node.cell.cumulative_bytes = parse_u64(value_for("cumulative_bytes"));
            node.cell.cumulative_count = parse_u64(value_for("cumulative_count"));
            node.cell.peak_live_bytes = parse_u64(value_for("peak_live_bytes"));
            snap.nodes.push_back(std::move(node));
        }
        if (pos_ != text_.size()) {
            throw malformed_snapshot("trailing content after node list");
        }
        return snap;
    }

private:
    std::string_view next_line() {
        if (pos_ >= text_.size()) {
            throw malformed_snapshot("unexpected end of input");
        }
        std::size_t eol = text_.find('\n', pos_);
        if (eol == std::string_view::npos) {
            throw malformed_snapshot("missing line terminator");
        }
        std::string_view line = text_.substr(pos_, eol - pos_);
        pos_ = eol + 1;
        return line;
    }

    std::string_view value_for(std::string_view key) {
        std::string_view line = next_line();
        if (line.size() < key.size() + 2 || line.compare(0, key.size(), key) != 0 ||
            line[key.size()] != ' ') {
            throw malformed_snapshot("expected key \"" + std::string(key) + "\"");
        }
        return line.substr(key.size() + 1);
    }

    static std::uint64_t parse_u64(std::string_view value) {
        if (value.empty() || value.size() > 20) {
            throw malformed_snapshot("malformed integer");
        }
        if (value.size() > 1 && value.front() == '0') {
            throw malformed_snapshot("integers must not have leading zeros");
        }
        std::uint64_t result = 0;
        for (char c : value) {
            if (c < '0' || c > '9') {
                throw malformed_snapshot("malformed integer");
            }
            std::uint64_t digit = static_cast<std::uint64_t>(c - '0');
            if (result > (UINT64_MAX - digit) / 10) {
                throw malformed_snapshot("integer out of range");
            }
            result = result * 10 + digit;
        }
        return result;
    }

    static bool parse_bool(std::string_view value) {
        if (value == "true") {
            return true;
        }
        if (value == "false") {
            return false;
        }
        throw malformed_snapshot("malformed boolean");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline snapshot deserialize(std::string_view bytes) {
    return detail::snapshot_parser(bytes).parse();
}

// ---- budgets file -----------------------------------------------------------
//
// One "path<TAB>max_bytes" entry per line; blank lines and lines whose first
// non-space character is '#' are ignored.

inline budget_set parse_budgets(std::string_view text) {
    budget_set budgets;
    std::size_t pos = 0;
    std::size_t line_number = 0;
    while (pos <= text.size()) {
        if (pos == text.size()) {
            break;
        }
        std::size_t eol = text.find('\n', pos);
        std::string_view line = (eol == std::string_view::npos) ? text.substr(pos)
                                                                : text.substr(pos, eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() : eol + 1;
        line_number += 1;

        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos || line[first] == '#') {
            continue;
        }
        std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw malformed_budgets("line " + std::to_string(line_number) +
                                    ": expected path<TAB>max_bytes");
        }
        std::string_view path = line.substr(0, tab);
        std::string_view value = line.substr(tab + 1);
        while (!value.empty() && (value.back() == '\r' || value.back() == ' ')) {
            value.remove_suffix(1);
        }
        if (value.empty() ||
            value.find_first_not_of("0123456789") != std::string_view::npos) {
            throw malformed_budgets("line " + std::to_string(line_number) +
                                    ": malformed byte count");
        }
        std::uint64_t max_bytes = 0;
        for (char c : value) {
            std::uint64_t digit = static_cast<std::uint64_t>(c - '0');
            if (max_bytes > (UINT64_MAX - digit) / 10) {
                throw malformed_budgets("line " + std::to_string(line_number) +
                                        ": byte count out of range");
            }
            max_bytes = max_bytes * 10 + digit;
        }
        try {
            budgets.set_budget(path, max_bytes);
        } catch (const malformed_path&) {
            throw malformed_budgets("line " + std::to_string(line_number) + ": invalid path");
        }
    }
    return budgets;
}

} // namespace memattr

#endif // MEMATTR_SNAPSHOT_HPP
