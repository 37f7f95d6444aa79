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

// Command-line reporter over serialized snapshots.
//
// Exit codes: 0 success/compliant, 1 budget exceeded or leak found,
// 2 usage error, 3 input parse error.

#include "memattr/memattr.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_violation = 1;
constexpr int exit_usage = 2;
constexpr int exit_parse = 3;

struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw input_error("cannot open " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

memattr::snapshot load_snapshot(const std::string& path) {
    return memattr::deserialize(read_file(path));
}

memattr::stat_key parse_key(const std::string& key) {
    return key == "cumulative" ? memattr::stat_key::cumulative : memattr::stat_key::live;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"memattr - report on serialized memory attribution snapshots"};
    app.require_subcommand(1);

    std::string snapshot_file;
    std::string before_file;
    std::string after_file;
    std::string budgets_file;
    std::vector<std::string> verify_paths;
    std::uint64_t min_bytes = 0;
    std::uint32_t depth = std::numeric_limits<std::uint32_t>::max();
    std::size_t top_count = 10;
    std::string key = "live";

    CLI::App* report = app.add_subcommand("report", "Render the attribution tree");
    report->add_option("snapshot", snapshot_file, "snapshot file")->required();
    report->add_option("--min-bytes", min_bytes, "prune rows with rollup live bytes below this");
    report->add_option("--depth", depth, "prune rows deeper than this");

    CLI::App* top = app.add_subcommand("top", "Rank the heaviest tag paths");
    top->add_option("snapshot", snapshot_file, "snapshot file")->required();
    top->add_option("--n", top_count, "number of rows");
    top->add_option("--key", key, "ranking key")
        ->check(CLI::IsMember({"live", "cumulative"}));

    CLI::App* diff = app.add_subcommand("diff", "Compare two snapshots");
    diff->add_option("before", before_file, "baseline snapshot")->required();
    diff->add_option("after", after_file, "comparison snapshot")->required();
    diff->add_option("--key", key, "delta key")
        ->check(CLI::IsMember({"live", "cumulative"}));

    CLI::App* check = app.add_subcommand("check", "Check rollup live bytes against budgets");
    check->add_option("snapshot", snapshot_file, "snapshot file")->required();
    check->add_option("budgets", budgets_file, "budgets file (path<TAB>max_bytes)")->required();

    CLI::App* verify = app.add_subcommand("verify", "Verify tag paths are fully drained");
    verify->add_option("snapshot", snapshot_file, "snapshot file")->required();
    verify->add_option("paths", verify_paths, "tag paths to verify")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (report->parsed()) {
            memattr::report_options options;
            options.min_bytes = min_bytes;
            options.max_depth = depth;
            std::cout << memattr::render_report(load_snapshot(snapshot_file), options);
            return exit_ok;
        }
        if (top->parsed()) {
            if (top_count < 1) {
                std::cerr << "--n must be >= 1\n";
                return exit_usage;
            }
            std::cout << memattr::render_top(load_snapshot(snapshot_file), top_count,
                                             parse_key(key));
            return exit_ok;
        }
        if (diff->parsed()) {
            memattr::snapshot before = load_snapshot(before_file);
            memattr::snapshot after = load_snapshot(after_file);
            std::cout << memattr::render_diff(before, after, parse_key(key));
            return exit_ok;
        }
        if (check->parsed()) {
            memattr::snapshot snap = load_snapshot(snapshot_file);
            memattr::budget_set budgets = memattr::parse_budgets(read_file(budgets_file));
            memattr::check_rendering rendered = memattr::render_check(snap, budgets);
            std::cout << rendered.text;
            return rendered.exceeded ? exit_violation : exit_ok;
        }
        if (verify->parsed()) {
            memattr::snapshot snap = load_snapshot(snapshot_file);
            for (const std::string& path : verify_paths) {
                try {
                    memattr::budget_set::validate_path_string(path);
                } catch (const memattr::malformed_path& e) {
                    std::cerr << "invalid path argument \"" << path << "\": " << e.what() << "\n";
                    return exit_usage;
                }
            }
            memattr::verify_rendering rendered = memattr::render_verify(snap, verify_paths);
            std::cout << rendered.text;
            return rendered.all_drained ? exit_ok : exit_violation;
        }
    } catch (const memattr::malformed_snapshot& e) {
        std::cerr << "malformed snapshot: " << e.what() << "\n";
        return exit_parse;
    } catch (const memattr::malformed_budgets& e) {
        std::cerr << "malformed budgets: " << e.what() << "\n";
        return exit_parse;
    } catch (const input_error& e) {
        std::cerr << e.what() << "\n";
        return exit_parse;
    }
    return exit_usage;
}
