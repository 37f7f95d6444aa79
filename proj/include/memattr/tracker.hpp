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

#ifndef MEMATTR_TRACKER_HPP
#define MEMATTR_TRACKER_HPP

#include "memattr/interceptor.hpp"
#include "memattr/scope.hpp"
#include "memattr/snapshot.hpp"
#include "memattr/tags.hpp"
#include "memattr/tree.hpp"

#include <string_view>
#include <utility>

namespace memattr {

/// Owns one registry, one attribution tree, and one interceptor wired
/// together. Most hosts want exactly this bundle.
class tracker {
public:
    explicit tracker(interceptor_options options = interceptor_options::from_env())
        : interceptor_(tree_, std::move(options)) {}

    tag_registry& registry() noexcept { return registry_; }
    const tag_registry& registry() const noexcept { return registry_; }
    attribution_tree& tree() noexcept { return tree_; }
    const attribution_tree& tree() const noexcept { return tree_; }
    interceptor& hooks() noexcept { return interceptor_; }
    const interceptor& hooks() const noexcept { return interceptor_; }

    tag_id intern(std::string_view name) { return registry_.intern(name); }

    /// Guard that bills this thread's allocations to the named scope.
    scoped_tag scope(std::string_view name) { return scoped_tag(registry_, name); }

    snapshot take_snapshot() const {
        return memattr::take_snapshot(tree_, registry_, interceptor_.clock()(),
                                      interceptor_.sampling_rate(), interceptor_.enabled());
    }

    void reset() { tree_.reset(); }

private:
    tag_registry registry_;
    attribution_tree tree_;
    interceptor interceptor_;
};

} // namespace memattr

#endif // MEMATTR_TRACKER_HPP
