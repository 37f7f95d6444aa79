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

// Minimal walkthrough: scope tagging, an explicit per-call tag, a resize,
// and a snapshot written to disk for the memattr CLI.

#include "memattr/memattr.hpp"

#include <fstream>
#include <iostream>
#include <vector>

namespace {

memattr::tracker g_tracker;

void load_assets() {
    auto guard = g_tracker.scope("assets");
    void* textures = g_tracker.hooks().traced_alloc(64 * 1024);
    void* sounds = g_tracker.hooks().traced_alloc(16 * 1024);
    sounds = g_tracker.hooks().traced_resize(sounds, 24 * 1024);
    g_tracker.hooks().traced_free(textures);
    g_tracker.hooks().traced_free(sounds);
}

void open_connection() {
    auto guard = g_tracker.scope("net");
    {
        auto inner = g_tracker.scope("http");
        void* buffer = g_tracker.hooks().traced_alloc(8 * 1024);
        g_tracker.hooks().traced_free(buffer);
    }
    // An allocation billed to networking no matter what scope is active.
    void* socket_pool = g_tracker.hooks().traced_alloc(4096, g_tracker.intern("libnetwork"));
    g_tracker.hooks().traced_free(socket_pool);
}

} // namespace

int main() {
    load_assets();
    open_connection();

    // Something the tracker never saw.
    g_tracker.hooks().on_free(0xDEADBEEF);

    memattr::snapshot snap = g_tracker.take_snapshot();
    std::ofstream("minimal.snap", std::ios::binary) << memattr::serialize(snap);

    std::cout << memattr::render_report(snap);
    std::cout << "\nwrote minimal.snap (try: memattr report minimal.snap)\n";
    return 0;
}
