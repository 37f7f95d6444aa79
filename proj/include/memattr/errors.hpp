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

#ifndef MEMATTR_ERRORS_HPP
#define MEMATTR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace memattr {

/// Base class for every error thrown by the library. Hook entry points
/// (on_alloc / on_free / on_resize) never let these escape to the host.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tag name is empty, contains '/', contains control bytes, or is too long.
class invalid_tag_name : public error {
public:
    using error::error;
};

/// Tag id was never assigned by the registry.
class unknown_tag_id : public error {
public:
    using error::error;
};

/// Path string violates the canonical grammar or segment rules.
class malformed_path : public error {
public:
    using error::error;
};

class root_has_no_parent : public error {
public:
    using error::error;
};

/// Scope nesting exceeds the fixed depth limit.
class depth_exceeded : public error {
public:
    using error::error;
};

/// Pop with a stale handle, on the wrong thread, or out of LIFO order.
class scope_mismatch : public error {
public:
    using error::error;
};

/// adopt_path requires an empty scope stack.
class stack_not_empty : public error {
public:
    using error::error;
};

/// Sampling rate below 1.
class invalid_rate : public error {
public:
    using error::error;
};

/// top_n called with n < 1.
class invalid_n : public error {
public:
    using error::error;
};

/// record_alloc saw an address that is already live.
class duplicate_address : public error {
public:
    using error::error;
};

/// record_resize targeted an address that is not live.
class unknown_address : public error {
public:
    using error::error;
};

/// Snapshot input failed strict parsing.
class malformed_snapshot : public error {
public:
    using error::error;
};

/// Budgets file failed parsing.
class malformed_budgets : public error {
public:
    using error::error;
};

/// Underlying allocator refused a traced allocation.
class allocation_failure : public error {
public:
    using error::error;
};

/// Caller violated a documented precondition (e.g. traced_alloc(0)).
class precondition_error : public error {
public:
    using error::error;
};

} // namespace memattr

#endif // MEMATTR_ERRORS_HPP
