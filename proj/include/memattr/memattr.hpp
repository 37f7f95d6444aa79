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

#ifndef MEMATTR_MEMATTR_HPP
#define MEMATTR_MEMATTR_HPP

#include "memattr/errors.hpp"
#include "memattr/interceptor.hpp"
#include "memattr/report.hpp"
#include "memattr/scope.hpp"
#include "memattr/snapshot.hpp"
#include "memattr/tags.hpp"
#include "memattr/tracker.hpp"
#include "memattr/tree.hpp"

#endif // MEMATTR_MEMATTR_HPP
