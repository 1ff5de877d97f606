// Copyright (c) 2026 The Comix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COMIX_UTIL_SUBPROCESS_H_
#define COMIX_UTIL_SUBPROCESS_H_

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace comix {

// Runs `command` through /bin/sh, writes `lines` (newline-terminated) to its
// stdin, closes stdin, and collects stdout lines until EOF. Returns nullopt if
// the process cannot be started, exits non-zero, or exceeds `timeout` (the
// child is killed). Each call spawns a fresh process, so calls are
// independently retryable.
std::optional<std::vector<std::string>> RunLineProtocol(
    const std::string& command, const std::vector<std::string>& lines,
    std::chrono::milliseconds timeout);

}  // namespace comix

#endif  // COMIX_UTIL_SUBPROCESS_H_
