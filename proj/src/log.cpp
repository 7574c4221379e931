// Copyright 2026 The LVCC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lvcc/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace lvcc::log {
namespace {

std::atomic<Level> current{Level::kInfo};
std::mutex mu;

void emit(Level level, const char* tag, std::string_view message) {
  if (level < current.load()) return;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[" << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { current = level; }
void info(std::string_view message) { emit(Level::kInfo, "info", message); }
void warn(std::string_view message) { emit(Level::kWarning, "warn", message); }
void error(std::string_view message) { emit(Level::kError, "error", message); }

}  // namespace lvcc::log
