// Copyright 2026 The popnet Authors.
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


#include "popnet/log.hpp"

#include <iostream>
#include <mutex>

namespace popnet {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& sink() {
  static WarningHandler h = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(sink_mutex());
  auto previous = std::move(sink());
  sink() = std::move(handler);
  return previous;
}

void warn(std::string_view message) {
  WarningHandler h;
  {
    std::lock_guard lock(sink_mutex());
    h = sink();
  }
  if (h) h(message);
}

}  // namespace popnet
