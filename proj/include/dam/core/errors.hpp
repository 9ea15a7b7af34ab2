// Copyright 2026 The dam Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DAM_CORE_ERRORS_HPP
#define DAM_CORE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dam {

/// A training loss became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string component, long iteration)
      : std::runtime_error(component + " diverged at iteration " + std::to_string(iteration)),
        component_(std::move(component)),
        iteration_(iteration) {}

  const std::string& component() const { return component_; }
  long iteration() const { return iteration_; }

 private:
  std::string component_;
  long iteration_;
};

}  // namespace dam

#endif  // DAM_CORE_ERRORS_HPP
