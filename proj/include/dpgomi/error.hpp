//
// Copyright 2026 The dpgomi Authors
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
//

#ifndef DPGOMI_ERROR_HPP
#define DPGOMI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dpgomi {

// Error classes surfaced by the library. Each maps to a distinct CLI exit
// code (see exit_code()).
enum class ErrorCode {
  kGeneric = 1,
  kInvalidArgument = 2,
  kIoFormat = 3,
  kTrainingFailure = 4,
  kBudgetExhausted = 5,
  kInversionFailure = 6,
  kContractViolation = 7,
  kProvenance = 8,
  kEmptyResult = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

inline Error invalid_argument(const std::string& msg) {
  return Error(ErrorCode::kInvalidArgument, msg);
}
inline Error io_error(const std::string& msg) {
  return Error(ErrorCode::kIoFormat, msg);
}
inline Error contract_violation(const std::string& msg) {
  return Error(ErrorCode::kContractViolation, msg);
}

#define DPGOMI_CHECK_ARG(cond, msg)          \
  do {                                       \
    if (!(cond)) throw ::dpgomi::invalid_argument(msg); \
  } while (0)

}  // namespace dpgomi

#endif  // DPGOMI_ERROR_HPP
