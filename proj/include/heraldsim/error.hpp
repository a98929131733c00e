// Copyright 2026 The heraldsim Authors
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

#ifndef HERALDSIM_ERROR_HPP
#define HERALDSIM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace heraldsim {

enum class ErrorKind {
    invalid_argument,
    divergent_trace,
    non_physical_mixture,
    numerical_failure,
    overflow,
    insufficient_data,
    cutoff_exceeded,
    fit_failure,
    io,
};

inline const char *error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument:
            return "invalid-argument";
        case ErrorKind::divergent_trace:
            return "divergent-trace";
        case ErrorKind::non_physical_mixture:
            return "non-physical-mixture";
        case ErrorKind::numerical_failure:
            return "numerical-failure";
        case ErrorKind::overflow:
            return "overflow";
        case ErrorKind::insufficient_data:
            return "insufficient-data";
        case ErrorKind::cutoff_exceeded:
            return "cutoff-exceeded";
        case ErrorKind::fit_failure:
            return "fit-failure";
        case ErrorKind::io:
            return "io";
    }
    return "unknown";
}

/// Every failure raised by the library carries a kind so front ends can map it to an exit code.
class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {
    }

    ErrorKind kind() const noexcept {
        return kind_;
    }

   private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string &message) {
    if (!condition) {
        fail(ErrorKind::invalid_argument, message);
    }
}

}  // namespace heraldsim

#endif
