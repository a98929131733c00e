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

#ifndef HERALDSIM_NUMERIC_HPP
#define HERALDSIM_NUMERIC_HPP

#include <cstdint>
#include <vector>

#include "heraldsim/error.hpp"

namespace heraldsim {

// Alternating binomial sums over exponential-operator terms cancel by many orders of
// magnitude for weak pumping, so the closed forms and the operator pipeline run in a
// wider type and only round to double at the API boundary.
#if defined(__SIZEOF_FLOAT128__)
using Wide = __float128;
#else
using Wide = long double;
#endif

template <typename Real>
constexpr Real abs_value(Real v) {
    return v < Real(0) ? -v : v;
}

template <typename Real>
constexpr Real int_pow(Real base, int exponent) {
    Real result(1);
    for (int i = 0; i < exponent; ++i) {
        result *= base;
    }
    return result;
}

/// Binomial coefficient C(n, k), zero outside 0 <= k <= n.
template <typename Real = double>
Real binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) {
        return Real(0);
    }
    if (k > n - k) {
        k = n - k;
    }
    Real result(1);
    for (int i = 1; i <= k; ++i) {
        result = result * Real(n - k + i) / Real(i);
    }
    return result;
}

/// Exact binomial coefficient; throws on uint64 overflow.
inline std::uint64_t binomial_exact(int n, int k) {
    require(n >= 0, "binomial_exact requires n >= 0");
    if (k < 0 || k > n) {
        return 0;
    }
    if (k > n - k) {
        k = n - k;
    }
    std::uint64_t result = 1;
    for (int i = 1; i <= k; ++i) {
        // result * (n-k+i) is always divisible by i; divide by the gcd first to delay overflow.
        std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
        std::uint64_t den = static_cast<std::uint64_t>(i);
        std::uint64_t a = result, b = den;
        while (b != 0) {
            std::uint64_t t = a % b;
            a = b;
            b = t;
        }
        std::uint64_t g = a;
        std::uint64_t reduced = result / g;
        den /= g;
        num /= den;
        std::uint64_t product;
        if (__builtin_mul_overflow(reduced, num, &product)) {
            fail(ErrorKind::overflow, "binomial coefficient exceeds 64 bits");
        }
        result = product;
    }
    return result;
}

/// Neumaier-compensated running sum.
template <typename Real>
class CompensatedSum {
   public:
    void add(Real v) {
        Real t = sum_ + v;
        if (abs_value(sum_) >= abs_value(v)) {
            compensation_ += (sum_ - t) + v;
        } else {
            compensation_ += (v - t) + sum_;
        }
        sum_ = t;
    }

    CompensatedSum &operator+=(Real v) {
        add(v);
        return *this;
    }

    Real value() const {
        return sum_ + compensation_;
    }

   private:
    Real sum_{0};
    Real compensation_{0};
};

template <typename Real>
Real compensated_total(const std::vector<Real> &values) {
    CompensatedSum<Real> s;
    for (const auto &v : values) {
        s.add(v);
    }
    return s.value();
}

}  // namespace heraldsim

#endif
