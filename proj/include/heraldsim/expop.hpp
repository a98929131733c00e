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

#ifndef HERALDSIM_EXPOP_HPP
#define HERALDSIM_EXPOP_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "heraldsim/error.hpp"
#include "heraldsim/numeric.hpp"

namespace heraldsim {

/// One signed term w * E(x), where E(x) = x^n is diagonal in the photon-number basis.
template <typename Real>
struct ExpTerm {
    Real weight;
    Real x;
};

/// Signed mixture sum_i w_i E(x_i). Both heralded states and click POVM elements are of this form.
template <typename Real = Wide>
class ExpMixture {
   public:
    using term_type = ExpTerm<Real>;

    /// Terms whose arguments differ by less than this are merged by simplify().
    static constexpr double merge_tolerance = 1e-14;

    ExpMixture() = default;
    explicit ExpMixture(std::vector<term_type> terms) : terms_(std::move(terms)) {
    }

    static ExpMixture vacuum() {
        return ExpMixture({term_type{Real(1), Real(0)}});
    }

    const std::vector<term_type> &terms() const {
        return terms_;
    }
    std::size_t size() const {
        return terms_.size();
    }
    bool empty() const {
        return terms_.empty();
    }

    void add(Real weight, Real x) {
        terms_.push_back(term_type{weight, x});
    }

    /// Disjoint union; trace is additive over it.
    ExpMixture &operator+=(const ExpMixture &other) {
        terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
        return *this;
    }

    /// Sorts by argument, merges near-equal arguments and drops vanishing weights.
    void simplify() {
        std::sort(terms_.begin(), terms_.end(), [](const term_type &a, const term_type &b) {
            return a.x < b.x;
        });
        std::vector<term_type> merged;
        merged.reserve(terms_.size());
        for (const auto &t : terms_) {
            if (!merged.empty() && abs_value(t.x - merged.back().x) < Real(merge_tolerance)) {
                merged.back().weight += t.weight;
            } else {
                merged.push_back(t);
            }
        }
        std::erase_if(merged, [](const term_type &t) {
            return abs_value(t.weight) < Real(1e-300);
        });
        terms_ = std::move(merged);
    }

   private:
    std::vector<term_type> terms_;
};

using Mixture = ExpMixture<Wide>;

/// Two-mode squeezer strength. gamma = cosh^2(zeta) is the gain.
struct SqueezeParams {
    double zeta = 0.0;
    double gamma = 1.0;

    /// Pair-generation parameter (gamma - 1) / gamma = tanh^2(zeta).
    double lambda() const {
        return (gamma - 1.0) / gamma;
    }
};

inline SqueezeParams gain_from_zeta(double zeta) {
    if (!std::isfinite(zeta) || zeta < 0) {
        fail(ErrorKind::invalid_argument, "squeezing amplitude must be finite and >= 0, got " + std::to_string(zeta));
    }
    double c = std::cosh(zeta);
    return SqueezeParams{zeta, c * c};
}

/// tr E(x) = 1/(1-x), summed over the mixture.
template <typename Real>
Real trace(const ExpMixture<Real> &m) {
    CompensatedSum<Real> s;
    for (const auto &t : m.terms()) {
        if (!(t.x < Real(1))) {
            fail(ErrorKind::divergent_trace, "exponential-operator argument >= 1 has no finite trace");
        }
        s.add(t.weight / (Real(1) - t.x));
    }
    return s.value();
}

/// tr[m E(y)] = sum_i w_i / (1 - x_i y). This is the pairing between a state and a POVM term.
template <typename Real>
Real pair_with(const ExpMixture<Real> &m, Real y) {
    CompensatedSum<Real> s;
    for (const auto &t : m.terms()) {
        Real denom = Real(1) - t.x * y;
        if (!(denom > Real(0))) {
            fail(ErrorKind::divergent_trace, "kernel argument product >= 1");
        }
        s.add(t.weight / denom);
    }
    return s.value();
}

/// E(a) E(b) = E(ab).
template <typename Real>
constexpr Real product_arg(Real a, Real b) {
    return a * b;
}

/// Propagation loss on the state side: (w, x) -> (w / (1-(1-eta)x), eta x / (1-(1-eta)x)).
template <typename Real>
ExpMixture<Real> attenuate_state(const ExpMixture<Real> &m, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) {
        fail(ErrorKind::invalid_argument, "efficiency must lie in [0, 1], got " + std::to_string(eta));
    }
    Real e(eta);
    Real loss = Real(1) - e;
    std::vector<ExpTerm<Real>> out;
    out.reserve(m.size());
    for (const auto &t : m.terms()) {
        Real d = Real(1) - loss * t.x;
        out.push_back({t.weight / d, e * t.x / d});
    }
    return ExpMixture<Real>(std::move(out));
}

/// Detector inefficiency on the measurement side: x -> 1 - eta + eta x.
template <typename Real>
constexpr Real attenuate_dual(Real x, double eta) {
    Real e(eta);
    return Real(1) - e + e * x;
}

template <typename Real>
struct SqueezerOutput {
    Real weight_factor;
    Real arg;
};

/// Squeezer with inputs E(x) and vacuum, idler paired with E(z): (1/gamma) E((x + (gamma-1) z) / gamma).
template <typename Real>
SqueezerOutput<Real> squeezer_output_arg(Real x, Real z, Real gamma) {
    if (!(gamma >= Real(1))) {
        fail(ErrorKind::invalid_argument, "squeezer gain must be >= 1");
    }
    return {Real(1) / gamma, (x + (gamma - Real(1)) * z) / gamma};
}

template <typename Real>
ExpMixture<Real> normalize(const ExpMixture<Real> &m) {
    Real tr = trace(m);
    if (!(tr > Real(0))) {
        fail(ErrorKind::non_physical_mixture,
             "mixture trace " + std::to_string(static_cast<double>(tr)) + " is not positive");
    }
    std::vector<ExpTerm<Real>> out;
    out.reserve(m.size());
    for (const auto &t : m.terms()) {
        out.push_back({t.weight / tr, t.x});
    }
    return ExpMixture<Real>(std::move(out));
}

}  // namespace heraldsim

#endif
