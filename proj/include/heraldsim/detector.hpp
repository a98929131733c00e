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

#ifndef HERALDSIM_DETECTOR_HPP
#define HERALDSIM_DETECTOR_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "heraldsim/error.hpp"
#include "heraldsim/expop.hpp"
#include "heraldsim/numeric.hpp"

namespace heraldsim {

/// Largest bin count supported by the click models (bins are tracked as a 64-bit mask when sampling).
constexpr int max_detector_bins = 64;

/// N uniformly illuminated on-off detectors (or time bins) with overall efficiency eta.
struct DetectorConfig {
    int bins = 1;
    double efficiency = 1.0;

    void validate() const {
        require(bins >= 1 && bins <= max_detector_bins,
                "detector bins must lie in [1, " + std::to_string(max_detector_bins) + "], got " +
                    std::to_string(bins));
        require(efficiency >= 0.0 && efficiency <= 1.0,
                "detector efficiency must lie in [0, 1], got " + std::to_string(efficiency));
    }
};

/// Probabilities over 0..N joint clicks, optionally with standard errors from an estimate.
struct ClickDistribution {
    std::vector<double> probs;
    std::vector<double> sigmas;  // empty for exact theory values
    std::int64_t samples = 0;    // number of events behind an estimate; 0 for theory

    int bins() const {
        return static_cast<int>(probs.size()) - 1;
    }
    bool has_sigmas() const {
        return !sigmas.empty();
    }
    double total() const {
        return compensated_total(probs);
    }

    static ClickDistribution delta(int bins, int k) {
        ClickDistribution d;
        d.probs.assign(static_cast<std::size_t>(bins) + 1, 0.0);
        d.probs.at(static_cast<std::size_t>(k)) = 1.0;
        return d;
    }
};

/// Tolerance below zero that is treated as rounding rather than a logic error.
constexpr double negative_clip_tolerance = 1e-12;

inline double clip_probability(double p) {
    if (p >= 0) {
        return p;
    }
    if (p > -negative_clip_tolerance) {
        return 0.0;
    }
    fail(ErrorKind::numerical_failure, "probability " + std::to_string(p) + " is negative beyond rounding");
}

template <typename Real>
ClickDistribution to_click_distribution(const std::vector<Real> &values) {
    ClickDistribution d;
    d.probs.reserve(values.size());
    for (const auto &v : values) {
        d.probs.push_back(clip_probability(static_cast<double>(v)));
    }
    return d;
}

/// Stirling number of the second kind S(n, k) via S(n,k) = k S(n-1,k) + S(n-1,k-1).
inline std::uint64_t stirling2(int n, int k) {
    require(n >= 0 && k >= 0, "stirling2 requires non-negative arguments");
    require(n <= 64, "stirling2 supports n <= 64");
    if (k > n) {
        return 0;
    }
    std::vector<std::uint64_t> row(static_cast<std::size_t>(k) + 1, 0);
    row[0] = 1;  // S(0,0)
    for (int i = 1; i <= n; ++i) {
        int top = std::min(i, k);
        // Entries below k - (n - i) can no longer reach S(n, k).
        int lo = std::max(1, k - (n - i));
        for (int j = top; j >= lo; --j) {
            std::uint64_t scaled, sum;
            if (__builtin_mul_overflow(static_cast<std::uint64_t>(j), row[j], &scaled) ||
                __builtin_add_overflow(scaled, row[j - 1], &sum)) {
                fail(ErrorKind::overflow, "S(" + std::to_string(n) + "," + std::to_string(k) + ") exceeds 64 bits");
            }
            row[j] = sum;
        }
        row[0] = 0;
    }
    return row[k];
}

template <typename Real>
struct PovmTerm {
    Real coef;
    Real x;
};

/// Expansion Pi_k = C(N,k) sum_j C(k,j) (-1)^(k-j) E(1 - eta + eta j/N).
template <typename Real = Wide>
std::vector<PovmTerm<Real>> povm_terms(int k, const DetectorConfig &det) {
    det.validate();
    require(k >= 0 && k <= det.bins,
            "click count " + std::to_string(k) + " outside 0.." + std::to_string(det.bins));
    std::vector<PovmTerm<Real>> terms;
    terms.reserve(static_cast<std::size_t>(k) + 1);
    Real prefactor = binomial<Real>(det.bins, k);
    for (int j = 0; j <= k; ++j) {
        Real sign = ((k - j) % 2 == 0) ? Real(1) : Real(-1);
        Real x = attenuate_dual(Real(j) / Real(det.bins), det.efficiency);
        terms.push_back({prefactor * binomial<Real>(k, j) * sign, x});
    }
    return terms;
}

/// tr[m Pi_k].
template <typename Real>
Real click_probability(const ExpMixture<Real> &m, int k, const DetectorConfig &det) {
    CompensatedSum<Real> s;
    for (const auto &p : povm_terms<Real>(k, det)) {
        s.add(p.coef * pair_with(m, p.x));
    }
    return s.value();
}

/// Unnormalized click statistics tr[m Pi_k] for k = 0..N.
template <typename Real>
std::vector<Real> click_probabilities(const ExpMixture<Real> &m, const DetectorConfig &det) {
    det.validate();
    std::vector<Real> out;
    out.reserve(static_cast<std::size_t>(det.bins) + 1);
    for (int k = 0; k <= det.bins; ++k) {
        out.push_back(click_probability(m, k, det));
    }
    return out;
}

/// Click statistics of the Fock state |n>. Lossless detectors use the Stirling-number form.
inline ClickDistribution fock_click_distribution(int n, const DetectorConfig &det) {
    det.validate();
    require(n >= 0, "photon number must be >= 0");
    const int N = det.bins;
    std::vector<Wide> values(static_cast<std::size_t>(N) + 1, Wide(0));
    bool done = false;
    if (det.efficiency == 1.0 && n <= 64) {
        try {
            Wide denom = int_pow(Wide(N), n);
            for (int k = 0; k <= std::min(n, N); ++k) {
                // C(N,k) k! = N (N-1) ... (N-k+1)
                Wide falling(1);
                for (int i = 0; i < k; ++i) {
                    falling *= Wide(N - i);
                }
                values[k] = falling * Wide(stirling2(n, k)) / denom;
            }
            done = true;
        } catch (const Error &e) {
            if (e.kind() != ErrorKind::overflow) {
                throw;
            }
        }
    }
    if (!done) {
        for (int k = 0; k <= N; ++k) {
            CompensatedSum<Wide> s;
            for (const auto &p : povm_terms<Wide>(k, det)) {
                s.add(p.coef * int_pow(p.x, n));
            }
            values[k] = s.value();
        }
    }
    return to_click_distribution(values);
}

/// Bhattacharyya overlap sum_k sqrt(c_k) sqrt(d_k).
inline double bhattacharyya(const ClickDistribution &c, const ClickDistribution &d) {
    require(c.probs.size() == d.probs.size(), "Bhattacharyya overlap needs distributions over the same bins");
    CompensatedSum<double> s;
    for (std::size_t k = 0; k < c.probs.size(); ++k) {
        s.add(std::sqrt(clip_probability(c.probs[k])) * std::sqrt(clip_probability(d.probs[k])));
    }
    return s.value();
}

}  // namespace heraldsim

#endif
