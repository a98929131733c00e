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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "heraldsim/detector.hpp"
#include "heraldsim/mcsim.hpp"

using namespace heraldsim;

TEST(Stirling2, Examples) {
    EXPECT_EQ(stirling2(0, 0), 1u);
    EXPECT_EQ(stirling2(3, 2), 3u);
    EXPECT_EQ(stirling2(4, 7), 0u);
    EXPECT_EQ(stirling2(10, 4), 34105u);
    EXPECT_EQ(stirling2(64, 64), 1u);
    EXPECT_EQ(stirling2(64, 63), 2016u);
}

TEST(Stirling2, MatchesAlternatingSum) {
    for (int n = 0; n <= 10; ++n) {
        for (int k = 0; k <= 10; ++k) {
            // k! S(n,k) = sum_j C(k,j) (-1)^(k-j) j^n, exact in 64-bit integers here.
            std::int64_t s = 0;
            for (int j = 0; j <= k; ++j) {
                std::int64_t p = 1;
                for (int i = 0; i < n; ++i) {
                    p *= j;
                }
                s += ((k - j) % 2 ? -1 : 1) * static_cast<std::int64_t>(binomial_exact(k, j)) * p;
            }
            std::int64_t fact = 1;
            for (int i = 2; i <= k; ++i) {
                fact *= i;
            }
            EXPECT_EQ(static_cast<std::int64_t>(stirling2(n, k)), s / fact) << n << "," << k;
        }
    }
}

TEST(Stirling2, Overflow) {
    try {
        stirling2(64, 20);
        FAIL() << "expected overflow";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::overflow);
    }
    EXPECT_THROW(stirling2(65, 1), Error);
}

TEST(PovmTerms, Examples) {
    auto p0 = povm_terms<double>(0, {8, 1.0});
    ASSERT_EQ(p0.size(), 1u);
    EXPECT_EQ(p0[0].coef, 1.0);
    EXPECT_EQ(p0[0].x, 0.0);

    auto p1 = povm_terms<double>(1, {4, 1.0});
    ASSERT_EQ(p1.size(), 2u);
    EXPECT_EQ(p1[0].coef, -4.0);
    EXPECT_EQ(p1[0].x, 0.0);
    EXPECT_EQ(p1[1].coef, 4.0);
    EXPECT_EQ(p1[1].x, 0.25);

    EXPECT_THROW(povm_terms<double>(5, {4, 1.0}), Error);
    EXPECT_THROW(povm_terms<double>(-1, {4, 1.0}), Error);
}

TEST(PovmTerms, Completeness) {
    ExpMixture<Wide> m;
    m.add(Wide(0.8), Wide(0.1));
    m.add(Wide(-0.1), Wide(0.45));
    m.add(Wide(0.3), Wide(0.0));
    for (int N : {1, 2, 4, 8}) {
        for (double eta : {0.36, 0.75, 1.0}) {
            Wide sum(0);
            for (auto p : click_probabilities(m, {N, eta})) {
                sum += p;
            }
            EXPECT_NEAR(static_cast<double>(sum), static_cast<double>(trace(m)), 1e-12);
        }
    }
}

TEST(FockClicks, Examples) {
    auto vac = fock_click_distribution(0, {8, 1.0});
    EXPECT_EQ(vac.probs[0], 1.0);
    auto two = fock_click_distribution(2, {8, 1.0});
    EXPECT_EQ(two.probs[1], 0.125);
    EXPECT_EQ(two.probs[2], 0.875);
    auto three = fock_click_distribution(3, {8, 1.0});
    EXPECT_EQ(three.probs[1], 0.015625);
    EXPECT_EQ(three.probs[2], 0.328125);
    EXPECT_EQ(three.probs[3], 0.65625);
    for (int k = 4; k <= 8; ++k) {
        EXPECT_EQ(three.probs[static_cast<std::size_t>(k)], 0.0);
    }
}

TEST(FockClicks, NormalizedAndEqualToKernel) {
    for (int n = 0; n <= 12; ++n) {
        for (int N : {2, 4, 8}) {
            for (double eta : {0.38, 0.75, 1.0}) {
                auto c = fock_click_distribution(n, {N, eta});
                EXPECT_NEAR(c.total(), 1.0, 1e-12);
                auto k = click_kernel(n, {N, eta});
                for (std::size_t i = 0; i < k.size(); ++i) {
                    EXPECT_NEAR(c.probs[i], k[i], 1e-12) << n << " " << N << " " << eta;
                }
            }
        }
    }
}

TEST(FockClicks, MeanClicksIncreaseWithEfficiency) {
    for (int n = 1; n <= 6; ++n) {
        double last = -1;
        for (double eta : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
            auto c = fock_click_distribution(n, {8, eta});
            double mean = 0;
            for (int k = 0; k <= 8; ++k) {
                mean += k * c.probs[static_cast<std::size_t>(k)];
            }
            EXPECT_GT(mean, last);
            last = mean;
        }
    }
}

TEST(FockClicks, MatchesSampledBallsIntoBins) {
    constexpr int samples = 1'000'000;
    for (auto [n, N] : {std::pair{5, 4}, std::pair{3, 8}}) {
        std::vector<double> counts(static_cast<std::size_t>(N) + 1, 0);
        for (int s = 0; s < samples; ++s) {
            ShotRng rng(77, static_cast<std::uint64_t>(s));
            counts[static_cast<std::size_t>(detail::distinct_bins(rng, n, N))] += 1;
        }
        auto c = fock_click_distribution(n, {N, 1.0});
        for (int k = 0; k <= N; ++k) {
            double p = c.probs[static_cast<std::size_t>(k)];
            double se = std::sqrt(std::max(p * (1 - p), 1e-12) / samples);
            EXPECT_LE(std::abs(counts[static_cast<std::size_t>(k)] / samples - p), 4 * se) << n << " " << N << " " << k;
        }
    }
}

TEST(Bhattacharyya, Examples) {
    auto c = fock_click_distribution(3, {8, 0.5});
    EXPECT_NEAR(bhattacharyya(c, c), 1.0, 1e-12);
    ClickDistribution a{{1, 0, 0}, {}}, b{{0, 1, 0}, {}};
    EXPECT_EQ(bhattacharyya(a, b), 0.0);
    auto d = fock_click_distribution(2, {8, 0.5});
    EXPECT_EQ(bhattacharyya(c, d), bhattacharyya(d, c));
    ClickDistribution shorter{{1, 0}, {}};
    EXPECT_THROW(bhattacharyya(a, shorter), Error);
}

TEST(ClipProbability, RoundingVersusFailure) {
    EXPECT_EQ(clip_probability(-5e-13), 0.0);
    EXPECT_EQ(clip_probability(0.25), 0.25);
    try {
        clip_probability(-1e-9);
        FAIL() << "expected numerical failure";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::numerical_failure);
    }
}

TEST(DetectorConfig, Validation) {
    EXPECT_THROW((DetectorConfig{0, 1.0}.validate()), Error);
    EXPECT_THROW((DetectorConfig{4, 1.1}.validate()), Error);
    EXPECT_NO_THROW((DetectorConfig{4, 0.0}.validate()));
}
