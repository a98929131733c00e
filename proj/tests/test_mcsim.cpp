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

#include "heraldsim/mcsim.hpp"
#include "heraldsim/protocol.hpp"

using namespace heraldsim;

namespace {

// Fock-space chain at 50 digits (tests/oracle/fock_chain.py).
const std::vector<double> ref20_z03{0.55069874708243412,    0.37285903433282086,   0.071318962529360059,
                                    0.0049061448298873484,  0.00021072134871652867, 6.2603295749271372e-6,
                                    1.2789163286294004e-7,  1.6453996365778946e-9, 1.0173657533034914e-11};
const std::vector<double> ref2_prefix_z03{0.53121692259137212,   0.37881910187211748,    0.082044924418687745,
                                          0.0074657685641564092, 0.00043506987004285072, 1.770569069790653e-5,
                                          4.9806226660295895e-7, 8.8547910229520965e-9,  7.5867863282230066e-11};
const std::vector<double> ref111_z025{0.3345338104729109,     0.4603353868612861,    0.17900118075935898,
                                      0.024651964137645383,   0.0014277160825337104, 4.886892423203045e-5,
                                      1.0589432684908318e-6,  1.3736021827819682e-8, 8.2742586226114234e-11};

double sum(const std::vector<double> &v) {
    double s = 0;
    for (double x : v) {
        s += x;
    }
    return s;
}

}  // namespace

TEST(GainKernel, Examples) {
    auto g0 = gain_kernel(0, 0.0, 3);
    EXPECT_EQ(g0, (std::vector<double>{1, 0, 0, 0}));
    auto g = gain_kernel(2, 0.5, 2);
    EXPECT_DOUBLE_EQ(g[0], 0.125);
    EXPECT_DOUBLE_EQ(g[1], 3 * 0.5 * 0.125);
    EXPECT_DOUBLE_EQ(g[2], 6 * 0.25 * 0.125);
    EXPECT_THROW(gain_kernel(0, 1.0, 3), Error);
    EXPECT_THROW(gain_kernel(-1, 0.1, 3), Error);
}

TEST(GainKernel, RowsSumToOneAndMeanIsStimulated) {
    for (int m : {0, 1, 5, 20}) {
        for (double lam : {0.01, 0.1, 0.3}) {
            auto g = gain_kernel(m, lam, 400);
            EXPECT_NEAR(sum(g), 1.0, 1e-12);
            double mean = 0;
            for (std::size_t j = 0; j < g.size(); ++j) {
                mean += static_cast<double>(j) * g[j];
            }
            EXPECT_NEAR(mean, (m + 1) * lam / (1 - lam), 1e-10);
        }
    }
}

TEST(LossKernel, ExamplesAndComposition) {
    EXPECT_EQ(loss_kernel(0, 0.3), (std::vector<double>{1}));
    auto k = loss_kernel(2, 0.5);
    EXPECT_DOUBLE_EQ(k[0], 0.25);
    EXPECT_DOUBLE_EQ(k[1], 0.5);
    EXPECT_DOUBLE_EQ(k[2], 0.25);
    EXPECT_EQ(loss_kernel(3, 1.0), (std::vector<double>{0, 0, 0, 1}));
    EXPECT_THROW(loss_kernel(3, 1.5), Error);
    const int n = 7;
    auto direct = loss_kernel(n, 0.6 * 0.7);
    std::vector<double> twice(n + 1, 0.0);
    auto first = loss_kernel(n, 0.6);
    for (int s = 0; s <= n; ++s) {
        auto second = loss_kernel(s, 0.7);
        for (int r = 0; r <= s; ++r) {
            twice[static_cast<std::size_t>(r)] += first[static_cast<std::size_t>(s)] * second[static_cast<std::size_t>(r)];
        }
    }
    for (int r = 0; r <= n; ++r) {
        EXPECT_NEAR(twice[static_cast<std::size_t>(r)], direct[static_cast<std::size_t>(r)], 1e-15);
    }
}

TEST(ExactChain, MatchesFrozenOracle) {
    auto ref = LoopConfig::reference(0.3, 0.6);
    auto r20 = exact_chain(ref, HeraldPattern::parse("(2,0)"));
    EXPECT_NEAR(r20.probability / 0.00071946474917514207, 1.0, 1e-11);
    for (std::size_t k = 0; k < ref20_z03.size(); ++k) {
        EXPECT_NEAR(r20.clicks.probs[k], ref20_z03[k], 1e-12) << k;
    }
    auto r11 = exact_chain(ref, HeraldPattern::parse("(1,1)"));
    EXPECT_NEAR(r11.probability / 0.0016222176652828962, 1.0, 1e-11);
    EXPECT_LE(r11.tail_mass, 1e-12);

    auto three = exact_chain(LoopConfig::reference(0.25, 0.55), HeraldPattern::feedback(3));
    EXPECT_NEAR(three.probability / 3.3659807957899051e-5, 1.0, 1e-11);
    for (std::size_t k = 0; k < ref111_z025.size(); ++k) {
        EXPECT_NEAR(three.clicks.probs[k], ref111_z025[k], 1e-12) << k;
    }
}

TEST(ExactChain, PrefixPatternMarginalizesLaterPasses) {
    auto ref = LoopConfig::reference(0.3, 0.6);
    auto r = exact_chain(ref, HeraldPattern::parse("(2)"), {}, {}, 2);
    EXPECT_NEAR(r.probability / 0.00077614053645874262, 1.0, 1e-11);
    for (std::size_t k = 0; k < ref2_prefix_z03.size(); ++k) {
        EXPECT_NEAR(r.clicks.probs[k], ref2_prefix_z03[k], 1e-12) << k;
    }
    double split = 0;
    for (int k = 0; k <= 4; ++k) {
        split += exact_chain(ref, HeraldPattern{{2, k}}).probability;
    }
    EXPECT_NEAR(split / r.probability, 1.0, 1e-12);
    // Without further passes the prefix is just the one-pass pattern.
    auto single = exact_chain(ref, HeraldPattern::parse("(2)"));
    EXPECT_NEAR(single.probability, exact_chain(ref, HeraldPattern::parse("(2)"), {}, {}, 1).probability, 1e-18);
}

TEST(ExactChain, AgreesWithOperatorPipeline) {
    for (const char *s : {"(1)", "(2)", "(1,1)", "(2,1)", "(0,1)", "(1,1,1)"}) {
        auto pat = HeraldPattern::parse(s);
        for (double z : {0.1, 0.25}) {
            auto cfg = LoopConfig::reference(z, 0.55);
            auto chain = exact_chain(cfg, pat);
            auto op = run_pattern(cfg, pat);
            EXPECT_NEAR(chain.probability / static_cast<double>(op.probability), 1.0, 1e-10) << s;
            auto c = signal_distribution(op.state, cfg.signal);
            for (std::size_t k = 0; k < c.probs.size(); ++k) {
                EXPECT_NEAR(chain.clicks.probs[k], c.probs[k], 1e-10) << s << " k=" << k;
            }
        }
    }
}

TEST(ExactChain, ProbabilityConservedOverPatterns) {
    auto cfg = LoopConfig::reference(0.3, 0.6);
    double total = 0;
    for (int a = 0; a <= 4; ++a) {
        for (int b = 0; b <= 4; ++b) {
            total += exact_chain(cfg, HeraldPattern{{a, b}}).probability;
        }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ExactChain, CutoffCeilingReported) {
    CutoffPolicy tight{4, 4, 1e-12};
    EXPECT_THROW(
        {
            try {
                exact_chain(LoopConfig::reference(0.35), HeraldPattern::parse("(1,1)"), tight);
            } catch (const Error &e) {
                EXPECT_EQ(e.kind(), ErrorKind::cutoff_exceeded);
                throw;
            }
        },
        Error);
}

TEST(ExactChain, NoPump) {
    auto r = exact_chain(LoopConfig::reference(0.0), HeraldPattern::parse("(1)"));
    EXPECT_EQ(r.probability, 0.0);
    EXPECT_TRUE(r.clicks.probs.empty());
}

TEST(Sampler, DeterministicAndThreadIndependent) {
    auto cfg = LoopConfig::reference(0.3);
    auto a = sample_records(cfg, 2, 20000, 7, 1);
    auto b = sample_records(cfg, 2, 20000, 7, 3);
    auto c = sample_records(cfg, 2, 20000, 8, 1);
    ASSERT_EQ(a.size(), 20000u);
    bool differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].pattern(), b[i].pattern());
        EXPECT_EQ(a[i].signal, b[i].signal);
        differ = differ || !(a[i].pattern() == c[i].pattern()) || a[i].signal != c[i].signal;
    }
    EXPECT_TRUE(differ);
    auto one = sample_shot(cfg, 2, 7, 12345);
    EXPECT_EQ(one.pattern(), a[12345].pattern());
    EXPECT_EQ(one.signal, a[12345].signal);
}

TEST(Sampler, NoPumpGivesNoClicks) {
    auto recs = sample_records(LoopConfig::reference(0.0), 3, 5000, 1);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto r = recs[i];
        EXPECT_EQ(r.signal, 0);
        EXPECT_EQ(r.pattern(), (HeraldPattern{{0, 0, 0}}));
    }
}

TEST(Sampler, RejectsBadInput) {
    auto cfg = LoopConfig::reference(0.3);
    EXPECT_THROW(sample_records(cfg, 2, 0, 1), Error);
    EXPECT_THROW(sample_records(cfg, 0, 10, 1), Error);
    EXPECT_THROW(sample_records(cfg, 33, 10, 1), Error);
    cfg.loop_eff = {0.5, 0.5};
    EXPECT_THROW(sample_records(cfg, 2, 10, 1), Error);
}

TEST(Sampler, SinglePassFrequencyMatchesChain) {
    auto cfg = LoopConfig::reference(0.35);
    const std::uint64_t shots = 400000;
    auto recs = sample_records(cfg, 1, shots, 99, 2);
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        hits += recs[i].matches(HeraldPattern::direct(1)) ? 1 : 0;
    }
    double p = exact_chain(cfg, HeraldPattern::direct(1)).probability;
    double sigma = std::sqrt(p * (1 - p) / static_cast<double>(shots));
    EXPECT_LT(std::abs(static_cast<double>(hits) / static_cast<double>(shots) - p), 5 * sigma);
}

TEST(ClickRecord, PrefixMatching) {
    ClickRecord r;
    r.passes = 2;
    r.herald[0] = 2;
    r.herald[1] = 0;
    EXPECT_TRUE(r.matches(HeraldPattern::parse("(2)")));
    EXPECT_TRUE(r.matches(HeraldPattern::parse("(2,0)")));
    EXPECT_FALSE(r.matches(HeraldPattern::parse("(2,1)")));
    EXPECT_FALSE(r.matches(HeraldPattern::parse("(1)")));
    EXPECT_FALSE(r.matches(HeraldPattern::parse("(2,0,0)")));
}
