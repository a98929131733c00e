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

#include "heraldsim/analysis.hpp"
#include "heraldsim/mcsim.hpp"

using namespace heraldsim;

namespace {

ClickHistogram hist(std::vector<std::int64_t> counts) {
    return ClickHistogram{std::move(counts)};
}

// Expected counts for one pattern at `total` records: round(P * total * c_k).
FitObservation expected_observation(const LoopConfig &cfg, const char *pattern, int setting, double total) {
    auto pat = HeraldPattern::parse(pattern);
    auto r = exact_chain(cfg, pat);
    FitObservation o;
    o.setting = setting;
    o.pattern = pat;
    o.total = static_cast<std::int64_t>(total);
    o.hist = ClickHistogram::zeros(cfg.signal.bins);
    for (std::size_t k = 0; k < r.clicks.probs.size(); ++k) {
        o.hist.counts[k] = std::llround(r.probability * total * r.clicks.probs[k]);
    }
    return o;
}

}  // namespace

TEST(Proportion, Examples) {
    auto p = proportion(50, 100);
    EXPECT_DOUBLE_EQ(p.value, 0.5);
    EXPECT_NEAR(p.sigma, std::sqrt(0.25 / 99), 1e-15);
    EXPECT_EQ(proportion(0, 10).sigma, 0.0);
    EXPECT_THROW(proportion(0, 0), Error);
}

TEST(EstimateStatistics, Examples) {
    auto c = estimate_statistics(hist({50, 50}));
    EXPECT_DOUBLE_EQ(c.probs[0], 0.5);
    EXPECT_NEAR(c.sigmas[0], 0.050251890762960605, 1e-15);
    EXPECT_EQ(c.samples, 100);
    auto one = hist({0, 1});
    try {
        estimate_statistics(one);
        FAIL() << "expected insufficient data";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
    }
}

TEST(LinearStatistic, MeanAndSigma) {
    auto e = linear_statistic(hist({25, 50, 25}), {0, 1, 2});
    EXPECT_DOUBLE_EQ(e.value, 1.0);
    EXPECT_NEAR(e.sigma, std::sqrt(0.5 / 99), 1e-15);
    EXPECT_THROW(linear_statistic(hist({1, 1}), {0, 1, 2}), Error);
}

TEST(EstimateFidelity, SelfAndOrthogonal) {
    auto h = hist({10, 30, 60});
    auto c = estimate_statistics(h);
    auto self = estimate_fidelity(h, ClickDistribution{c.probs, {}, 0});
    EXPECT_NEAR(self.value, 1.0, 1e-15);
    auto orth = estimate_fidelity(hist({0, 40, 60}), ClickDistribution::delta(2, 0));
    EXPECT_EQ(orth.value, 0.0);
    EXPECT_THROW(estimate_fidelity(h, ClickDistribution::delta(3, 0)), Error);
}

TEST(EstimateFidelity, SigmaScalesWithEventCount) {
    auto target = ClickDistribution{{0.2, 0.5, 0.3}, {}, 0};
    auto a = estimate_fidelity(hist({20, 50, 30}), target);
    auto b = estimate_fidelity(hist({200, 500, 300}), target);
    EXPECT_NEAR(a.value, b.value, 1e-15);
    EXPECT_NEAR(b.sigma / a.sigma, std::sqrt(99.0 / 999.0), 1e-12);
}

TEST(EstimateNegativity, FockLikeHistogramIsNegative) {
    auto h = hist({0, 1000, 0, 0, 0, 0, 0, 0, 0});
    auto n = estimate_negativity(h);
    EXPECT_NEAR(n.value, -0.015388203202207569, 1e-12);
    EXPECT_EQ(n.sigma, 0.0);
    auto mixed = hist({400, 500, 100, 0, 0, 0, 0, 0, 0});
    auto m = estimate_negativity(mixed);
    EXPECT_GT(m.sigma, 0.0);
    EXPECT_NEAR(m.significance, std::abs(m.value) / m.sigma, 1e-12);
}

TEST(CovarianceDiagnostics, AgreeWithBootstrap) {
    auto h = hist({3000, 6000, 1000});
    auto target = ClickDistribution{{0.25, 0.55, 0.20}, {}, 0};
    double boot = bootstrap_sigma(
        h, [&](const ClickHistogram &x) { return estimate_fidelity(x, target).value; }, 2000, 5);
    EXPECT_NEAR(fidelity_sigma_multinomial(h, target) / boot, 1.0, 0.1);
    EXPECT_THROW(bootstrap_sigma(h, [](const ClickHistogram &) { return 0.0; }, 10, 1), Error);
}

TEST(MultinomialHistogram, TotalsAndDeterminism) {
    std::vector<double> probs{0.1, 0.0, 0.6, 0.3};
    ShotRng a(4, 0), b(4, 0);
    auto ha = multinomial_histogram(probs, 100000, a);
    auto hb = multinomial_histogram(probs, 100000, b);
    EXPECT_EQ(ha, hb);
    EXPECT_EQ(ha.total(), 100000);
    EXPECT_EQ(ha.counts[1], 0);
    EXPECT_NEAR(ha.counts[2] / 1e5, 0.6, 0.01);
}

TEST(Conditioning, MergingAllPatternsGivesUnconditioned) {
    auto recs = sample_records(LoopConfig::reference(0.3), 2, 50000, 11);
    auto all = condition_all(recs, 8);
    auto merged = ClickHistogram::zeros(8);
    for (const auto &[p, h] : all) {
        EXPECT_EQ(p.passes(), 2);
        merged += h;
    }
    EXPECT_EQ(merged, unconditioned_histogram(recs, 8));
    EXPECT_EQ(merged.total(), 50000);
}

TEST(Conditioning, PrefixPatternSumsItsExtensions) {
    auto recs = sample_records(LoopConfig::reference(0.3), 2, 50000, 12);
    auto prefix = condition(recs, {HeraldPattern::parse("(1)")}, 8);
    auto sum = ClickHistogram::zeros(8);
    for (int k = 0; k <= 4; ++k) {
        sum += condition(recs, {HeraldPattern{{1, k}}}, 8).hist;
    }
    EXPECT_EQ(prefix.hist, sum);
    EXPECT_EQ(prefix.total, 50000);
    EXPECT_THROW(condition(recs, {HeraldPattern::parse("(1,1,1)")}, 8), Error);
    EXPECT_THROW(condition(RecordTable(2), {HeraldPattern::parse("(1)")}, 8), Error);
}

TEST(Conditioning, ConditionerMatchesSingleQueries) {
    auto recs = sample_records(LoopConfig::reference(0.3), 2, 30000, 13);
    std::vector<HeraldPattern> pats{HeraldPattern::parse("(1,1)"), HeraldPattern::parse("(2,0)"),
                                    HeraldPattern::parse("(2)")};
    Conditioner c(pats, 2, 8);
    c.add(recs);
    for (std::size_t i = 0; i < pats.size(); ++i) {
        auto one = condition(recs, {pats[i]}, 8);
        EXPECT_EQ(c.result(i).hist, one.hist);
        EXPECT_EQ(c.result(i).probability.value, one.probability.value);
    }
}

TEST(BlockwiseProbability, NeedsTwoBlocks) {
    auto recs = sample_records(LoopConfig::reference(0.3), 1, 25000, 14);
    auto e = blockwise_probability(recs, HeraldPattern::parse("(1)"), 10000);
    EXPECT_GT(e.value, 0.0);
    EXPECT_THROW(blockwise_probability(recs, HeraldPattern::parse("(1)"), 20000), Error);
}

TEST(AnalyzePattern, InsufficientDataIsReportedInTheRow) {
    auto recs = sample_records(LoopConfig::reference(0.05), 2, 2000, 15);
    auto pat = HeraldPattern::parse("(4,4)");
    auto cond = condition(recs, {pat}, 8);
    EXPECT_EQ(cond.matches, 0);
    auto row = analyze_pattern(cond, pat, fock_click_distribution(8, {8, 0.38}));
    EXPECT_EQ(row.status, "insufficient-data");
    EXPECT_EQ(row.P, 0.0);
    EXPECT_TRUE(std::isnan(row.F));
    auto table = results_table({row});
    EXPECT_EQ(std::get<std::string>(table.rows[0][5]), "insufficient-data");
    EXPECT_EQ(std::get<double>(table.rows[0][3]), 0.0);
}

TEST(ResultsTable, ColumnsAndExtras) {
    ResultRow a;
    a.pattern = HeraldPattern::parse("(1,1)");
    a.P = 0.1;
    a.extra = {{"P_exact", 0.11}};
    ResultRow b;
    b.pattern = HeraldPattern::parse("(2)");
    auto t = results_table({a, b});
    std::vector<std::string> cols = result_columns();
    cols.push_back("P_exact");
    EXPECT_EQ(t.columns, cols);
    EXPECT_EQ(std::get<std::string>(t.rows[0][0]), "(1,1)");
    EXPECT_EQ(std::get<std::int64_t>(t.rows[0][1]), 2);
    EXPECT_EQ(std::get<std::int64_t>(t.rows[1][2]), 1);
    EXPECT_TRUE(std::isnan(std::get<double>(t.rows[1][10])));
    EXPECT_THROW(results_table({}), Error);
}

TEST(Fit, RecoversSingleSqueezingParameter) {
    auto truth = LoopConfig::reference(0.3, 0.6);
    std::vector<FitObservation> obs;
    for (const char *p : {"(1,0)", "(1,1)", "(0,1)", "(2,0)"}) {
        obs.push_back(expected_observation(truth, p, 0, 1e8));
    }
    FitParameters init{{0.22}, 0.38, 0.36, 0.6};
    FitMask mask{true, false, false, false};
    auto fit = fit_parameters(obs, init, mask);
    ASSERT_EQ(fit.names, (std::vector<std::string>{"zeta[0]"}));
    EXPECT_NEAR(fit.params.zeta[0], 0.3, 1e-4);
    EXPECT_TRUE(fit.well_conditioned);
    EXPECT_GT(fit.std_errors[0], 0.0);
    EXPECT_EQ(fit.degrees_of_freedom, static_cast<int>(fit.residuals.size()) - 1);
}

TEST(Fit, UnidentifiableParameterIsFlagged) {
    // A single pass carries no information on the loop efficiency.
    auto truth = LoopConfig::reference(0.3, 0.6);
    std::vector<FitObservation> obs{expected_observation(truth, "(1)", 0, 1e8),
                                    expected_observation(truth, "(2)", 0, 1e8)};
    FitParameters init{{0.25}, 0.4, 0.4, 0.5};
    try {
        auto fit = fit_parameters(obs, init, FitMask{});
        EXPECT_FALSE(fit.well_conditioned);
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::fit_failure);
    }
}

TEST(Fit, RejectsBadInput) {
    auto truth = LoopConfig::reference(0.3, 0.6);
    std::vector<FitObservation> obs{expected_observation(truth, "(1)", 1, 1e6)};
    EXPECT_THROW(fit_parameters(obs, FitParameters{{0.3}, 0.4, 0.4, 0.5}), Error);
    EXPECT_THROW(fit_parameters({}, FitParameters{{0.3}, 0.4, 0.4, 0.5}), Error);
    obs[0].setting = 0;
    EXPECT_THROW(fit_parameters(obs, FitParameters{{0.3}, 0.4, 0.4, 0.5}, FitMask{false, false, false, false}), Error);
}
