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

#ifndef HERALDSIM_ANALYSIS_HPP
#define HERALDSIM_ANALYSIS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "heraldsim/detector.hpp"
#include "heraldsim/error.hpp"
#include "heraldsim/mcsim.hpp"
#include "heraldsim/moments.hpp"
#include "heraldsim/protocol.hpp"
#include "heraldsim/rng.hpp"
#include "heraldsim/table.hpp"

namespace heraldsim {

/// Raw signal click counts C_k, k = 0..N.
struct ClickHistogram {
    std::vector<std::int64_t> counts;

    static ClickHistogram zeros(int bins) {
        return ClickHistogram{std::vector<std::int64_t>(static_cast<std::size_t>(bins) + 1, 0)};
    }

    int bins() const {
        return static_cast<int>(counts.size()) - 1;
    }
    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts) {
            t += c;
        }
        return t;
    }

    ClickHistogram &operator+=(const ClickHistogram &other) {
        require(other.counts.size() == counts.size(), "histograms over different bins");
        for (std::size_t k = 0; k < counts.size(); ++k) {
            counts[k] += other.counts[k];
        }
        return *this;
    }

    bool operator==(const ClickHistogram &) const = default;
};

struct Estimate {
    double value = 0;
    double sigma = 0;
};

struct PatternQuery {
    HeraldPattern pattern;
};

struct ConditionResult {
    ClickHistogram hist;
    std::int64_t matches = 0;
    std::int64_t total = 0;
    /// Fraction of all records matching the pattern, with sqrt(P(1-P)/(C-1)).
    Estimate probability;
};

/// Binomial-proportion estimate k/C with sqrt(p(1-p)/(C-1)).
inline Estimate proportion(std::int64_t hits, std::int64_t total) {
    require(total >= 1, "no records");
    double p = static_cast<double>(hits) / static_cast<double>(total);
    double var = p * (1.0 - p);
    if (var == 0.0) {
        return {p, 0.0};
    }
    if (total < 2) {
        fail(ErrorKind::insufficient_data, "need at least two records for an error estimate");
    }
    return {p, std::sqrt(var / static_cast<double>(total - 1))};
}

/// Conditions one record pass on several patterns at once.
class Conditioner {
   public:
    Conditioner(std::vector<HeraldPattern> patterns, int passes, int signal_bins)
        : patterns_(std::move(patterns)), passes_(passes), signal_bins_(signal_bins) {
        for (const auto &p : patterns_) {
            require(p.passes() <= passes_, "pattern " + p.str() + " has " + std::to_string(p.passes()) +
                                               " passes but the records have only " + std::to_string(passes_));
        }
        hists_.assign(patterns_.size(), ClickHistogram::zeros(signal_bins_));
    }

    void add(const RecordTable &records) {
        require(records.empty() || records.passes() == passes_, "record pass count mismatch");
        for (std::size_t i = 0; i < records.size(); ++i) {
            ClickRecord r = records[i];
            require(r.signal <= signal_bins_, "signal click count exceeds detector bins");
            for (std::size_t q = 0; q < patterns_.size(); ++q) {
                if (r.matches(patterns_[q])) {
                    hists_[q].counts[r.signal] += 1;
                }
            }
        }
        total_ += static_cast<std::int64_t>(records.size());
    }

    std::int64_t total() const {
        return total_;
    }

    ConditionResult result(std::size_t q) const {
        require(total_ >= 1, "no records to condition");
        ConditionResult r;
        r.hist = hists_.at(q);
        r.matches = r.hist.total();
        r.total = total_;
        r.probability = proportion(r.matches, total_);
        return r;
    }

   private:
    std::vector<HeraldPattern> patterns_;
    int passes_;
    int signal_bins_;
    std::vector<ClickHistogram> hists_;
    std::int64_t total_ = 0;
};

inline ConditionResult condition(const RecordTable &records, const PatternQuery &q, int signal_bins) {
    require(!records.empty(), "no records to condition");
    Conditioner c({q.pattern}, records.passes(), signal_bins);
    c.add(records);
    return c.result(0);
}

/// Signal histograms for every herald pattern that occurs.
inline std::map<HeraldPattern, ClickHistogram> condition_all(const RecordTable &records, int signal_bins) {
    std::map<HeraldPattern, ClickHistogram> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        ClickRecord r = records[i];
        auto [it, inserted] = out.try_emplace(r.pattern(), ClickHistogram::zeros(signal_bins));
        it->second.counts.at(r.signal) += 1;
    }
    return out;
}

/// Signal click histogram over all records, ignoring the herald.
inline ClickHistogram unconditioned_histogram(const RecordTable &records, int signal_bins) {
    auto h = ClickHistogram::zeros(signal_bins);
    for (std::size_t i = 0; i < records.size(); ++i) {
        h.counts.at(records[i].signal) += 1;
    }
    return h;
}

/// Pattern probability from the spread of per-block frequencies (blocks of `block_size` records).
inline Estimate blockwise_probability(const RecordTable &records, const HeraldPattern &pattern,
                                      std::size_t block_size = 10000) {
    require(block_size >= 1, "block size must be >= 1");
    std::size_t blocks = records.size() / block_size;
    if (blocks < 2) {
        fail(ErrorKind::insufficient_data, "need at least two complete blocks");
    }
    std::vector<double> freq(blocks, 0.0);
    for (std::size_t b = 0; b < blocks; ++b) {
        std::int64_t hits = 0;
        for (std::size_t i = b * block_size; i < (b + 1) * block_size; ++i) {
            hits += records[i].matches(pattern) ? 1 : 0;
        }
        freq[b] = static_cast<double>(hits) / static_cast<double>(block_size);
    }
    double mean = 0;
    for (double f : freq) {
        mean += f;
    }
    mean /= static_cast<double>(blocks);
    double ss = 0;
    for (double f : freq) {
        ss += (f - mean) * (f - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(blocks - 1) / static_cast<double>(blocks))};
}

inline void require_samples(const ClickHistogram &hist) {
    if (hist.total() < 2) {
        fail(ErrorKind::insufficient_data, "estimators need at least two events, have " + std::to_string(hist.total()));
    }
}

/// c_k = C_k / C with sigma(c_k) = sqrt(c_k (1 - c_k) / (C - 1)).
inline ClickDistribution estimate_statistics(const ClickHistogram &hist) {
    require_samples(hist);
    const double C = static_cast<double>(hist.total());
    ClickDistribution d;
    d.samples = hist.total();
    for (auto count : hist.counts) {
        double c = static_cast<double>(count) / C;
        d.probs.push_back(c);
        d.sigmas.push_back(std::sqrt(c * (1.0 - c) / (C - 1.0)));
    }
    return d;
}

/// Linear statistic f = sum_k f_k C_k / C with sigma(f) = sqrt((<f^2> - <f>^2) / (C - 1)).
inline Estimate linear_statistic(const ClickHistogram &hist, const std::vector<double> &weights) {
    require_samples(hist);
    require(weights.size() == hist.counts.size(), "one weight per click count required");
    const double C = static_cast<double>(hist.total());
    CompensatedSum<double> mean, square;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        double c = static_cast<double>(hist.counts[k]) / C;
        mean.add(weights[k] * c);
        square.add(weights[k] * weights[k] * c);
    }
    double m = mean.value();
    return {m, std::sqrt(std::max(0.0, square.value() - m * m) / (C - 1.0))};
}

/// F = sum_k sqrt(target_k) sqrt(c_k), sigma(F) = sqrt(sum_k target_k (1 - c_k)) / (2 sqrt(C - 1)).
inline Estimate estimate_fidelity(const ClickHistogram &hist, const ClickDistribution &target) {
    require_samples(hist);
    require(target.bins() == hist.bins(), "fidelity target has the wrong number of bins");
    auto c = estimate_statistics(hist);
    const double C = static_cast<double>(hist.total());
    CompensatedSum<double> f, var;
    for (std::size_t k = 0; k < c.probs.size(); ++k) {
        double t = clip_probability(target.probs[k]);
        f.add(std::sqrt(t) * std::sqrt(c.probs[k]));
        var.add(t * (1.0 - c.probs[k]));
    }
    return {f.value(), std::sqrt(std::max(0.0, var.value())) / (2.0 * std::sqrt(C - 1.0))};
}

inline NegativityResult estimate_negativity(const ClickHistogram &hist, int order = -1) {
    require_samples(hist);
    auto moments = click_moments(estimate_statistics(hist));
    return negativity(moment_matrix(moments, hist.bins(), order));
}

// The two functions below keep the covariance between click bins that the per-bin propagation
// above drops. They are diagnostics: the reported sigmas stay the per-bin ones.

/// Delta-method sigma(F) under the multinomial covariance: sqrt((sum_{c_k>0} target_k - F^2) / (4 (C - 1))).
inline double fidelity_sigma_multinomial(const ClickHistogram &hist, const ClickDistribution &target) {
    require_samples(hist);
    require(target.bins() == hist.bins(), "fidelity target has the wrong number of bins");
    auto f = estimate_fidelity(hist, target);
    CompensatedSum<double> support;
    for (std::size_t k = 0; k < hist.counts.size(); ++k) {
        if (hist.counts[k] > 0) {
            support.add(clip_probability(target.probs[k]));
        }
    }
    double C = static_cast<double>(hist.total());
    return std::sqrt(std::max(0.0, support.value() - f.value * f.value) / (4.0 * (C - 1.0)));
}

/// v^T M v with v held fixed is linear in the click frequencies, so its sampling error is that of
/// a single linear statistic with weights sum_ij v_i v_j C(k, i+j) / C(N, i+j).
inline double negativity_sigma_linear(const ClickHistogram &hist, const NegativityResult &neg) {
    require_samples(hist);
    const int N = hist.bins();
    const auto order = static_cast<int>(neg.eigvec.size()) - 1;
    require(2 * order <= N, "eigenvector longer than the moment matrix allows");
    std::vector<double> w(static_cast<std::size_t>(N) + 1, 0.0);
    for (int k = 0; k <= N; ++k) {
        for (int i = 0; i <= order; ++i) {
            for (int j = 0; j <= order; ++j) {
                w[static_cast<std::size_t>(k)] += neg.eigvec(i) * neg.eigvec(j) * moment_weight(k, i + j, N);
            }
        }
    }
    return linear_statistic(hist, w).sigma;
}

/// Multinomial draw of `total` events over the probabilities (conditional binomial chain).
template <typename Rng>
ClickHistogram multinomial_histogram(const std::vector<double> &probs, std::int64_t total, Rng &rng) {
    require(!probs.empty(), "multinomial draw needs at least one cell");
    require(total >= 0, "event count must be >= 0");
    ClickHistogram h{std::vector<std::int64_t>(probs.size(), 0)};
    double mass_left = 0;
    for (double p : probs) {
        require(p >= 0 && std::isfinite(p), "multinomial probabilities must be finite and nonnegative");
        mass_left += p;
    }
    require(mass_left > 0, "multinomial probabilities sum to zero");
    std::int64_t remaining = total;
    for (std::size_t k = 0; k < probs.size() && remaining > 0; ++k) {
        double q = (k + 1 == probs.size() || mass_left <= probs[k]) ? 1.0 : probs[k] / mass_left;
        std::int64_t draw = remaining;
        if (q < 1.0) {
            std::binomial_distribution<std::int64_t> binom(remaining, q);
            draw = binom(rng);
        }
        h.counts[k] = draw;
        remaining -= draw;
        mass_left -= probs[k];
    }
    return h;
}

/// Standard deviation of `statistic` over multinomial resamples of the histogram.
inline double bootstrap_sigma(const ClickHistogram &hist, const std::function<double(const ClickHistogram &)> &statistic,
                              int resamples, std::uint64_t seed) {
    require(resamples >= 100, "bootstrap needs at least 100 resamples");
    require_samples(hist);
    const std::int64_t C = hist.total();
    std::vector<double> freq;
    for (auto c : hist.counts) {
        freq.push_back(static_cast<double>(c) / static_cast<double>(C));
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        ShotRng rng(seed, static_cast<std::uint64_t>(r));
        ClickHistogram sample = multinomial_histogram(freq, C, rng);
        values.push_back(statistic(sample));
    }
    double mean = 0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double ss = 0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

// ---------------------------------------------------------------------------------------------
// Model fitting.

/// One conditioned dataset: the records of squeezing setting `setting` matching `pattern`.
struct FitObservation {
    int setting = 0;
    HeraldPattern pattern;
    ClickHistogram hist;
    std::int64_t total = 0;  // all records of the setting
};

struct FitParameters {
    std::vector<double> zeta;  // one per setting
    double eta = 1.0;
    double eta_prime = 1.0;
    double eta_loop = 1.0;
};

struct FitMask {
    bool zeta = true;
    bool eta = true;
    bool eta_prime = true;
    bool eta_loop = true;
};

struct FitOptions {
    int herald_bins = 4;
    int signal_bins = 8;
    int simplex_iterations = 400;
    int max_iterations = 100;
    /// Free parameters whose relative standard error exceeds this are reported as poorly determined.
    double wide_confidence = 0.25;
};

struct FitResult {
    FitParameters params;
    std::vector<std::string> names;    // free parameters, in order
    std::vector<double> estimates;     // free parameter values
    std::vector<double> std_errors;    // one per free parameter (inf if unidentifiable)
    std::vector<double> residuals;     // whitened
    double residual_norm = 0;
    int degrees_of_freedom = 0;
    int iterations = 0;
    bool well_conditioned = true;

    LoopConfig config(int setting, int herald_bins = 4, int signal_bins = 8) const {
        LoopConfig cfg;
        cfg.squeeze = {gain_from_zeta(params.zeta.at(static_cast<std::size_t>(setting)))};
        cfg.herald = {herald_bins, params.eta_prime};
        cfg.signal = {signal_bins, params.eta};
        cfg.loop_eff = {params.eta_loop};
        return cfg;
    }
};

/// Every pattern of a record set with at least `min_matches` occurrences, as fit observations.
inline std::vector<FitObservation> observations_from_records(const RecordTable &records, int setting, int signal_bins,
                                                             std::int64_t min_matches = 200) {
    std::vector<FitObservation> out;
    for (auto &[pattern, hist] : condition_all(records, signal_bins)) {
        if (hist.total() >= min_matches) {
            out.push_back({setting, pattern, hist, static_cast<std::int64_t>(records.size())});
        }
    }
    return out;
}

namespace detail {

struct FitProblem {
    const std::vector<FitObservation> &obs;
    FitParameters base;
    FitMask mask;
    FitOptions options;
    std::size_t settings = 0;

    // Free coordinates live in an unconstrained space: log(zeta), logit(efficiency).
    static double logit(double p) {
        p = std::clamp(p, 1e-9, 1.0 - 1e-9);
        return std::log(p / (1.0 - p));
    }
    static double logistic(double u) {
        return 1.0 / (1.0 + std::exp(-u));
    }

    std::vector<std::string> names() const {
        std::vector<std::string> n;
        if (mask.zeta) {
            for (std::size_t s = 0; s < settings; ++s) {
                n.push_back("zeta[" + std::to_string(s) + "]");
            }
        }
        if (mask.eta) {
            n.push_back("eta");
        }
        if (mask.eta_prime) {
            n.push_back("eta_prime");
        }
        if (mask.eta_loop) {
            n.push_back("eta_loop");
        }
        return n;
    }

    Eigen::VectorXd encode(const FitParameters &p) const {
        std::vector<double> u;
        if (mask.zeta) {
            for (double z : p.zeta) {
                u.push_back(std::log(std::max(z, 1e-9)));
            }
        }
        if (mask.eta) {
            u.push_back(logit(p.eta));
        }
        if (mask.eta_prime) {
            u.push_back(logit(p.eta_prime));
        }
        if (mask.eta_loop) {
            u.push_back(logit(p.eta_loop));
        }
        return Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
    }

    FitParameters decode(const Eigen::VectorXd &u) const {
        FitParameters p = base;
        Eigen::Index i = 0;
        if (mask.zeta) {
            for (auto &z : p.zeta) {
                z = std::exp(u(i++));
            }
        }
        if (mask.eta) {
            p.eta = logistic(u(i++));
        }
        if (mask.eta_prime) {
            p.eta_prime = logistic(u(i++));
        }
        if (mask.eta_loop) {
            p.eta_loop = logistic(u(i++));
        }
        return p;
    }

    /// d(parameter)/d(coordinate) for the delta-method standard errors.
    Eigen::VectorXd chain_factors(const FitParameters &p) const {
        std::vector<double> f;
        if (mask.zeta) {
            for (double z : p.zeta) {
                f.push_back(z);
            }
        }
        for (auto [on, v] : {std::pair{mask.eta, p.eta}, {mask.eta_prime, p.eta_prime}, {mask.eta_loop, p.eta_loop}}) {
            if (on) {
                f.push_back(v * (1.0 - v));
            }
        }
        return Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    }

    Eigen::VectorXd residuals(const FitParameters &p) const {
        std::vector<double> r;
        for (const auto &o : obs) {
            LoopConfig cfg;
            cfg.squeeze = {gain_from_zeta(p.zeta.at(static_cast<std::size_t>(o.setting)))};
            cfg.herald = {options.herald_bins, p.eta_prime};
            cfg.signal = {options.signal_bins, p.eta};
            cfg.loop_eff = {p.eta_loop};
            auto outcome = run_pattern<Wide>(cfg, o.pattern);
            double model_p = static_cast<double>(outcome.probability);
            const double total = static_cast<double>(o.total);
            const double matches = static_cast<double>(o.hist.total());
            double obs_p = matches / total;
            double sp = std::sqrt(std::max(obs_p * (1.0 - obs_p), 1.0 / total) / (total - 1.0));
            r.push_back((obs_p - model_p) / sp);
            if (matches < 2) {
                continue;
            }
            std::vector<double> model_c(o.hist.counts.size(), 0.0);
            if (outcome.heralded()) {
                model_c = signal_distribution(outcome.state, cfg.signal).probs;
            }
            for (std::size_t k = 0; k < o.hist.counts.size(); ++k) {
                double c = static_cast<double>(o.hist.counts[k]) / matches;
                double sc = std::sqrt(std::max(c * (1.0 - c), 1.0 / matches) / (matches - 1.0));
                r.push_back((c - model_c[k]) / sc);
            }
        }
        return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    }

    double cost(const Eigen::VectorXd &u) const {
        try {
            return residuals(decode(u)).squaredNorm();
        } catch (const Error &) {
            return std::numeric_limits<double>::infinity();
        }
    }
};

inline Eigen::VectorXd nelder_mead(const FitProblem &prob, Eigen::VectorXd start, int iterations) {
    const Eigen::Index d = start.size();
    std::vector<Eigen::VectorXd> pts{start};
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::VectorXd p = start;
        p(i) += 0.05;
        pts.push_back(p);
    }
    std::vector<double> f;
    for (const auto &p : pts) {
        f.push_back(prob.cost(p));
    }
    for (int it = 0; it < iterations; ++it) {
        std::vector<std::size_t> order(pts.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return f[a] < f[b];
        });
        std::vector<Eigen::VectorXd> sp;
        std::vector<double> sf;
        for (auto i : order) {
            sp.push_back(pts[i]);
            sf.push_back(f[i]);
        }
        pts = std::move(sp);
        f = std::move(sf);
        if (std::abs(f.back() - f.front()) <= 1e-9 * (1.0 + std::abs(f.front()))) {
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            centroid += pts[static_cast<std::size_t>(i)];
        }
        centroid /= static_cast<double>(d);
        Eigen::VectorXd reflected = centroid + (centroid - pts.back());
        double fr = prob.cost(reflected);
        if (fr < f.front()) {
            Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts.back());
            double fe = prob.cost(expanded);
            if (fe < fr) {
                pts.back() = expanded;
                f.back() = fe;
            } else {
                pts.back() = reflected;
                f.back() = fr;
            }
        } else if (fr < f[f.size() - 2]) {
            pts.back() = reflected;
            f.back() = fr;
        } else {
            Eigen::VectorXd contracted = centroid + 0.5 * (pts.back() - centroid);
            double fc = prob.cost(contracted);
            if (fc < f.back()) {
                pts.back() = contracted;
                f.back() = fc;
            } else {
                for (std::size_t i = 1; i < pts.size(); ++i) {
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
                    f[i] = prob.cost(pts[i]);
                }
            }
        }
    }
    std::size_t best = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
    return pts[best];
}

inline Eigen::MatrixXd jacobian(const FitProblem &prob, const Eigen::VectorXd &u, const Eigen::VectorXd &r0) {
    Eigen::MatrixXd J(r0.size(), u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        double h = 1e-6 * std::max(1.0, std::abs(u(i)));
        Eigen::VectorXd up = u, down = u;
        up(i) += h;
        down(i) -= h;
        J.col(i) = (prob.residuals(prob.decode(up)) - prob.residuals(prob.decode(down))) / (2.0 * h);
    }
    return J;
}

}  // namespace detail

/// Least-squares fit of squeezing per setting and the three efficiencies to pattern probabilities
/// and conditioned click statistics. Simplex search, then damped Gauss-Newton on a
/// finite-difference Jacobian.
inline FitResult fit_parameters(const std::vector<FitObservation> &observations, const FitParameters &initial,
                                const FitMask &mask = {}, const FitOptions &options = {}) {
    require(!observations.empty(), "fit needs at least one observation");
    std::size_t settings = initial.zeta.size();
    for (const auto &o : observations) {
        require(o.setting >= 0 && static_cast<std::size_t>(o.setting) < settings,
                "observation refers to an unknown squeezing setting");
        require(o.total >= 2, "observation needs at least two records");
    }
    detail::FitProblem prob{observations, initial, mask, options, settings};
    Eigen::VectorXd u = prob.encode(initial);
    const Eigen::Index d = u.size();
    require(d >= 1, "fit mask leaves no free parameter");

    Eigen::VectorXd r = prob.residuals(initial);
    require(r.size() >= d, "fewer observables than free parameters");

    u = detail::nelder_mead(prob, u, options.simplex_iterations);
    r = prob.residuals(prob.decode(u));
    double cost = r.squaredNorm();
    double damping = 1e-3;
    bool converged = false;
    int it = 0;
    Eigen::MatrixXd J;
    for (; it < options.max_iterations; ++it) {
        J = detail::jacobian(prob, u, r);
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd Ad = A;
            Ad.diagonal() += damping * (A.diagonal().array() + 1e-12).matrix();
            Eigen::VectorXd step = Ad.ldlt().solve(-g);
            Eigen::VectorXd trial = u + step;
            double trial_cost = prob.cost(trial);
            if (trial_cost < cost) {
                double rel = (cost - trial_cost) / std::max(cost, 1e-300);
                u = trial;
                r = prob.residuals(prob.decode(u));
                cost = trial_cost;
                damping = std::max(damping / 3.0, 1e-12);
                improved = true;
                if (rel < 1e-12 || step.norm() < 1e-10) {
                    converged = true;
                }
                break;
            }
            damping *= 4.0;
        }
        if (!improved) {
            // No descent direction left at any damping: stationary to working precision.
            converged = true;
        }
        if (converged) {
            break;
        }
    }
    if (!converged) {
        fail(ErrorKind::fit_failure, "no convergence after " + std::to_string(options.max_iterations) +
                                         " Gauss-Newton iterations; residual norm " + std::to_string(std::sqrt(cost)));
    }

    FitResult out;
    out.params = prob.decode(u);
    out.names = prob.names();
    out.residuals.assign(r.data(), r.data() + r.size());
    out.residual_norm = std::sqrt(cost);
    out.degrees_of_freedom = static_cast<int>(r.size() - d);
    out.iterations = it;
    J = detail::jacobian(prob, u, r);
    Eigen::MatrixXd A = J.transpose() * J;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    double max_ev = eig.eigenvalues().maxCoeff();
    bool singular = !(eig.eigenvalues().minCoeff() > 1e-10 * std::max(max_ev, 1e-300));
    // Scale by the reduced chi-square so the errors reflect the observed scatter.
    double scale = out.degrees_of_freedom > 0 ? std::max(1.0, cost / out.degrees_of_freedom) : 1.0;
    Eigen::VectorXd factors = prob.chain_factors(out.params);
    Eigen::VectorXd values = Eigen::VectorXd::Zero(d);
    {
        Eigen::Index i = 0;
        if (mask.zeta) {
            for (double z : out.params.zeta) {
                values(i++) = z;
            }
        }
        if (mask.eta) {
            values(i++) = out.params.eta;
        }
        if (mask.eta_prime) {
            values(i++) = out.params.eta_prime;
        }
        if (mask.eta_loop) {
            values(i++) = out.params.eta_loop;
        }
    }
    out.estimates.assign(values.data(), values.data() + d);
    out.well_conditioned = !singular;
    if (singular) {
        out.std_errors.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::infinity());
    } else {
        Eigen::MatrixXd cov = A.inverse() * scale;
        for (Eigen::Index i = 0; i < d; ++i) {
            double se = std::sqrt(std::max(0.0, cov(i, i))) * factors(i);
            out.std_errors.push_back(se);
            if (!(se <= options.wide_confidence * std::abs(values(i)))) {
                out.well_conditioned = false;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Result tables.

/// One analyzed pattern. Undefined estimates are NaN; `status` flags rows that could not be estimated.
struct ResultRow {
    HeraldPattern pattern;
    double P = std::numeric_limits<double>::quiet_NaN();
    double sigma_P = std::numeric_limits<double>::quiet_NaN();
    double F = std::numeric_limits<double>::quiet_NaN();
    double sigma_F = std::numeric_limits<double>::quiet_NaN();
    double negativity = std::numeric_limits<double>::quiet_NaN();
    double sigma_N = std::numeric_limits<double>::quiet_NaN();
    double significance = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
    std::vector<std::pair<std::string, double>> extra;
};

inline const std::vector<std::string> &result_columns() {
    static const std::vector<std::string> cols{"pattern",  "n",       "t",          "P",       "sigma_P",
                                               "F",        "sigma_F", "negativity", "sigma_N", "significance"};
    return cols;
}

/// Fixed column order; extra columns (if any) follow in order of first appearance. NaN cells of a
/// flagged row carry the status text.
inline Table results_table(const std::vector<ResultRow> &rows) {
    require(!rows.empty(), "no results to tabulate");
    Table t;
    t.columns = result_columns();
    std::vector<std::string> extra;
    for (const auto &r : rows) {
        for (const auto &[name, v] : r.extra) {
            if (std::find(extra.begin(), extra.end(), name) == extra.end()) {
                extra.push_back(name);
            }
        }
    }
    t.columns.insert(t.columns.end(), extra.begin(), extra.end());
    for (const auto &r : rows) {
        auto cell = [&](double v) -> Cell {
            if (std::isnan(v) && r.status != "ok") {
                return r.status;
            }
            return v;
        };
        std::vector<Cell> row{r.pattern.str(),
                              static_cast<std::int64_t>(r.pattern.photons()),
                              static_cast<std::int64_t>(r.pattern.passes()),
                              cell(r.P),
                              cell(r.sigma_P),
                              cell(r.F),
                              cell(r.sigma_F),
                              cell(r.negativity),
                              cell(r.sigma_N),
                              cell(r.significance)};
        for (const auto &name : extra) {
            double v = std::numeric_limits<double>::quiet_NaN();
            for (const auto &[n2, v2] : r.extra) {
                if (n2 == name) {
                    v = v2;
                }
            }
            row.push_back(cell(v));
        }
        t.add_row(std::move(row));
    }
    return t;
}

/// Full estimator chain for one pattern; insufficient data is reported in the row, not thrown.
inline ResultRow analyze_pattern(const ConditionResult &cond, const HeraldPattern &pattern,
                                 const ClickDistribution &target) {
    ResultRow row;
    row.pattern = pattern;
    row.P = cond.probability.value;
    row.sigma_P = cond.probability.sigma;
    try {
        auto f = estimate_fidelity(cond.hist, target);
        row.F = f.value;
        row.sigma_F = f.sigma;
        auto neg = estimate_negativity(cond.hist);
        row.negativity = neg.value;
        row.sigma_N = neg.sigma;
        row.significance = neg.significance;
    } catch (const Error &e) {
        if (e.kind() != ErrorKind::insufficient_data) {
            throw;
        }
        row.status = error_kind_name(ErrorKind::insufficient_data);
    }
    return row;
}

}  // namespace heraldsim

#endif
