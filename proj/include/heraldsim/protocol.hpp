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

#ifndef HERALDSIM_PROTOCOL_HPP
#define HERALDSIM_PROTOCOL_HPP

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "heraldsim/detector.hpp"
#include "heraldsim/error.hpp"
#include "heraldsim/expop.hpp"
#include "heraldsim/numeric.hpp"

namespace heraldsim {

/// Herald clicks observed in each pass through the source, (k_1, ..., k_t).
struct HeraldPattern {
    std::vector<int> clicks;

    int passes() const {
        return static_cast<int>(clicks.size());
    }
    int photons() const {
        int n = 0;
        for (int k : clicks) {
            n += k;
        }
        return n;
    }

    void validate(int herald_bins) const {
        require(!clicks.empty(), "herald pattern needs at least one pass");
        for (int k : clicks) {
            require(k >= 0 && k <= herald_bins, "herald click count " + std::to_string(k) + " outside 0.." +
                                                    std::to_string(herald_bins));
        }
    }

    /// Direct heralding: one pass with n clicks.
    static HeraldPattern direct(int n) {
        return HeraldPattern{{n}};
    }
    /// Feedback heralding: n passes with one click each.
    static HeraldPattern feedback(int n) {
        return HeraldPattern{std::vector<int>(static_cast<std::size_t>(n), 1)};
    }

    /// Accepts "1,1", "(1,1)" or "(2)".
    static HeraldPattern parse(std::string_view text) {
        std::string s;
        for (char c : text) {
            if (c != '(' && c != ')' && c != ' ') {
                s.push_back(c);
            }
        }
        require(!s.empty(), "empty herald pattern");
        HeraldPattern p;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            require(!item.empty() && item.find_first_not_of("0123456789") == std::string::npos,
                    "malformed herald pattern '" + std::string(text) + "'");
            p.clicks.push_back(std::stoi(item));
        }
        require(!p.clicks.empty(), "empty herald pattern");
        return p;
    }

    std::string str() const {
        std::string out = "(";
        for (std::size_t i = 0; i < clicks.size(); ++i) {
            if (i) {
                out += ",";
            }
            out += std::to_string(clicks[i]);
        }
        return out + ")";
    }

    bool operator==(const HeraldPattern &) const = default;
    auto operator<=>(const HeraldPattern &) const = default;
};

/// Fitted per-round-trip loop efficiency as a function of the number of source passes.
inline double default_loop_efficiency(int passes) {
    if (passes <= 2) {
        return 0.60;
    }
    if (passes == 3) {
        return 0.55;
    }
    return 0.52;
}

struct LoopConfig {
    /// One entry shared by all passes, or one per pass.
    std::vector<SqueezeParams> squeeze{SqueezeParams{}};
    DetectorConfig herald{4, 1.0};
    DetectorConfig signal{8, 1.0};
    /// Survival per round trip: empty (lossless), a single shared value, or exactly t-1 values.
    std::vector<double> loop_eff;

    const SqueezeParams &squeeze_for_pass(int pass) const {
        require(!squeeze.empty(), "loop configuration has no squeezing parameters");
        if (squeeze.size() == 1) {
            return squeeze.front();
        }
        require(pass < static_cast<int>(squeeze.size()), "no squeezing parameter for pass " + std::to_string(pass + 1));
        return squeeze[static_cast<std::size_t>(pass)];
    }

    double loop_eff_after_pass(int pass, int passes) const {
        if (loop_eff.empty()) {
            return 1.0;
        }
        if (loop_eff.size() == 1) {
            return loop_eff.front();
        }
        require(static_cast<int>(loop_eff.size()) == passes - 1,
                "loop efficiency list has " + std::to_string(loop_eff.size()) + " entries but a " +
                    std::to_string(passes) + "-pass pattern has " + std::to_string(passes - 1) + " round trips");
        return loop_eff[static_cast<std::size_t>(pass)];
    }

    void validate_for(const HeraldPattern &pattern) const {
        herald.validate();
        signal.validate();
        pattern.validate(herald.bins);
        int t = pattern.passes();
        require(squeeze.size() == 1 || static_cast<int>(squeeze.size()) >= t,
                "per-pass squeezing list shorter than the pattern");
        for (const auto &sq : squeeze) {
            require(std::isfinite(sq.gamma) && sq.gamma >= 1.0, "squeezer gain must be >= 1");
        }
        for (int j = 0; j + 1 < t; ++j) {
            double e = loop_eff_after_pass(j, t);
            require(e >= 0.0 && e <= 1.0, "loop efficiency must lie in [0, 1]");
        }
    }

    static LoopConfig lossless(double zeta, int herald_bins = 4, int signal_bins = 8) {
        LoopConfig cfg;
        cfg.squeeze = {gain_from_zeta(zeta)};
        cfg.herald = {herald_bins, 1.0};
        cfg.signal = {signal_bins, 1.0};
        return cfg;
    }

    /// Detector and loop parameters of the reference experiment.
    static LoopConfig reference(double zeta, double eta_loop = 0.6) {
        LoopConfig cfg;
        cfg.squeeze = {gain_from_zeta(zeta)};
        cfg.herald = {4, 0.36};
        cfg.signal = {8, 0.38};
        cfg.loop_eff = {eta_loop};
        return cfg;
    }
};

/// One source pass followed by a k-click herald: every (w, x) and POVM term (c, z) yields
/// (w c / gamma, (x + (gamma-1) z) / gamma). The trace of the result is the joint probability.
template <typename Real>
ExpMixture<Real> herald_step(const ExpMixture<Real> &m, const SqueezeParams &sq, int k, const DetectorConfig &herald) {
    auto povm = povm_terms<Real>(k, herald);
    Real gamma(sq.gamma);
    ExpMixture<Real> out;
    for (const auto &t : m.terms()) {
        require(t.x < Real(1), "herald_step input argument must be < 1");
        for (const auto &p : povm) {
            auto o = squeezer_output_arg(t.x, p.x, gamma);
            out.add(t.weight * p.coef * o.weight_factor, o.arg);
        }
    }
    out.simplify();
    return out;
}

template <typename Real = Wide>
struct PatternOutcome {
    /// Probability of the herald pattern.
    Real probability{0};
    /// Normalized heralded state; empty when the pattern cannot occur.
    ExpMixture<Real> state;

    bool heralded() const {
        return probability > Real(0);
    }
};

/// Runs a herald pattern from vacuum, applying loop loss between passes.
template <typename Real = Wide>
PatternOutcome<Real> run_pattern(const LoopConfig &cfg, const HeraldPattern &pattern) {
    cfg.validate_for(pattern);
    ExpMixture<Real> m = ExpMixture<Real>::vacuum();
    int t = pattern.passes();
    for (int j = 0; j < t; ++j) {
        m = herald_step(m, cfg.squeeze_for_pass(j), pattern.clicks[static_cast<std::size_t>(j)], cfg.herald);
        if (j + 1 < t) {
            m = attenuate_state(m, cfg.loop_eff_after_pass(j, t));
            m.simplify();
        }
    }
    PatternOutcome<Real> out;
    Real p = trace(m);
    Real scale(0);
    for (const auto &term : m.terms()) {
        scale += abs_value(term.weight / (Real(1) - term.x));
    }
    if (abs_value(p) <= Real(1e-30) * scale || m.empty()) {
        return out;
    }
    if (p < Real(0)) {
        fail(ErrorKind::non_physical_mixture, "pattern " + pattern.str() + " has negative probability");
    }
    out.probability = p;
    out.state = normalize(m);
    return out;
}

/// Signal click statistics of a normalized state.
template <typename Real>
ClickDistribution signal_distribution(const ExpMixture<Real> &state, const DetectorConfig &det) {
    if (state.empty()) {
        fail(ErrorKind::non_physical_mixture, "no heralded state to measure");
    }
    auto values = click_probabilities(state, det);
    Real total(0);
    for (const auto &v : values) {
        total += v;
    }
    require(abs_value(total - Real(1)) < Real(1e-10), "signal_distribution expects a normalized state");
    return to_click_distribution(values);
}

// ---------------------------------------------------------------------------------------------
// Lossless closed forms.

namespace detail {

inline void check_closed_form_args(double gamma, int n, int herald_bins) {
    require(std::isfinite(gamma) && gamma >= 1.0, "gain must be >= 1");
    require(n >= 0, "photon number must be >= 0");
    require(herald_bins >= 1, "herald bins must be >= 1");
}

template <typename Real>
Real sign_of(int exponent) {
    return (exponent % 2 == 0) ? Real(1) : Real(-1);
}

inline ClickDistribution normalized_closed(const std::vector<Wide> &unnormalized, Wide probability) {
    if (!(probability > Wide(0))) {
        fail(ErrorKind::non_physical_mixture, "closed-form statistics undefined at zero success probability");
    }
    std::vector<Wide> c;
    c.reserve(unnormalized.size());
    for (const auto &v : unnormalized) {
        c.push_back(v / probability);
    }
    return to_click_distribution(c);
}

// Subset-sum form of n feedback passes with one herald click each: pass i (1-based) contributes
// z_i in {0, 1/N'} scaled by (gamma-1)/gamma^(n-i+1); the sign is (-1)^(number of z_i = 0).
template <typename Fn>
void for_each_feedback_term(Wide gamma, int n, int herald_bins, Fn &&fn) {
    std::vector<Wide> step(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        step[static_cast<std::size_t>(i - 1)] = (gamma - Wide(1)) / (Wide(herald_bins) * int_pow(gamma, n - i + 1));
    }
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        Wide arg(0);
        int ones = 0;
        for (int i = 0; i < n; ++i) {
            if (mask >> i & 1) {
                arg += step[static_cast<std::size_t>(i)];
                ++ones;
            }
        }
        fn(sign_of<Wide>(n - ones), arg);
    }
}

}  // namespace detail

/// Direct-heralding success probability for n herald clicks from N' detectors (lossless).
inline double dh_success_closed(double gamma, int n, int herald_bins) {
    detail::check_closed_form_args(gamma, n, herald_bins);
    require(n <= herald_bins, "direct heralding cannot resolve " + std::to_string(n) + " clicks with " +
                                  std::to_string(herald_bins) + " detectors");
    Wide g(gamma), Np(herald_bins);
    CompensatedSum<Wide> s;
    for (int j = 0; j <= n; ++j) {
        s.add(binomial<Wide>(n, j) * detail::sign_of<Wide>(n - j) * g * Np / (g * Np - (g - Wide(1)) * Wide(j)));
    }
    return static_cast<double>(binomial<Wide>(herald_bins, n) * s.value() / g);
}

inline ClickDistribution dh_click_closed(double gamma, int n, int herald_bins, int signal_bins) {
    detail::check_closed_form_args(gamma, n, herald_bins);
    require(n <= herald_bins, "direct heralding cannot resolve more clicks than detectors");
    require(signal_bins >= 1, "signal bins must be >= 1");
    Wide g(gamma), Np(herald_bins), N(signal_bins);
    Wide prefactor = binomial<Wide>(herald_bins, n) / g;
    CompensatedSum<Wide> ps;
    for (int j = 0; j <= n; ++j) {
        ps.add(binomial<Wide>(n, j) * detail::sign_of<Wide>(n - j) * g * Np / (g * Np - (g - Wide(1)) * Wide(j)));
    }
    Wide probability = prefactor * ps.value();
    std::vector<Wide> out;
    for (int k = 0; k <= signal_bins; ++k) {
        CompensatedSum<Wide> s;
        for (int j = 0; j <= n; ++j) {
            for (int jp = 0; jp <= k; ++jp) {
                Wide kernel = N * Np * g / (N * Np * g - (g - Wide(1)) * Wide(j) * Wide(jp));
                s.add(binomial<Wide>(n, j) * binomial<Wide>(k, jp) * detail::sign_of<Wide>(n - j + k - jp) * kernel);
            }
        }
        out.push_back(prefactor * binomial<Wide>(signal_bins, k) * s.value());
    }
    return detail::normalized_closed(out, probability);
}

/// Feedback-heralding success probability for n passes with one click each (lossless),
/// from the exact iteration of the squeezer map.
inline double fh_success_closed(double gamma, int n, int herald_bins) {
    detail::check_closed_form_args(gamma, n, herald_bins);
    require(n <= 24, "feedback closed form supports n <= 24");
    Wide g(gamma), Np(herald_bins);
    CompensatedSum<Wide> s;
    detail::for_each_feedback_term(g, n, herald_bins, [&](Wide sign, Wide arg) {
        s.add(sign / (Wide(1) - arg));
    });
    return static_cast<double>(int_pow(Np / g, n) * s.value());
}

inline ClickDistribution fh_click_closed(double gamma, int n, int herald_bins, int signal_bins) {
    detail::check_closed_form_args(gamma, n, herald_bins);
    require(n <= 24, "feedback closed form supports n <= 24");
    require(signal_bins >= 1, "signal bins must be >= 1");
    Wide g(gamma), Np(herald_bins), N(signal_bins);
    Wide prefactor = int_pow(Np / g, n);
    std::vector<Wide> args, signs;
    detail::for_each_feedback_term(g, n, herald_bins, [&](Wide sign, Wide arg) {
        signs.push_back(sign);
        args.push_back(arg);
    });
    CompensatedSum<Wide> ps;
    for (std::size_t i = 0; i < args.size(); ++i) {
        ps.add(signs[i] / (Wide(1) - args[i]));
    }
    Wide probability = prefactor * ps.value();
    std::vector<Wide> out;
    for (int k = 0; k <= signal_bins; ++k) {
        CompensatedSum<Wide> s;
        for (std::size_t i = 0; i < args.size(); ++i) {
            for (int jp = 0; jp <= k; ++jp) {
                Wide kernel = Wide(1) / (Wide(1) - args[i] * Wide(jp) / N);
                s.add(signs[i] * binomial<Wide>(k, jp) * detail::sign_of<Wide>(k - jp) * kernel);
            }
        }
        out.push_back(prefactor * binomial<Wide>(signal_bins, k) * s.value());
    }
    return detail::normalized_closed(out, probability);
}

/// The single-sum feedback expression (N'/gamma)^n E(gamma^-n) sum_j C(n,j)(-1)^(n-j) E(j(gamma-1)/N').
/// It treats the seed argument as unscaled between passes, so it agrees with the iterated map only
/// for n <= 1. Kept for comparison.
inline double fh_success_single_sum(double gamma, int n, int herald_bins) {
    detail::check_closed_form_args(gamma, n, herald_bins);
    Wide g(gamma), Np(herald_bins), gn = int_pow(g, n);
    CompensatedSum<Wide> s;
    for (int j = 0; j <= n; ++j) {
        s.add(binomial<Wide>(n, j) * detail::sign_of<Wide>(n - j) * Np * gn / (Np * gn - (g - Wide(1)) * Wide(j)));
    }
    return static_cast<double>(int_pow(Np / g, n) * s.value());
}

inline ClickDistribution fh_click_single_sum(double gamma, int n, int herald_bins, int signal_bins) {
    detail::check_closed_form_args(gamma, n, herald_bins);
    Wide g(gamma), Np(herald_bins), N(signal_bins), gn = int_pow(g, n);
    Wide prefactor = int_pow(Np / g, n);
    CompensatedSum<Wide> ps;
    for (int j = 0; j <= n; ++j) {
        ps.add(binomial<Wide>(n, j) * detail::sign_of<Wide>(n - j) * Np * gn / (Np * gn - (g - Wide(1)) * Wide(j)));
    }
    Wide probability = prefactor * ps.value();
    std::vector<Wide> out;
    for (int k = 0; k <= signal_bins; ++k) {
        CompensatedSum<Wide> s;
        for (int j = 0; j <= n; ++j) {
            for (int jp = 0; jp <= k; ++jp) {
                Wide kernel = N * Np * gn / (N * Np * gn - (g - Wide(1)) * Wide(j) * Wide(jp));
                s.add(binomial<Wide>(n, j) * binomial<Wide>(k, jp) * detail::sign_of<Wide>(n - j + k - jp) * kernel);
            }
        }
        out.push_back(prefactor * binomial<Wide>(signal_bins, k) * s.value());
    }
    return detail::normalized_closed(out, probability);
}

// ---------------------------------------------------------------------------------------------
// Fidelity targets and F-P sweeps.

enum class FidelityConvention {
    ideal,           // perfect |n> seen by lossless detectors
    detector_lossy,  // perfect |n> seen through the signal detector efficiency
    custom,          // user-supplied distribution
};

inline FidelityConvention parse_fidelity_convention(std::string_view s) {
    if (s == "a" || s == "ideal") {
        return FidelityConvention::ideal;
    }
    if (s == "b" || s == "detector-lossy" || s == "detector_lossy") {
        return FidelityConvention::detector_lossy;
    }
    if (s == "c" || s == "custom") {
        return FidelityConvention::custom;
    }
    fail(ErrorKind::invalid_argument, "unknown fidelity convention '" + std::string(s) + "' (expected a, b or c)");
}

inline const char *fidelity_convention_name(FidelityConvention c) {
    switch (c) {
        case FidelityConvention::ideal:
            return "a";
        case FidelityConvention::detector_lossy:
            return "b";
        case FidelityConvention::custom:
            return "c";
    }
    return "?";
}

struct FidelityTarget {
    FidelityConvention convention = FidelityConvention::detector_lossy;
    ClickDistribution custom;
};

inline ClickDistribution target_distribution(const FidelityTarget &target, int n, const DetectorConfig &signal) {
    switch (target.convention) {
        case FidelityConvention::ideal:
            return fock_click_distribution(n, DetectorConfig{signal.bins, 1.0});
        case FidelityConvention::detector_lossy:
            return fock_click_distribution(n, signal);
        case FidelityConvention::custom:
            require(target.custom.bins() == signal.bins, "custom fidelity target has the wrong number of bins");
            return target.custom;
    }
    fail(ErrorKind::invalid_argument, "unknown fidelity convention");
}

struct SweepPoint {
    double zeta = 0;
    double gamma = 1;
    /// One entry per pattern of the family, in family order.
    std::vector<double> probability;
    std::vector<double> fidelity;  // NaN where the pattern cannot be heralded
};

/// Evaluates success probability and fidelity of each pattern for every squeezing value.
/// Rows are independent; the result does not depend on the thread count.
inline std::vector<SweepPoint> sweep_fp(const LoopConfig &tmpl, const std::vector<HeraldPattern> &family,
                                        const std::vector<double> &zetas, const FidelityTarget &target,
                                        int threads = 1) {
    require(!family.empty(), "sweep needs at least one pattern");
    for (std::size_t i = 0; i < zetas.size(); ++i) {
        require(std::isfinite(zetas[i]), "zeta grid must be finite");
        require(i == 0 || zetas[i] > zetas[i - 1], "zeta grid must be ascending");
    }
    std::vector<ClickDistribution> targets;
    for (const auto &p : family) {
        targets.push_back(target_distribution(target, p.photons(), tmpl.signal));
    }
    std::vector<SweepPoint> rows(zetas.size());
    auto work = [&](std::size_t i) {
        LoopConfig cfg = tmpl;
        cfg.squeeze = {gain_from_zeta(zetas[i])};
        SweepPoint row;
        row.zeta = zetas[i];
        row.gamma = cfg.squeeze.front().gamma;
        for (std::size_t p = 0; p < family.size(); ++p) {
            auto outcome = run_pattern<Wide>(cfg, family[p]);
            row.probability.push_back(static_cast<double>(outcome.probability));
            if (outcome.heralded()) {
                row.fidelity.push_back(bhattacharyya(signal_distribution(outcome.state, cfg.signal), targets[p]));
            } else {
                row.fidelity.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        rows[i] = std::move(row);
    };
    threads = std::max(1, threads);
    if (threads == 1 || zetas.size() < 2) {
        for (std::size_t i = 0; i < zetas.size(); ++i) {
            work(i);
        }
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = static_cast<std::size_t>(w); i < zetas.size();
                         i += static_cast<std::size_t>(threads)) {
                        work(i);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto &th : pool) {
            th.join();
        }
        for (auto &e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }
    return rows;
}

/// Fidelity of one pattern's heralded signal to the target at squeezing zeta (NaN if never heralded).
inline double pattern_fidelity(const LoopConfig &tmpl, const HeraldPattern &pattern, double zeta,
                               const ClickDistribution &target, double *probability = nullptr) {
    LoopConfig cfg = tmpl;
    cfg.squeeze = {gain_from_zeta(zeta)};
    auto outcome = run_pattern<Wide>(cfg, pattern);
    if (probability) {
        *probability = static_cast<double>(outcome.probability);
    }
    if (!outcome.heralded()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return bhattacharyya(signal_distribution(outcome.state, cfg.signal), target);
}

/// Smallest zeta in [lo, hi] where the pattern's fidelity crosses `fidelity`: coarse scan for a
/// sign change, then bisection. Empty if the level is never reached on the interval.
inline std::optional<double> match_fidelity(const LoopConfig &tmpl, const HeraldPattern &pattern,
                                            const ClickDistribution &target, double fidelity, double lo, double hi,
                                            int scan_points = 64) {
    require(lo > 0 && hi > lo, "match_fidelity needs 0 < lo < hi");
    require(scan_points >= 2, "match_fidelity needs at least two scan points");
    auto g = [&](double z) {
        return pattern_fidelity(tmpl, pattern, z, target) - fidelity;
    };
    double a = lo;
    double ga = g(a);
    if (ga == 0.0) {
        return a;
    }
    for (int i = 1; i < scan_points; ++i) {
        double b = lo + (hi - lo) * i / (scan_points - 1);
        double gb = g(b);
        if (gb == 0.0) {
            return b;
        }
        if (std::isfinite(ga) && std::isfinite(gb) && (ga < 0) != (gb < 0)) {
            for (int it = 0; it < 100 && b - a > 1e-14 * b; ++it) {
                double mid = 0.5 * (a + b);
                double gm = g(mid);
                if ((gm < 0) == (ga < 0)) {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            return 0.5 * (a + b);
        }
        a = b;
        ga = gb;
    }
    return std::nullopt;
}

/// Inclusive grid start:stop:step; the endpoint is kept when within half a step.
inline std::vector<double> parse_zeta_grid(std::string_view text) {
    std::vector<double> parts;
    std::stringstream ss{std::string(text)};
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            require(used == item.size(), "malformed zeta grid '" + std::string(text) + "'");
        } catch (const std::logic_error &) {
            fail(ErrorKind::invalid_argument, "malformed zeta grid '" + std::string(text) + "'");
        }
    }
    require(parts.size() == 3, "zeta grid must be start:stop:step");
    double start = parts[0], stop = parts[1], step = parts[2];
    require(step > 0 && stop >= start && start >= 0, "zeta grid needs 0 <= start <= stop and step > 0");
    std::vector<double> grid;
    for (long i = 0;; ++i) {
        double z = start + static_cast<double>(i) * step;
        if (z > stop + 0.5 * step) {
            break;
        }
        if (z > stop) {
            z = stop;  // within half a step of the endpoint
        }
        if (!grid.empty() && z <= grid.back()) {
            break;
        }
        grid.push_back(z);
    }
    return grid;
}

}  // namespace heraldsim

#endif
