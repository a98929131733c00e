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

#ifndef HERALDSIM_MCSIM_HPP
#define HERALDSIM_MCSIM_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "heraldsim/detector.hpp"
#include "heraldsim/error.hpp"
#include "heraldsim/numeric.hpp"
#include "heraldsim/protocol.hpp"
#include "heraldsim/rng.hpp"

namespace heraldsim {

/// Photon-number distribution of the signal mode, indexed 0..cutoff.
struct PhotonDist {
    std::vector<double> probs;

    double total() const {
        return compensated_total(probs);
    }
    double mean() const {
        double s = 0;
        for (std::size_t n = 0; n < probs.size(); ++n) {
            s += static_cast<double>(n) * probs[n];
        }
        return s / total();
    }
};

/// Probability that j pairs are created when the signal mode holds m photons:
/// C(m+j, j) lambda^j (1-lambda)^(m+1), for j = 0..jmax.
inline std::vector<double> gain_kernel(int m, double lambda, int jmax) {
    require(m >= 0 && jmax >= 0, "gain_kernel needs m >= 0 and jmax >= 0");
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        fail(ErrorKind::invalid_argument, "pair parameter lambda must lie in [0, 1)");
    }
    std::vector<double> probs(static_cast<std::size_t>(jmax) + 1, 0.0);
    double p = std::pow(1.0 - lambda, m + 1);
    probs[0] = p;
    for (int j = 1; j <= jmax; ++j) {
        p *= lambda * static_cast<double>(m + j) / static_cast<double>(j);
        probs[static_cast<std::size_t>(j)] = p;
    }
    return probs;
}

/// Binomial thinning: probability that s of n photons survive.
inline std::vector<double> loss_kernel(int n, double eta) {
    require(n >= 0, "loss_kernel needs n >= 0");
    require(eta >= 0.0 && eta <= 1.0, "efficiency must lie in [0, 1]");
    std::vector<double> probs(static_cast<std::size_t>(n) + 1, 0.0);
    for (int s = 0; s <= n; ++s) {
        probs[static_cast<std::size_t>(s)] = binomial<double>(n, s) * std::pow(eta, s) * std::pow(1.0 - eta, n - s);
    }
    return probs;
}

/// P(k clicks | n photons) for k = 0..N, for every n = 0..nmax. Built photon by photon: each photon
/// is lost with probability 1-eta, otherwise lands in an already-clicked bin with probability occ/N.
inline std::vector<std::vector<double>> click_table(int nmax, const DetectorConfig &det) {
    det.validate();
    const int N = det.bins;
    const double eta = det.efficiency;
    std::vector<std::vector<double>> table;
    table.reserve(static_cast<std::size_t>(nmax) + 1);
    std::vector<double> occ(static_cast<std::size_t>(N) + 1, 0.0);
    occ[0] = 1.0;
    table.push_back(occ);
    for (int n = 1; n <= nmax; ++n) {
        std::vector<double> next(static_cast<std::size_t>(N) + 1, 0.0);
        for (int c = 0; c <= N; ++c) {
            double p = occ[static_cast<std::size_t>(c)];
            if (p == 0.0) {
                continue;
            }
            double hit_new = eta * static_cast<double>(N - c) / static_cast<double>(N);
            next[static_cast<std::size_t>(c)] += p * (1.0 - hit_new);
            if (c < N) {
                next[static_cast<std::size_t>(c + 1)] += p * hit_new;
            }
        }
        occ = std::move(next);
        table.push_back(occ);
    }
    return table;
}

inline std::vector<double> click_kernel(int n, const DetectorConfig &det) {
    require(n >= 0, "click_kernel needs n >= 0");
    return click_table(n, det).back();
}

struct CutoffPolicy {
    int initial = 20;
    int ceiling = 320;
    double tail_tol = 1e-12;
};

/// Replacement for the pair-creation law; exists so verification can inject faults.
using GainKernelFn = std::function<std::vector<double>(int m, double lambda, int jmax)>;

struct ChainResult {
    /// Probability of the herald pattern.
    double probability = 0;
    /// Normalized photon-number distribution of the heralded signal (empty if probability is 0).
    PhotonDist signal;
    /// Signal click statistics (empty if probability is 0).
    ClickDistribution clicks;
    int cutoff = 0;
    /// Unconditioned probability mass discarded at the photon-number cutoff.
    double tail_mass = 0;
};

/// Forward propagation of the photon-number distribution through the passes of a pattern.
/// With `total_passes` larger than the pattern, the remaining passes run with their herald
/// outcome summed over (the prefix semantics of conditioning on longer records).
inline ChainResult exact_chain(const LoopConfig &cfg, const HeraldPattern &pattern, const CutoffPolicy &policy = {},
                               const GainKernelFn &gain = {}, int total_passes = -1) {
    const int t = std::max(pattern.passes(), total_passes);
    HeraldPattern padded = pattern;
    padded.clicks.resize(static_cast<std::size_t>(t), 0);
    cfg.validate_for(padded);
    require(policy.initial >= 1 && policy.ceiling >= policy.initial, "invalid cutoff policy");
    for (int cutoff = policy.initial;; cutoff = std::min(2 * cutoff, policy.ceiling)) {
        auto herald_clicks = click_table(cutoff, cfg.herald);
        std::vector<double> dist(static_cast<std::size_t>(cutoff) + 1, 0.0);
        dist[0] = 1.0;
        double dropped = 0.0;
        for (int pass = 0; pass < t; ++pass) {
            const double lambda = cfg.squeeze_for_pass(pass).lambda();
            const bool free = pass >= pattern.passes();
            const auto k = free ? std::size_t{0} : static_cast<std::size_t>(pattern.clicks[static_cast<std::size_t>(pass)]);
            std::vector<double> next(dist.size(), 0.0);
            for (int m = 0; m <= cutoff; ++m) {
                double pm = dist[static_cast<std::size_t>(m)];
                if (pm == 0.0) {
                    continue;
                }
                auto g = gain ? gain(m, lambda, cutoff - m) : gain_kernel(m, lambda, cutoff - m);
                CompensatedSum<double> kept;
                for (int j = 0; j <= cutoff - m; ++j) {
                    double gj = g[static_cast<std::size_t>(j)];
                    kept.add(gj);
                    double herald_weight = free ? 1.0 : herald_clicks[static_cast<std::size_t>(j)][k];
                    next[static_cast<std::size_t>(m + j)] += pm * gj * herald_weight;
                }
                dropped += pm * std::max(0.0, 1.0 - kept.value());
            }
            dist = std::move(next);
            if (pass + 1 < t) {
                double eta = cfg.loop_eff_after_pass(pass, t);
                std::vector<double> thinned(dist.size(), 0.0);
                for (int n = 0; n <= cutoff; ++n) {
                    double pn = dist[static_cast<std::size_t>(n)];
                    if (pn == 0.0) {
                        continue;
                    }
                    auto lk = loss_kernel(n, eta);
                    for (int s = 0; s <= n; ++s) {
                        thinned[static_cast<std::size_t>(s)] += pn * lk[static_cast<std::size_t>(s)];
                    }
                }
                dist = std::move(thinned);
            }
        }
        if (dropped > policy.tail_tol) {
            if (cutoff >= policy.ceiling) {
                fail(ErrorKind::cutoff_exceeded, "tail mass " + std::to_string(dropped) + " above tolerance at cutoff " +
                                                     std::to_string(cutoff));
            }
            continue;
        }
        ChainResult out;
        out.cutoff = cutoff;
        out.tail_mass = dropped;
        out.probability = compensated_total(dist);
        if (!(out.probability > 0.0)) {
            out.probability = 0.0;
            return out;
        }
        auto signal_clicks = click_table(cutoff, cfg.signal);
        out.signal.probs.resize(dist.size());
        std::vector<double> clicks(static_cast<std::size_t>(cfg.signal.bins) + 1, 0.0);
        for (std::size_t n = 0; n < dist.size(); ++n) {
            double p = dist[n] / out.probability;
            out.signal.probs[n] = p;
            for (std::size_t c = 0; c < clicks.size(); ++c) {
                clicks[c] += p * signal_clicks[n][c];
            }
        }
        out.clicks.probs = std::move(clicks);
        return out;
    }
}

// ---------------------------------------------------------------------------------------------
// Shot-by-shot sampling.

constexpr int max_record_passes = 32;

/// One shot: herald clicks per pass and the final signal click count.
struct ClickRecord {
    int passes = 0;
    std::array<std::uint8_t, max_record_passes> herald{};
    std::uint8_t signal = 0;

    /// A pattern shorter than the record matches on its leading passes; later passes are
    /// unconstrained. Heralding is causal, so the prefix frequency estimates the shorter pattern's P.
    bool matches(const HeraldPattern &p) const {
        if (p.passes() > passes) {
            return false;
        }
        for (int j = 0; j < p.passes(); ++j) {
            if (herald[static_cast<std::size_t>(j)] != p.clicks[static_cast<std::size_t>(j)]) {
                return false;
            }
        }
        return true;
    }

    HeraldPattern pattern() const {
        HeraldPattern p;
        for (int j = 0; j < passes; ++j) {
            p.clicks.push_back(herald[static_cast<std::size_t>(j)]);
        }
        return p;
    }
};

/// Flat storage of records with a fixed number of passes: t herald cells then the signal cell.
class RecordTable {
   public:
    RecordTable() = default;
    explicit RecordTable(int passes) : passes_(passes) {
        require(passes >= 1 && passes <= max_record_passes, "record pass count out of range");
    }

    int passes() const {
        return passes_;
    }
    std::size_t size() const {
        return passes_ == 0 ? 0 : cells_.size() / stride();
    }
    bool empty() const {
        return size() == 0;
    }

    void reserve(std::size_t n) {
        cells_.reserve(n * stride());
    }
    void resize(std::size_t n) {
        cells_.resize(n * stride());
    }

    void push_back(const ClickRecord &r) {
        require(r.passes == passes_, "record has the wrong number of passes");
        for (int j = 0; j < passes_; ++j) {
            cells_.push_back(r.herald[static_cast<std::size_t>(j)]);
        }
        cells_.push_back(r.signal);
    }

    void set(std::size_t i, const ClickRecord &r) {
        std::uint8_t *row = &cells_[i * stride()];
        for (int j = 0; j < passes_; ++j) {
            row[j] = r.herald[static_cast<std::size_t>(j)];
        }
        row[passes_] = r.signal;
    }

    ClickRecord operator[](std::size_t i) const {
        ClickRecord r;
        r.passes = passes_;
        const std::uint8_t *row = &cells_[i * stride()];
        for (int j = 0; j < passes_; ++j) {
            r.herald[static_cast<std::size_t>(j)] = row[j];
        }
        r.signal = row[passes_];
        return r;
    }

    void append(const RecordTable &other) {
        require(other.passes_ == passes_, "cannot append records with a different pass count");
        cells_.insert(cells_.end(), other.cells_.begin(), other.cells_.end());
    }

    bool operator==(const RecordTable &) const = default;

   private:
    std::size_t stride() const {
        return static_cast<std::size_t>(passes_) + 1;
    }

    int passes_ = 0;
    std::vector<std::uint8_t> cells_;
};

namespace detail {

inline int thin(ShotRng &rng, int n, double eta) {
    if (eta >= 1.0) {
        return n;
    }
    int kept = 0;
    for (int i = 0; i < n; ++i) {
        kept += rng.bernoulli(eta) ? 1 : 0;
    }
    return kept;
}

inline int distinct_bins(ShotRng &rng, int photons, int bins) {
    std::uint64_t mask = 0;
    for (int i = 0; i < photons; ++i) {
        mask |= std::uint64_t{1} << rng.below(static_cast<std::uint32_t>(bins));
    }
    return std::popcount(mask);
}

inline int sample_pairs(ShotRng &rng, int m, double lambda) {
    if (lambda <= 0.0) {
        return 0;
    }
    double u = rng.uniform();
    double p = std::pow(1.0 - lambda, m + 1);
    double cdf = p;
    int j = 0;
    while (u >= cdf && j < 100000) {
        ++j;
        p *= lambda * static_cast<double>(m + j) / static_cast<double>(j);
        cdf += p;
        if (p == 0.0) {
            break;
        }
    }
    return j;
}

}  // namespace detail

/// Simulates shot `index`: pairs created -> idler thinning -> herald bins -> loop loss -> ... ->
/// signal thinning -> signal bins. Depends only on (cfg, passes, seed, index).
inline ClickRecord sample_shot(const LoopConfig &cfg, int passes, std::uint64_t seed, std::uint64_t index) {
    ShotRng rng(seed, index);
    ClickRecord r;
    r.passes = passes;
    int photons = 0;
    for (int pass = 0; pass < passes; ++pass) {
        int pairs = detail::sample_pairs(rng, photons, cfg.squeeze_for_pass(pass).lambda());
        int detected = detail::thin(rng, pairs, cfg.herald.efficiency);
        r.herald[static_cast<std::size_t>(pass)] =
            static_cast<std::uint8_t>(detail::distinct_bins(rng, detected, cfg.herald.bins));
        photons += pairs;
        if (pass + 1 < passes) {
            photons = detail::thin(rng, photons, cfg.loop_eff_after_pass(pass, passes));
        }
    }
    int detected = detail::thin(rng, photons, cfg.signal.efficiency);
    r.signal = static_cast<std::uint8_t>(detail::distinct_bins(rng, detected, cfg.signal.bins));
    return r;
}

inline void validate_sampling(const LoopConfig &cfg, int passes, std::uint64_t shots) {
    require(shots >= 1, "shot count must be >= 1");
    require(passes >= 1 && passes <= max_record_passes, "pass count must lie in [1, " +
                                                            std::to_string(max_record_passes) + "]");
    cfg.validate_for(HeraldPattern{std::vector<int>(static_cast<std::size_t>(passes), 0)});
    for (int p = 0; p < passes; ++p) {
        require(cfg.squeeze_for_pass(p).lambda() < 1.0, "pair parameter must be < 1");
    }
}

/// Streams records in shot order in blocks; `sink(block, first_index)` is called once per block.
/// Each block is filled by up to `threads` workers over disjoint index ranges.
inline void sample_records(const LoopConfig &cfg, int passes, std::uint64_t shots, std::uint64_t seed, int threads,
                           const std::function<void(const RecordTable &, std::uint64_t)> &sink,
                           std::uint64_t block_size = 1 << 18) {
    validate_sampling(cfg, passes, shots);
    threads = std::max(1, threads);
    RecordTable block(passes);
    for (std::uint64_t first = 0; first < shots; first += block_size) {
        std::uint64_t count = std::min(block_size, shots - first);
        block.resize(count);
        auto fill = [&](std::uint64_t lo, std::uint64_t hi) {
            for (std::uint64_t i = lo; i < hi; ++i) {
                block.set(i, sample_shot(cfg, passes, seed, first + i));
            }
        };
        if (threads == 1) {
            fill(0, count);
        } else {
            std::vector<std::thread> pool;
            std::uint64_t chunk = (count + static_cast<std::uint64_t>(threads) - 1) / static_cast<std::uint64_t>(threads);
            for (int w = 0; w < threads; ++w) {
                std::uint64_t lo = std::min(count, chunk * static_cast<std::uint64_t>(w));
                std::uint64_t hi = std::min(count, lo + chunk);
                if (lo < hi) {
                    pool.emplace_back(fill, lo, hi);
                }
            }
            for (auto &th : pool) {
                th.join();
            }
        }
        sink(block, first);
    }
}

inline RecordTable sample_records(const LoopConfig &cfg, int passes, std::uint64_t shots, std::uint64_t seed,
                                  int threads = 1) {
    RecordTable all(passes);
    all.reserve(shots);
    sample_records(cfg, passes, shots, seed, threads, [&](const RecordTable &block, std::uint64_t) {
        all.append(block);
    });
    return all;
}

}  // namespace heraldsim

#endif
