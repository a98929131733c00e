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

#ifndef HERALDSIM_RNG_HPP
#define HERALDSIM_RNG_HPP

#include <cstdint>
#include <limits>

namespace heraldsim {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based stream: the state for shot i is a hash of (seed, i), so any shot can be
/// regenerated independently of how the shots were partitioned across workers.
class ShotRng {
   public:
    using result_type = std::uint64_t;

    ShotRng(std::uint64_t seed, std::uint64_t stream)
        : state_(splitmix64_mix(splitmix64_mix(seed ^ 0x6a09e667f3bcc909ULL) + stream * 0x9e3779b97f4a7c15ULL)) {
    }

    static constexpr result_type min() {
        return 0;
    }
    static constexpr result_type max() {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint32_t below(std::uint32_t n) {
        // Lemire's multiply-shift; the bias for n <= 64 is below 2^-58.
        return static_cast<std::uint32_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

    bool bernoulli(double p) {
        return uniform() < p;
    }

   private:
    std::uint64_t state_;
};

}  // namespace heraldsim

#endif
