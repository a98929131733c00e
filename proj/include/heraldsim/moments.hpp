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

#ifndef HERALDSIM_MOMENTS_HPP
#define HERALDSIM_MOMENTS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "heraldsim/detector.hpp"
#include "heraldsim/error.hpp"
#include "heraldsim/numeric.hpp"

namespace heraldsim {

/// Normally ordered click moments mu_m, m = 0..N, with standard errors (zero for theory input).
struct MomentVector {
    std::vector<double> values;
    std::vector<double> sigmas;

    int max_order() const {
        return static_cast<int>(values.size()) - 1;
    }
};

/// Hankel matrix M[i][j] = mu_(i+j) with matching standard errors.
struct MomentMatrix {
    Eigen::MatrixXd values;
    Eigen::MatrixXd sigmas;

    int size() const {
        return static_cast<int>(values.rows());
    }
};

struct NegativityResult {
    /// Minimal eigenvalue of the moment matrix; negative values certify nonclassical light.
    double value = 0;
    double sigma = 0;
    /// |value| / sigma, or +inf for exact input with a nonzero value.
    double significance = 0;
    Eigen::VectorXd eigvec;
};

/// Weight of k clicks in the m-th normally ordered moment, C(k,m) / C(N,m).
inline double moment_weight(int k, int m, int N) {
    return binomial<double>(k, m) / binomial<double>(N, m);
}

/// mu_m = sum_k C(k,m)/C(N,m) c_k. Standard errors follow from the sample size when the
/// distribution is an estimate, otherwise from the per-bin sigmas in quadrature.
inline MomentVector click_moments(const ClickDistribution &c) {
    const int N = c.bins();
    require(N >= 1, "click distribution needs at least two entries");
    MomentVector mv;
    mv.values.assign(static_cast<std::size_t>(N) + 1, 0.0);
    mv.sigmas.assign(static_cast<std::size_t>(N) + 1, 0.0);
    for (int m = 0; m <= N; ++m) {
        CompensatedSum<double> mean, square;
        for (int k = m; k <= N; ++k) {
            double f = moment_weight(k, m, N);
            mean.add(f * c.probs[static_cast<std::size_t>(k)]);
            square.add(f * f * c.probs[static_cast<std::size_t>(k)]);
        }
        mv.values[static_cast<std::size_t>(m)] = mean.value();
        if (c.samples >= 2) {
            double var = square.value() - mean.value() * mean.value();
            mv.sigmas[static_cast<std::size_t>(m)] = std::sqrt(std::max(0.0, var) / static_cast<double>(c.samples - 1));
        } else if (c.has_sigmas()) {
            double acc = 0;
            for (int k = m; k <= N; ++k) {
                double f = moment_weight(k, m, N);
                double s = c.sigmas[static_cast<std::size_t>(k)];
                acc += f * f * s * s;
            }
            mv.sigmas[static_cast<std::size_t>(m)] = std::sqrt(acc);
        }
    }
    return mv;
}

/// Moment matrix of size order+1, using moments up to 2*order. The default order is floor(N/2).
inline MomentMatrix moment_matrix(const MomentVector &mv, int N, int order = -1) {
    if (order < 0) {
        order = N / 2;
    }
    require(2 * order <= mv.max_order(), "moment matrix of order " + std::to_string(order) + " needs moments up to " +
                                             std::to_string(2 * order) + ", have " + std::to_string(mv.max_order()));
    MomentMatrix M;
    M.values.resize(order + 1, order + 1);
    M.sigmas.resize(order + 1, order + 1);
    for (int i = 0; i <= order; ++i) {
        for (int j = 0; j <= order; ++j) {
            auto idx = static_cast<std::size_t>(i + j);
            M.values(i, j) = mv.values[idx];
            M.sigmas(i, j) = idx < mv.sigmas.size() ? mv.sigmas[idx] : 0.0;
        }
    }
    return M;
}

/// [(v^2)^T sigma(M)^2 (v^2)]^(1/2), with squares taken entrywise.
inline double negativity_error(const MomentMatrix &M, const Eigen::VectorXd &v) {
    Eigen::VectorXd v2 = v.array().square().matrix();
    Eigen::MatrixXd s2 = M.sigmas.array().square().matrix();
    double q = v2.dot(s2 * v2);
    return std::sqrt(std::max(0.0, q));
}

/// Minimal eigenvalue and its eigenvector. Degenerate minima pick the candidate with the
/// largest absolute first nonzero component; the sign makes that component positive.
inline NegativityResult negativity(const MomentMatrix &M) {
    require(M.values.rows() == M.values.cols() && M.values.rows() >= 1, "moment matrix must be square");
    require(M.values.isApprox(M.values.transpose(), 1e-12) || M.values.norm() == 0.0, "moment matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M.values);
    if (solver.info() != Eigen::Success) {
        fail(ErrorKind::numerical_failure, "symmetric eigensolver did not converge");
    }
    const auto &evals = solver.eigenvalues();  // ascending
    const auto &evecs = solver.eigenvectors();
    constexpr double tie_tol = 1e-12;
    auto first_nonzero = [](const Eigen::VectorXd &v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (std::abs(v(i)) > 1e-14) {
                return i;
            }
        }
        return Eigen::Index{0};
    };
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < evals.size() && evals(c) - evals(0) <= tie_tol; ++c) {
        Eigen::Index ib = first_nonzero(evecs.col(best));
        Eigen::Index ic = first_nonzero(evecs.col(c));
        // Lexicographic comparison: an earlier nonzero component wins, then its magnitude.
        if (ic < ib || (ic == ib && std::abs(evecs(ic, c)) > std::abs(evecs(ib, best)))) {
            best = c;
        }
    }
    NegativityResult r;
    r.value = evals(0);
    r.eigvec = evecs.col(best).normalized();
    if (r.eigvec(first_nonzero(r.eigvec)) < 0) {
        r.eigvec = -r.eigvec;
    }
    r.sigma = negativity_error(M, r.eigvec);
    if (r.sigma > 0) {
        r.significance = std::abs(r.value) / r.sigma;
    } else {
        r.significance = r.value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return r;
}

}  // namespace heraldsim

#endif
