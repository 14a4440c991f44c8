// unitaries.hpp
// Elementary two-mode unitaries on a truncated Fock space, built by
// exponentiating the truncated generator (scaling-and-squaring under the
// hood). Shared by the trajectory simulator and the density-matrix oracle.
//
// Conventions, fixed once for the whole project:
//   beam splitter:    a -> a*cos(theta) + i*e^{+i*phi}*b*sin(theta)
//                     b -> i*e^{-i*phi}*a*sin(theta) + b*cos(theta)
//   two-mode squeeze: U = exp(-i*(r*e^{i*phi} a'b' + r*e^{-i*phi} a b)),
//                     vacuum -> pair amplitudes tanh^n(r)/cosh(r) (up to phase)

#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ewsim/errors.hpp"

namespace ewsim {

using cd = std::complex<double>;

// A (d^2 x d^2) operator acting on two modes with per-mode dimension d.
// Basis index of |n_a, n_b> is n_a*d + n_b; storage is row-major (out, in).
struct TwoModeOp {
    int dim = 0;                 // per-mode dimension, n_max + 1
    std::vector<cd> m;           // dim^2 x dim^2, row-major

    cd at(int out, int in) const { return m[static_cast<std::size_t>(out) * dim * dim + in]; }
};

namespace detail {

inline Eigen::MatrixXcd annihilation(int d) {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline TwoModeOp from_eigen(const Eigen::MatrixXcd& u, int d) {
    TwoModeOp op;
    op.dim = d;
    op.m.resize(static_cast<std::size_t>(d) * d * d * d);
    for (int r = 0; r < d * d; ++r)
        for (int c = 0; c < d * d; ++c)
            op.m[static_cast<std::size_t>(r) * d * d + c] = u(r, c);
    return op;
}

// Restrict a padded two-mode unitary to the unpadded truncation. Column
// norms drop below 1 where the true evolution leaks past n_max; the state
// tracks that loss as norm_deficit.
inline TwoModeOp restrict_padded(const Eigen::MatrixXcd& u_pad, int d, int dp) {
    TwoModeOp op;
    op.dim = d;
    op.m.resize(static_cast<std::size_t>(d) * d * d * d);
    for (int ao = 0; ao < d; ++ao)
        for (int bo = 0; bo < d; ++bo)
            for (int ai = 0; ai < d; ++ai)
                for (int bi = 0; bi < d; ++bi)
                    op.m[static_cast<std::size_t>(ao * d + bo) * d * d + (ai * d + bi)] =
                        u_pad(ao * dp + bo, ai * dp + bi);
    return op;
}

} // namespace detail

// Two-mode squeeze with squeeze parameter r >= 0. Built in a padded space so
// the matrix elements match the untruncated operator; weight pushed past
// n_max becomes truncation leakage.
inline TwoModeOp two_mode_squeeze_op(double r, double phase, int n_max, int pad = 8) {
    if (r < 0) throw ConfigError("two_mode_squeeze: r must be >= 0");
    if (n_max < 1) throw ConfigError("two_mode_squeeze: n_max must be >= 1");
    const int d = n_max + 1;
    const int dp = d + pad;
    const Eigen::MatrixXcd a = detail::annihilation(dp);
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(dp, dp);
    Eigen::MatrixXcd a1 = Eigen::MatrixXcd::Zero(dp * dp, dp * dp);
    Eigen::MatrixXcd a2 = a1;
    // kron(a, id) and kron(id, a) with |n_a, n_b> -> n_a*dp + n_b
    for (int i = 0; i < dp; ++i)
        for (int j = 0; j < dp; ++j) {
            if (a(i, j) != 0.0) {
                for (int k = 0; k < dp; ++k) {
                    a1(i * dp + k, j * dp + k) = a(i, j);
                    a2(k * dp + i, k * dp + j) = a(i, j);
                }
            }
        }
    const cd lam = r * std::exp(cd(0, phase));
    Eigen::MatrixXcd h = lam * a1.adjoint() * a2.adjoint() + std::conj(lam) * a1 * a2;
    Eigen::MatrixXcd u = (cd(0, -1) * h).exp();
    return detail::restrict_padded(u, d, dp);
}

// Beam splitter with mixing angle theta. The generator conserves total
// photon number, so exponentiating it directly on the truncated space is
// exactly unitary there (no leakage).
inline TwoModeOp beam_splitter_op(double theta, double phase, int n_max) {
    if (n_max < 1) throw ConfigError("beam_splitter: n_max must be >= 1");
    const int d = n_max + 1;
    const Eigen::MatrixXcd a = detail::annihilation(d);
    Eigen::MatrixXcd a1 = Eigen::MatrixXcd::Zero(d * d, d * d);
    Eigen::MatrixXcd a2 = a1;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (a(i, j) != 0.0) {
                for (int k = 0; k < d; ++k) {
                    a1(i * d + k, j * d + k) = a(i, j);
                    a2(k * d + i, k * d + j) = a(i, j);
                }
            }
        }
    const cd g = theta * std::exp(cd(0, phase));
    Eigen::MatrixXcd h = g * a1.adjoint() * a2 + std::conj(g) * a1 * a2.adjoint();
    Eigen::MatrixXcd u = (cd(0, 1) * h).exp();
    return detail::from_eigen(u, d);
}

// Process-wide cache; operator construction runs a matrix exponential, so
// hot loops fetch prebuilt matrices instead.
namespace detail {

using OpKey = std::tuple<int, double, double, int>; // kind, param, phase, n_max

inline const TwoModeOp& cached_op(int kind, double param, double phase, int n_max) {
    static std::map<OpKey, TwoModeOp> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    OpKey key{kind, param, phase, n_max};
    auto it = cache.find(key);
    if (it == cache.end()) {
        TwoModeOp op = (kind == 0) ? two_mode_squeeze_op(param, phase, n_max)
                                   : beam_splitter_op(param, phase, n_max);
        it = cache.emplace(key, std::move(op)).first;
    }
    return it->second;
}

} // namespace detail

inline const TwoModeOp& cached_squeeze(double r, double phase, int n_max) {
    return detail::cached_op(0, r, phase, n_max);
}

inline const TwoModeOp& cached_beam_splitter(double theta, double phase, int n_max) {
    return detail::cached_op(1, theta, phase, n_max);
}

} // namespace ewsim
