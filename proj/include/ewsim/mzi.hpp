// mzi.hpp
// Two-readout interference: combine the AS2 (long arm) and AS4 (short arm)
// retrieval modes on a phase-controlled splitter into AS5/AS6, fit the
// resulting fringes, and evaluate the collapse-hypothesis visibility bound.

#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "ewsim/errors.hpp"
#include "ewsim/fock.hpp"
#include "ewsim/modes.hpp"
#include "ewsim/unitaries.hpp"

namespace ewsim::mzi {

struct PhaseScanPoint {
    double beta = 0;   // radians
    double R = 0;      // normalized ratio in [0,1]; complement is 1 - R
    double stderr_ = 0;
};

struct VisibilityFit {
    double a = 0;        // amplitude
    double V = 0;        // visibility; reported raw, flagged if > 1
    double delta = 0;    // phase offset, radians
    double residual = 0; // RMS residual of the fit
    double v_stderr = 0; // 1-sigma error on V (delta method)
    bool over_one = false;
};

struct MeasuredProbs {
    double p_s1 = 0;
    double p_s3 = 0;
    double p_s3_given_s1 = 0;
    double p_as2_given_s1 = 0;
    double p_as4_given_s1 = 0;
    double p_as4_given_s3 = 0;
};

// Phase beta on the short-arm mode, then a splitter; the outputs are
// relabeled AS5/AS6. Photon number over the two arms is conserved exactly.
inline void interfere_readouts(fock::StateVector& state, double beta,
                               double theta_bs = 0.78539816339744830961566084581988) {
    if (!state.has_mode(Mode::AS2) || !state.has_mode(Mode::AS4))
        throw ConfigError("interfere_readouts: AS2 and AS4 must be in the register");
    state.apply_phase(Mode::AS4, beta);
    state.apply_two_mode(cached_beam_splitter(theta_bs, 0.0, state.n_max()), Mode::AS2,
                         Mode::AS4);
    state.rename_mode(Mode::AS2, Mode::AS5);
    state.rename_mode(Mode::AS4, Mode::AS6);
}

// Least squares of R(beta) = c0 + c1 cos(beta) + c2 sin(beta), mapped to
// the fringe form R = a [0.5 + 0.5 V cos(beta + delta)].
inline VisibilityFit fit_visibility(const std::vector<PhaseScanPoint>& points) {
    std::vector<double> distinct;
    for (const PhaseScanPoint& p : points) {
        bool seen = false;
        for (double b : distinct) seen = seen || std::abs(b - p.beta) < 1e-12;
        if (!seen) distinct.push_back(p.beta);
    }
    if (distinct.size() < 3)
        throw FitError("fit_visibility: need at least 3 distinct phases");
    const int n = static_cast<int>(points.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        x(i, 1) = std::cos(p.beta);
        x(i, 2) = std::sin(p.beta);
        y(i) = p.R;
    }
    const Eigen::Matrix3d xtx = x.transpose() * x;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(xtx);
    if (!lu.isInvertible()) throw FitError("fit_visibility: singular design matrix");
    const Eigen::Vector3d c = lu.solve(x.transpose() * y);
    if (c(0) <= 0.0) throw FitError("fit_visibility: degenerate data (c0 <= 0)");
    VisibilityFit fit;
    fit.a = 2.0 * c(0);
    const double amp = std::sqrt(c(1) * c(1) + c(2) * c(2));
    fit.V = amp / c(0);
    fit.delta = (amp > 0) ? std::atan2(-c(2), c(1)) : 0.0;
    fit.over_one = fit.V > 1.0;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = y(i) - (c(0) + c(1) * x(i, 1) + c(2) * x(i, 2));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    // delta-method error on V from the unweighted-LSQ covariance
    if (n > 3) {
        const double sigma2 = ss / (n - 3);
        const Eigen::Matrix3d cov = sigma2 * lu.inverse();
        Eigen::Vector3d grad;
        if (amp > 0) {
            grad << -amp / (c(0) * c(0)), c(1) / (amp * c(0)), c(2) / (amp * c(0));
        } else {
            grad << 0, 1.0 / c(0), 1.0 / c(0);
        }
        fit.v_stderr = std::sqrt(std::max(0.0, double(grad.transpose() * cov * grad)));
    }
    return fit;
}

// Collapse-hypothesis visibility estimate from the measured conditional
// probabilities; |c5|^2 = (P_AS4|S1 / P_AS2|S1) * (P_S3|S1 / P_S3).
inline double estimate_visibility_VE(const MeasuredProbs& p) {
    if (p.p_as2_given_s1 <= 0)
        throw ConfigError("estimate_visibility_VE: P(AS2|S1) must be > 0");
    if (p.p_s3 <= 0) throw ConfigError("estimate_visibility_VE: P(S3) must be > 0");
    const double c5sq = (p.p_as4_given_s1 / p.p_as2_given_s1) * (p.p_s3_given_s1 / p.p_s3);
    const double denom = c5sq * (p.p_as4_given_s1 + p.p_as4_given_s3) +
                         (p.p_as2_given_s1 + p.p_as4_given_s3);
    if (denom <= 0) throw ConfigError("estimate_visibility_VE: zero denominator");
    return 2.0 * std::sqrt(p.p_as2_given_s1 * p.p_as4_given_s3) / denom;
}

} // namespace ewsim::mzi
