// coincidence.hpp
// Singles / n-fold coincidence counters over trial outcomes, conditional
// probabilities with binomial errors, the gated cross-correlation g2 and
// the g2-vs-storage-time decay fit.

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ewsim/errors.hpp"
#include "ewsim/modes.hpp"

namespace ewsim {

struct EstimateWithError {
    double value = 0;
    double stderr_ = 0; // one binomial standard deviation
};

// Mergeable accumulator: counts are exact integers, merge of two stats
// equals the stats of the concatenated trial streams.
struct CoincidenceStats {
    std::uint64_t n_trials = 0;
    std::array<std::uint64_t, kNumChannels> singles{};
    std::array<std::array<std::uint64_t, kNumChannels>, kNumChannels> pairs{};
    std::vector<std::uint8_t> watched;           // configured masks, popcount >= 3
    std::map<std::uint8_t, std::uint64_t> tuples; // counts for watched masks

    explicit CoincidenceStats(std::vector<std::uint8_t> watched_masks = {})
        : watched(std::move(watched_masks)) {
        for (std::uint8_t m : watched) tuples[m] = 0;
    }

    void add(std::uint8_t clickmask) {
        ++n_trials;
        for (int i = 0; i < kNumChannels; ++i) {
            if (!(clickmask & (1u << i))) continue;
            ++singles[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < kNumChannels; ++j)
                if (clickmask & (1u << j))
                    ++pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        for (auto& [mask, count] : tuples)
            if ((clickmask & mask) == mask) ++count;
    }

    void merge(const CoincidenceStats& other) {
        if (watched != other.watched)
            throw ConfigError("CoincidenceStats::merge: incompatible watched patterns");
        n_trials += other.n_trials;
        for (int i = 0; i < kNumChannels; ++i) {
            singles[static_cast<std::size_t>(i)] += other.singles[static_cast<std::size_t>(i)];
            for (int j = 0; j < kNumChannels; ++j)
                pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                    other.pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        for (const auto& [mask, count] : other.tuples) tuples[mask] += count;
    }

    std::uint64_t count(std::uint8_t mask) const {
        const int pc = std::popcount(static_cast<unsigned>(mask));
        if (pc == 0) return n_trials;
        if (pc == 1) return singles[static_cast<std::size_t>(std::countr_zero(static_cast<unsigned>(mask)))];
        if (pc == 2) {
            const int i = std::countr_zero(static_cast<unsigned>(mask));
            const int j = std::countr_zero(static_cast<unsigned>(mask) >> (i + 1)) + i + 1;
            return pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        auto it = tuples.find(mask);
        if (it == tuples.end())
            throw ConfigError("CoincidenceStats::count: pattern was not watched");
        return it->second;
    }

    bool operator==(const CoincidenceStats&) const = default;
};

inline std::uint8_t make_mask(std::initializer_list<Channel> chans) {
    std::uint8_t m = 0;
    for (Channel c : chans) m |= channel_bit(c);
    return m;
}

template <typename OutcomeRange>
CoincidenceStats accumulate(const OutcomeRange& outcomes,
                            std::vector<std::uint8_t> watched) {
    CoincidenceStats stats(std::move(watched));
    for (const auto& o : outcomes) stats.add(o.clicks);
    return stats;
}

// P(target | given) = count(given | target) / count(given), binomial error.
// given_mask may be empty (condition on nothing, i.e. per-trial probability).
inline EstimateWithError conditional_prob(const CoincidenceStats& stats, Channel target,
                                          std::uint8_t given_mask) {
    const std::uint64_t n_given = stats.count(given_mask);
    if (n_given == 0)
        throw StatsError("conditional_prob: insufficient statistics (zero conditioning counts)");
    const std::uint64_t joint = stats.count(static_cast<std::uint8_t>(given_mask | channel_bit(target)));
    const double p = static_cast<double>(joint) / static_cast<double>(n_given);
    const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n_given));
    return {p, se};
}

// Gated (per-trial) normalized cross correlation:
//   g2 = N_ab * N_trials / (N_a * N_b)
// Error by uncorrelated binomial propagation (approximation).
inline EstimateWithError cross_correlation_g2(const CoincidenceStats& stats, Channel a,
                                              Channel b) {
    const double na = static_cast<double>(stats.count(channel_bit(a)));
    const double nb = static_cast<double>(stats.count(channel_bit(b)));
    if (na == 0 || nb == 0)
        throw StatsError("cross_correlation_g2: insufficient statistics (zero singles)");
    const double nab =
        static_cast<double>(stats.count(static_cast<std::uint8_t>(channel_bit(a) | channel_bit(b))));
    const double g2 = nab * static_cast<double>(stats.n_trials) / (na * nb);
    const double rel =
        std::sqrt(1.0 / std::max(nab, 1.0) + 1.0 / na + 1.0 / nb);
    return {g2, g2 * rel};
}

struct G2DecayFit {
    double C = 0, A = 0, B = 0;
    double rms_y = 0;   // residual in reciprocal space y = 1/(g2-1)
    double rms_rel = 0; // relative RMS residual back in g2 space
};

// Fit g2(t) = 1 + C / (1 + A t^2 + B t) by linear least squares on
// y = 1/(g2 - 1) in the basis {1, t, t^2}.
inline G2DecayFit fit_g2_decay(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw FitError("fit_g2_decay: need at least 3 points");
    for (const auto& [t, g2] : points)
        if (g2 <= 1.0)
            throw FitError("fit_g2_decay: point with g2 <= 1 rejected (reciprocal undefined)");
    const int n = static_cast<int>(points.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double t = points[static_cast<std::size_t>(i)].first;
        x(i, 0) = 1.0;
        x(i, 1) = t;
        x(i, 2) = t * t;
        y(i) = 1.0 / (points[static_cast<std::size_t>(i)].second - 1.0);
    }
    Eigen::Matrix3d xtx = x.transpose() * x;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(xtx);
    if (!lu.isInvertible())
        throw FitError("fit_g2_decay: singular design matrix (collinear abscissae)");
    Eigen::Vector3d c = lu.solve(x.transpose() * y);
    if (c(0) == 0.0) throw FitError("fit_g2_decay: degenerate fit, 1/C = 0");
    G2DecayFit fit;
    fit.C = 1.0 / c(0);
    fit.B = c(1) / c(0);
    fit.A = c(2) / c(0);
    double ss_y = 0, ss_rel = 0;
    for (int i = 0; i < n; ++i) {
        const double t = points[static_cast<std::size_t>(i)].first;
        const double y_hat = c(0) + c(1) * t + c(2) * t * t;
        ss_y += (y(i) - y_hat) * (y(i) - y_hat);
        const double g2_hat = 1.0 + fit.C / (1.0 + fit.A * t * t + fit.B * t);
        const double g2_obs = points[static_cast<std::size_t>(i)].second;
        ss_rel += (g2_obs - g2_hat) * (g2_obs - g2_hat) / (g2_obs * g2_obs);
    }
    fit.rms_y = std::sqrt(ss_y / n);
    fit.rms_rel = std::sqrt(ss_rel / n);
    return fit;
}

// Flat (name, count) table, CSV with a header row.
inline std::string stats_to_csv(const CoincidenceStats& stats) {
    std::ostringstream os;
    os << "pattern,count\r\n";
    os << "trials," << stats.n_trials << "\r\n";
    for (int i = 0; i < kNumChannels; ++i)
        os << channel_name(static_cast<Channel>(i)) << ','
           << stats.singles[static_cast<std::size_t>(i)] << "\r\n";
    for (int i = 0; i < kNumChannels; ++i)
        for (int j = i + 1; j < kNumChannels; ++j)
            os << channel_name(static_cast<Channel>(i)) << '&'
               << channel_name(static_cast<Channel>(j)) << ','
               << stats.pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] << "\r\n";
    for (const auto& [mask, count] : stats.tuples) {
        bool first = true;
        for (int i = 0; i < kNumChannels; ++i)
            if (mask & (1u << i)) {
                if (!first) os << '&';
                os << channel_name(static_cast<Channel>(i));
                first = false;
            }
        os << ',' << count << "\r\n";
    }
    return os.str();
}

} // namespace ewsim
