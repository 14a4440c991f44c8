#include <cmath>

#include <doctest.h>

#include "ewsim/coincidence.hpp"
#include "ewsim/oracle.hpp"
#include "ewsim/protocol.hpp"
#include "ewsim/rng.hpp"

using namespace ewsim;

TEST_CASE("accumulator basics") {
    CoincidenceStats stats;
    CHECK(stats.n_trials == 0);
    CHECK(stats.count(channel_bit(Channel::S1)) == 0);

    stats.add(make_mask({Channel::S1, Channel::AS2}));
    CHECK(stats.n_trials == 1);
    CHECK(stats.count(channel_bit(Channel::S1)) == 1);
    CHECK(stats.count(make_mask({Channel::S1, Channel::AS2})) == 1);
    CHECK(stats.count(make_mask({Channel::S1, Channel::S3})) == 0);

    CHECK_THROWS_AS(stats.count(make_mask({Channel::S1, Channel::S2, Channel::S3})),
                    ConfigError); // triple was not watched
}

TEST_CASE("merge equals concatenation") {
    const std::uint8_t watched = make_mask({Channel::S1, Channel::AS2, Channel::S3});
    for (int c = 0; c < 50; ++c) {
        CoincidenceStats a({watched}), b({watched}), whole({watched});
        CounterRng rng(31, static_cast<std::uint64_t>(c), 0);
        const int na = static_cast<int>(rng.uniform() * 200);
        const int nb = static_cast<int>(rng.uniform() * 200);
        for (int i = 0; i < na + nb; ++i) {
            const std::uint8_t mask = static_cast<std::uint8_t>(rng() & 0x7f);
            (i < na ? a : b).add(mask);
            whole.add(mask);
        }
        a.merge(b);
        CHECK(a == whole);
    }
    CoincidenceStats a({watched}), c({make_mask({Channel::S1, Channel::S2, Channel::S3})});
    CHECK_THROWS_AS(a.merge(c), ConfigError);
}

TEST_CASE("counter nesting invariant") {
    const std::uint8_t watched = make_mask({Channel::S1, Channel::AS2, Channel::S3});
    CoincidenceStats stats({watched});
    CounterRng rng(77, 0, 0);
    for (int i = 0; i < 5000; ++i) stats.add(static_cast<std::uint8_t>(rng() & 0x7f));
    const std::uint64_t s1 = stats.count(channel_bit(Channel::S1));
    const std::uint64_t pair = stats.count(make_mask({Channel::S1, Channel::AS2}));
    const std::uint64_t triple = stats.count(watched);
    CHECK(triple <= pair);
    CHECK(pair <= s1);
    CHECK(s1 <= stats.n_trials);
}

TEST_CASE("conditional probability") {
    CoincidenceStats stats;
    for (int i = 0; i < 10; ++i) stats.add(make_mask({Channel::S1, Channel::AS2}));
    const EstimateWithError p =
        conditional_prob(stats, Channel::AS2, channel_bit(Channel::S1));
    CHECK(p.value == 1.0);
    CHECK(p.stderr_ == 0.0);
    CHECK_THROWS_AS(conditional_prob(stats, Channel::AS2, channel_bit(Channel::S3)),
                    StatsError);
}

TEST_CASE("g2 of independent channels is 1") {
    CoincidenceStats stats;
    const double p = 0.03;
    for (int i = 0; i < 1000000; ++i) {
        CounterRng rng(55, static_cast<std::uint64_t>(i), 0);
        std::uint8_t mask = 0;
        if (rng.uniform() < p) mask |= channel_bit(Channel::S1);
        if (rng.uniform() < p) mask |= channel_bit(Channel::AS2);
        stats.add(mask);
    }
    const EstimateWithError g2 = cross_correlation_g2(stats, Channel::S1, Channel::AS2);
    CHECK(std::abs(g2.value - 1.0) < 5 * g2.stderr_);

    CoincidenceStats empty;
    empty.add(0);
    CHECK_THROWS_AS(cross_correlation_g2(empty, Channel::S1, Channel::AS2), StatsError);
}

TEST_CASE("heralded g2 matches the exact joint distribution") {
    protocol::ProtocolConfig cfg;
    // sinh^2(kappa dt) = 0.05 at the write pulse
    cfg.k_cal = std::asinh(std::sqrt(0.05)) / std::sqrt(220.0);
    cfg.storage_time_ns = 0.0;
    cfg.s2_scatter = false;
    cfg.retrieval_sin2_r1 = 1.0;
    cfg.retrieval_sin2_r2 = 0.0;
    cfg.det_eff_s = 1.0;
    cfg.det_eff_as = 1.0;
    cfg.trials = 300000;
    protocol::TrialEngine eng(cfg);
    CoincidenceStats stats = protocol::run_many(eng, 0, cfg.trials, {});
    const EstimateWithError g2 = cross_correlation_g2(stats, Channel::S1, Channel::AS2);
    const auto dist = oracle::exact_protocol_click_distribution(cfg);
    auto marg = [&](std::uint8_t m) {
        double s = 0;
        for (const auto& [mask, q] : dist)
            if ((mask & m) == m) s += q;
        return s;
    };
    const double exact = marg(make_mask({Channel::S1, Channel::AS2})) /
                         (marg(channel_bit(Channel::S1)) * marg(channel_bit(Channel::AS2)));
    CHECK(std::abs(g2.value - exact) < 3 * g2.stderr_);
    // lossless heralded source at p = 0.05: g2 close to 1 + 1/p
    CHECK(exact == doctest::Approx(21.0).epsilon(0.15));
}

TEST_CASE("g2 decay fit") {
    SUBCASE("recovers generating parameters on noiseless data") {
        const double C = 20, A = 1e-5, B = 1e-3;
        std::vector<std::pair<double, double>> pts;
        for (double t : {0.0, 50.0, 120.0, 200.0, 300.0, 420.0})
            pts.emplace_back(t, 1 + C / (1 + A * t * t + B * t));
        const G2DecayFit fit = fit_g2_decay(pts);
        CHECK(fit.C == doctest::Approx(C).epsilon(1e-9));
        CHECK(fit.A == doctest::Approx(A).epsilon(1e-7));
        CHECK(fit.B == doctest::Approx(B).epsilon(1e-8));
        CHECK(fit.rms_rel < 1e-10);
        // the t=0 point evaluates to 1 + C
        CHECK(pts[0].second == doctest::Approx(1 + C));
    }
    SUBCASE("rejects g2 <= 1") {
        CHECK_THROWS_AS(fit_g2_decay({{0, 20}, {100, 0.9}, {200, 5}}), FitError);
    }
    SUBCASE("rejects degenerate abscissae") {
        CHECK_THROWS_AS(fit_g2_decay({{100, 20}, {100, 19}, {100, 18}}), FitError);
    }
    SUBCASE("needs at least three points") {
        CHECK_THROWS_AS(fit_g2_decay({{0, 20}, {100, 10}}), FitError);
    }
}

TEST_CASE("csv export") {
    CoincidenceStats stats;
    stats.add(make_mask({Channel::S1, Channel::AS2}));
    const std::string csv = stats_to_csv(stats);
    CHECK(csv.find("pattern,count\r\n") == 0);
    CHECK(csv.find("trials,1") != std::string::npos);
    CHECK(csv.find("S1&AS2,1") != std::string::npos);
}
