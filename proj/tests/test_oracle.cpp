#include <cmath>

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "ewsim/oracle.hpp"

using namespace ewsim;

TEST_CASE("kraus channels") {
    SUBCASE("completeness sum K^dag K = I") {
        for (double param : {0.0, 0.054, 0.37, 1.0}) {
            for (auto kind : {oracle::KrausChannel::Kind::Loss,
                              oracle::KrausChannel::Kind::Dephase}) {
                const auto ks =
                    oracle::detail::kraus_ops({kind, param, Mode::Atom}, 5);
                Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(6, 6);
                for (const auto& K : ks) sum += K.adjoint() * K;
                CHECK((sum - Eigen::MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }
    SUBCASE("loss scales the mean photon number exactly") {
        oracle::DensityMatrix rho({Mode::Atom, Mode::S1}, 5);
        oracle::evolve_exact(rho, cached_squeeze(0.35, 0.0, 5), Mode::Atom, Mode::S1);
        const double before = rho.expected_photon_number(Mode::Atom);
        oracle::evolve_exact(rho, {oracle::KrausChannel::Kind::Loss, 0.62, Mode::Atom});
        CHECK(rho.expected_photon_number(Mode::Atom) ==
              doctest::Approx(0.62 * before).epsilon(1e-10));
    }
    SUBCASE("identity channel leaves the state unchanged") {
        oracle::DensityMatrix rho({Mode::Atom, Mode::S1}, 3);
        oracle::evolve_exact(rho, cached_squeeze(0.3, 0.0, 3), Mode::Atom, Mode::S1);
        // Loss with eta = 1 and Dephase with p = 0 are both identities
        const Eigen::MatrixXcd before = rho.matrix();
        oracle::evolve_exact(rho, {oracle::KrausChannel::Kind::Loss, 1.0, Mode::Atom});
        oracle::evolve_exact(rho, {oracle::KrausChannel::Kind::Dephase, 0.0, Mode::Atom});
        CHECK((rho.matrix() - before).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("density matrix invariants after a random circuit") {
    oracle::DensityMatrix rho({Mode::Atom, Mode::S1}, 4);
    oracle::evolve_exact(rho, cached_squeeze(0.3, 0.7, 4), Mode::Atom, Mode::S1);
    oracle::evolve_exact(rho, cached_beam_splitter(0.9, 0.2, 4), Mode::Atom, Mode::S1);
    oracle::evolve_exact(rho, {oracle::KrausChannel::Kind::Loss, 0.8, Mode::Atom});
    CHECK((rho.matrix() - rho.matrix().adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rho.trace() <= 1.0 + 1e-9);
    CHECK(rho.trace() >= 1.0 - 1e-3); // squeeze truncation leaks a little trace
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.matrix());
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
}

TEST_CASE("TMSV pair distribution at n_max = 6") {
    const double r = 0.3;
    oracle::DensityMatrix rho({Mode::Atom, Mode::S1}, 6);
    oracle::evolve_exact(rho, cached_squeeze(r, 0.0, 6), Mode::Atom, Mode::S1);
    const std::vector<double> p = rho.number_distribution(Mode::S1);
    const double c2 = std::cosh(r) * std::cosh(r);
    for (int n = 0; n <= 4; ++n)
        CHECK(p[static_cast<std::size_t>(n)] ==
              doctest::Approx(std::pow(std::tanh(r), 2 * n) / c2).epsilon(1e-8));
}

TEST_CASE("exact click probabilities") {
    SUBCASE("vacuum never clicks") {
        oracle::DensityMatrix rho({Mode::S1}, 3);
        const auto dist = oracle::click_probabilities_exact(rho, {{Mode::S1, 1.0, 0.0}});
        CHECK(dist.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("single photon clicks with the detector efficiency") {
        oracle::DensityMatrix one({Mode::S1}, 3);
        one.matrix().setZero();
        one.matrix()(1, 1) = 1.0;
        const auto dist = oracle::click_probabilities_exact(one, {{Mode::S1, 0.071, 0.0}});
        CHECK(dist.at(1) == doctest::Approx(0.071).epsilon(1e-12));
    }
    SUBCASE("distribution sums to one") {
        oracle::DensityMatrix rho({Mode::Atom, Mode::S1}, 4);
        oracle::evolve_exact(rho, cached_squeeze(0.25, 0.3, 4), Mode::Atom, Mode::S1);
        oracle::evolve_exact(rho, {oracle::KrausChannel::Kind::Loss, 0.9, Mode::S1});
        const auto dist = oracle::click_probabilities_exact(
            rho, {{Mode::Atom, 0.3, 0.001}, {Mode::S1, 0.7, 0.0}});
        double total = 0;
        for (const auto& [mask, p] : dist) {
            CHECK(p >= 0.0);
            total += p;
        }
        CHECK(total == doctest::Approx(rho.trace()).epsilon(1e-10));
        CHECK_THROWS_AS(oracle::click_probabilities_exact(
                            rho, {{Mode::S1, 0.3, 0.0}, {Mode::S1, 0.7, 0.0}}),
                        ConfigError);
    }
}

TEST_CASE("protocol oracle distribution is normalized and matches a quick run") {
    protocol::ProtocolConfig cfg;
    cfg.det_eff_s = 0.5;
    cfg.det_eff_as = 0.5;
    cfg.trials = 100000;
    const auto dist = oracle::exact_protocol_click_distribution(cfg);
    double total = 0;
    for (const auto& [mask, p] : dist) {
        CHECK(p >= 0.0);
        total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    protocol::TrialEngine eng(cfg);
    CoincidenceStats stats = protocol::run_many(eng, 0, cfg.trials, {});
    for (Channel c : {Channel::S1, Channel::S2, Channel::S3, Channel::AS2, Channel::AS4}) {
        double p = 0;
        for (const auto& [mask, q] : dist)
            if (mask & channel_bit(c)) p += q;
        const double f = static_cast<double>(stats.count(channel_bit(c))) /
                         static_cast<double>(cfg.trials);
        const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(cfg.trials));
        CHECK(std::abs(f - p) < 4 * sigma);
    }
    protocol::ProtocolConfig jitter = cfg;
    jitter.mzi_enabled = true;
    jitter.mzi_phase_sigma = 0.1;
    CHECK_THROWS_AS(oracle::exact_protocol_click_distribution(jitter), ConfigError);
}
