// oracle.hpp
// Exact density-matrix evolution on small truncations: the brute-force
// ground truth for every Monte Carlo estimate. Dense matrices, <= 4 live
// modes; protocol-level checks retire modes sequentially (measure by a
// diagonal POVM, then trace) to stay inside that budget.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ewsim/errors.hpp"
#include "ewsim/modes.hpp"
#include "ewsim/protocol.hpp"
#include "ewsim/unitaries.hpp"

namespace ewsim::oracle {

class DensityMatrix {
public:
    DensityMatrix(std::vector<Mode> reg, int n_max)
        : register_(std::move(reg)), n_max_(n_max) {
        if (n_max_ < 1) throw ConfigError("DensityMatrix: n_max must be >= 1");
        if (register_.empty()) throw ConfigError("DensityMatrix: empty register");
        std::size_t d = 1;
        for (std::size_t i = 0; i < register_.size(); ++i)
            d *= static_cast<std::size_t>(n_max_ + 1);
        rho_ = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        rho_(0, 0) = 1.0;
    }

    int n_max() const { return n_max_; }
    int dim() const { return n_max_ + 1; }
    const std::vector<Mode>& register_modes() const { return register_; }
    const Eigen::MatrixXcd& matrix() const { return rho_; }
    Eigen::MatrixXcd& matrix() { return rho_; }

    int mode_index(Mode m) const {
        for (std::size_t i = 0; i < register_.size(); ++i)
            if (register_[i] == m) return static_cast<int>(i);
        throw ConfigError("DensityMatrix: unknown mode");
    }

    std::size_t stride(int k) const {
        std::size_t s = 1;
        for (int i = 0; i < k; ++i) s *= static_cast<std::size_t>(dim());
        return s;
    }

    int occupation(std::size_t basis_index, int k) const {
        return static_cast<int>((basis_index / stride(k)) % static_cast<std::size_t>(dim()));
    }

    double trace() const { return rho_.trace().real(); }

    void add_mode(Mode m) {
        for (Mode existing : register_) // tensor |0><0| as the new slowest factor
            if (existing == m) throw ConfigError("DensityMatrix: duplicate mode");
        const std::size_t old = static_cast<std::size_t>(rho_.rows());
        Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(
            static_cast<Eigen::Index>(old * static_cast<std::size_t>(dim())),
            static_cast<Eigen::Index>(old * static_cast<std::size_t>(dim())));
        next.topLeftCorner(static_cast<Eigen::Index>(old), static_cast<Eigen::Index>(old)) = rho_;
        rho_ = std::move(next);
        register_.push_back(m);
    }

    void trace_out(Mode m) {
        const int k = mode_index(m);
        const std::size_t s = stride(k);
        const int d = dim();
        const std::size_t total = static_cast<std::size_t>(rho_.rows());
        const std::size_t reduced = total / static_cast<std::size_t>(d);
        Eigen::MatrixXcd next =
            Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(reduced),
                                   static_cast<Eigen::Index>(reduced));
        for (std::size_t r = 0; r < total; ++r) {
            const std::size_t rn = (r / s) % static_cast<std::size_t>(d);
            const std::size_t rr = compress(r, s, d);
            for (std::size_t c = 0; c < total; ++c) {
                if (((c / s) % static_cast<std::size_t>(d)) != rn) continue;
                next(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(compress(c, s, d))) +=
                    rho_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            }
        }
        rho_ = std::move(next);
        register_.erase(register_.begin() + k);
    }

    void rename_mode(Mode from, Mode to) {
        register_[static_cast<std::size_t>(mode_index(from))] = to;
    }

    // Expands a two-mode operator to the full register.
    Eigen::MatrixXcd embed_two_mode(const TwoModeOp& op, Mode a, Mode b) const {
        const int d = dim();
        if (op.dim != d) throw ConfigError("oracle: operator dimension mismatch");
        const std::size_t sa = stride(mode_index(a));
        const std::size_t sb = stride(mode_index(b));
        const std::size_t total = static_cast<std::size_t>(rho_.rows());
        Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(total),
                                                    static_cast<Eigen::Index>(total));
        for (std::size_t base = 0; base < total; ++base) {
            if ((base / sa) % static_cast<std::size_t>(d) != 0) continue;
            if ((base / sb) % static_cast<std::size_t>(d) != 0) continue;
            for (int ao = 0; ao < d; ++ao)
                for (int bo = 0; bo < d; ++bo)
                    for (int ai = 0; ai < d; ++ai)
                        for (int bi = 0; bi < d; ++bi) {
                            const cd v = op.at(ao * d + bo, ai * d + bi);
                            if (v == cd(0, 0)) continue;
                            u(static_cast<Eigen::Index>(base + ao * sa + bo * sb),
                              static_cast<Eigen::Index>(base + ai * sa + bi * sb)) = v;
                        }
        }
        return u;
    }

    void apply_unitary(const TwoModeOp& op, Mode a, Mode b) {
        const Eigen::MatrixXcd u = embed_two_mode(op, a, b);
        rho_ = u * rho_ * u.adjoint();
    }

    void apply_phase(Mode m, double beta) {
        const std::size_t s = stride(mode_index(m));
        const int d = dim();
        const std::size_t total = static_cast<std::size_t>(rho_.rows());
        Eigen::VectorXcd ph(static_cast<Eigen::Index>(total));
        for (std::size_t i = 0; i < total; ++i)
            ph(static_cast<Eigen::Index>(i)) =
                std::exp(cd(0, beta * static_cast<double>((i / s) % static_cast<std::size_t>(d))));
        rho_ = ph.asDiagonal() * rho_ * ph.conjugate().asDiagonal();
    }

    // Diagonal marginal photon-number distribution of one mode.
    std::vector<double> number_distribution(Mode m) const {
        const int k = mode_index(m);
        std::vector<double> p(static_cast<std::size_t>(dim()), 0.0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(rho_.rows()); ++i)
            p[static_cast<std::size_t>(occupation(i, k))] +=
                rho_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
        return p;
    }

    double expected_photon_number(Mode m) const {
        const std::vector<double> p = number_distribution(m);
        double e = 0;
        for (std::size_t n = 0; n < p.size(); ++n) e += static_cast<double>(n) * p[n];
        return e;
    }

private:
    static std::size_t compress(std::size_t idx, std::size_t s, int d) {
        // removes the digit with stride s
        const std::size_t lo = idx % s;
        const std::size_t hi = idx / (s * static_cast<std::size_t>(d));
        return hi * s + lo;
    }

    std::vector<Mode> register_;
    int n_max_;
    Eigen::MatrixXcd rho_;
};

struct KrausChannel {
    enum class Kind { Loss, Dephase };
    Kind kind = Kind::Loss;
    double param = 0; // eta for Loss, p for Dephase
    Mode mode = Mode::Atom;
};

namespace detail {

// Single-mode Kraus operators; on the truncated space they satisfy
// sum K^dag K = I exactly.
inline std::vector<Eigen::MatrixXcd> kraus_ops(const KrausChannel& ch, int n_max) {
    const int d = n_max + 1;
    std::vector<Eigen::MatrixXcd> ks;
    if (ch.kind == KrausChannel::Kind::Loss) {
        const double eta = ch.param;
        if (eta < 0 || eta > 1) throw ConfigError("Loss channel: eta must be in [0,1]");
        for (int k = 0; k < d; ++k) {
            Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(d, d);
            for (int n = k; n < d; ++n) {
                double binom = 1.0;
                for (int i = 0; i < k; ++i)
                    binom *= static_cast<double>(n - i) / static_cast<double>(i + 1);
                K(n - k, n) = std::sqrt(binom * std::pow(eta, n - k) *
                                        std::pow(1.0 - eta, k));
            }
            ks.push_back(std::move(K));
        }
    } else {
        const double p = ch.param;
        if (p < 0 || p > 1) throw ConfigError("Dephase channel: p must be in [0,1]");
        ks.push_back(std::sqrt(1.0 - p) * Eigen::MatrixXcd::Identity(d, d));
        for (int n = 0; n < d; ++n) {
            Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(d, d);
            K(n, n) = std::sqrt(p);
            ks.push_back(std::move(K));
        }
    }
    return ks;
}

// Embeds a single-mode operator at mode index k.
inline Eigen::MatrixXcd embed_single(const Eigen::MatrixXcd& op, const DensityMatrix& rho,
                                     int k) {
    const int d = rho.dim();
    const std::size_t s = rho.stride(k);
    const std::size_t total = static_cast<std::size_t>(rho.matrix().rows());
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(total),
                                                static_cast<Eigen::Index>(total));
    for (std::size_t base = 0; base < total; ++base) {
        if ((base / s) % static_cast<std::size_t>(d) != 0) continue;
        for (int o = 0; o < d; ++o)
            for (int i = 0; i < d; ++i)
                if (op(o, i) != cd(0, 0))
                    u(static_cast<Eigen::Index>(base + o * s),
                      static_cast<Eigen::Index>(base + i * s)) = op(o, i);
    }
    return u;
}

} // namespace detail

inline void evolve_exact(DensityMatrix& rho, const TwoModeOp& unitary, Mode a, Mode b) {
    rho.apply_unitary(unitary, a, b);
}

inline void evolve_exact(DensityMatrix& rho, const KrausChannel& channel) {
    const int k = rho.mode_index(channel.mode);
    const std::vector<Eigen::MatrixXcd> ks = detail::kraus_ops(channel, rho.n_max());
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(rho.matrix().rows(), rho.matrix().cols());
    for (const Eigen::MatrixXcd& K : ks) {
        const Eigen::MatrixXcd Kf = detail::embed_single(K, rho, k);
        next += Kf * rho.matrix() * Kf.adjoint();
    }
    rho.matrix() = std::move(next);
}

struct DetectorSpec {
    Mode mode;
    double eta = 1.0;
    double dark_prob = 0.0;
};

// Exact joint click-pattern distribution for threshold detectors.
// Pattern bit i corresponds to detectors[i]. POVM elements are diagonal:
//   E_noclick = (1-dark)(1-eta)^n per mode.
inline std::map<std::uint32_t, double> click_probabilities_exact(
    const DensityMatrix& rho, const std::vector<DetectorSpec>& detectors) {
    for (std::size_t i = 0; i < detectors.size(); ++i)
        for (std::size_t j = i + 1; j < detectors.size(); ++j)
            if (detectors[i].mode == detectors[j].mode)
                throw ConfigError("click_probabilities_exact: duplicate detector modes");
    std::vector<int> kidx;
    kidx.reserve(detectors.size());
    for (const DetectorSpec& det : detectors) kidx.push_back(rho.mode_index(det.mode));
    std::map<std::uint32_t, double> dist;
    const std::size_t total = static_cast<std::size_t>(rho.matrix().rows());
    const std::uint32_t n_patterns = 1u << detectors.size();
    for (std::uint32_t pattern = 0; pattern < n_patterns; ++pattern) {
        double p = 0;
        for (std::size_t i = 0; i < total; ++i) {
            double w = rho.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
            if (w == 0) continue;
            for (std::size_t d = 0; d < detectors.size(); ++d) {
                const int n = rho.occupation(i, kidx[d]);
                const double e_nc = (1.0 - detectors[d].dark_prob) *
                                    std::pow(1.0 - detectors[d].eta, n);
                w *= (pattern & (1u << d)) ? (1.0 - e_nc) : e_nc;
            }
            p += w;
        }
        dist[pattern] = p;
    }
    return dist;
}

// --- Exact counterpart of the protocol trial engine -----------------------
//
// Returns the exact joint distribution over the 7-bit click mask of
// protocol::TrialOutcome, mirroring TrialEngine step by step. Measured
// modes are branched on the threshold POVM (sqrt(E) rho sqrt(E)) and then
// traced out, which is exact because the POVMs are diagonal and each mode
// is untouched after its measurement.
inline std::map<std::uint8_t, double> exact_protocol_click_distribution(
    const protocol::ProtocolConfig& cfg) {
    cfg.validate();
    if (cfg.mzi_phase_sigma != 0)
        throw ConfigError("oracle: phase jitter not supported; set mzi_phase_sigma = 0");
    const int nm = cfg.n_max;
    const double r_write = protocol::calibrate_coupling(cfg.energy(protocol::PulseRole::Write), cfg.k_cal);
    const double r_probe = protocol::calibrate_coupling(cfg.energy(protocol::PulseRole::Probe), cfg.k_cal);
    const double r_scatter =
        cfg.s2_scatter ? protocol::calibrate_coupling(cfg.energy(protocol::PulseRole::Read1), cfg.k_cal) : 0.0;
    const double theta_r1 = std::asin(std::sqrt(cfg.retrieval_sin2_r1));
    const double theta_r2 = std::asin(std::sqrt(cfg.retrieval_sin2_r2));
    const double eta_mem =
        protocol::memory_transmission(cfg.storage_time_ns, cfg.tau1_ns, cfg.tau2_ns);

    struct Branch {
        std::uint8_t mask = 0;
        double weight = 1.0;
        DensityMatrix rho;
    };
    std::vector<Branch> branches;
    branches.push_back({0, 1.0, DensityMatrix({Mode::Atom, Mode::S1}, nm)});

    auto apply_all = [&](auto&& fn) {
        for (Branch& b : branches) fn(b);
    };
    // POVM-branch on one mode, then trace it out.
    auto measure_and_retire = [&](Mode mode, Channel ch, double eta) {
        std::vector<Branch> next;
        next.reserve(branches.size() * 2);
        for (Branch& b : branches) {
            const int k = b.rho.mode_index(mode);
            const int d = b.rho.dim();
            const std::size_t total = static_cast<std::size_t>(b.rho.matrix().rows());
            for (int outcome = 0; outcome < 2; ++outcome) {
                Eigen::VectorXd diag(static_cast<Eigen::Index>(total));
                for (std::size_t i = 0; i < total; ++i) {
                    const int n = b.rho.occupation(i, k);
                    const double e_nc =
                        (1.0 - cfg.dark_prob) * std::pow(1.0 - eta, n);
                    diag(static_cast<Eigen::Index>(i)) =
                        std::sqrt(outcome ? 1.0 - e_nc : e_nc);
                }
                Branch nb{b.mask, b.weight, b.rho};
                nb.rho.matrix() =
                    diag.asDiagonal() * nb.rho.matrix() * diag.asDiagonal();
                const double p = nb.rho.trace();
                if (p < 1e-15) continue;
                nb.rho.matrix() /= p;
                nb.weight *= p;
                if (outcome) nb.mask |= channel_bit(ch);
                nb.rho.trace_out(mode);
                next.push_back(std::move(nb));
            }
            (void)d;
        }
        branches = std::move(next);
    };

    apply_all([&](Branch& b) {
        b.rho.apply_unitary(cached_squeeze(r_write, 0.0, nm), Mode::Atom, Mode::S1);
    });
    measure_and_retire(Mode::S1, Channel::S1, cfg.det_eff_s);
    if (eta_mem < 1.0)
        apply_all([&](Branch& b) {
            evolve_exact(b.rho, KrausChannel{KrausChannel::Kind::Loss, eta_mem, Mode::Atom});
        });
    if (r_scatter > 0) {
        apply_all([&](Branch& b) {
            b.rho.add_mode(Mode::S2);
            b.rho.apply_unitary(cached_squeeze(r_scatter, 0.0, nm), Mode::Atom, Mode::S2);
        });
        measure_and_retire(Mode::S2, Channel::S2, cfg.det_eff_s);
    }
    const bool mzi = cfg.mzi_enabled;
    if (theta_r1 > 0 || mzi) {
        apply_all([&](Branch& b) {
            b.rho.add_mode(Mode::AS2);
            if (theta_r1 > 0)
                b.rho.apply_unitary(cached_beam_splitter(theta_r1, 0.0, nm), Mode::Atom,
                                    Mode::AS2);
        });
        if (!mzi) measure_and_retire(Mode::AS2, Channel::AS2, cfg.det_eff_as);
    }
    if (r_probe > 0) {
        apply_all([&](Branch& b) {
            b.rho.add_mode(Mode::S3);
            b.rho.apply_unitary(cached_squeeze(r_probe, 0.0, nm), Mode::Atom, Mode::S3);
        });
        measure_and_retire(Mode::S3, Channel::S3, cfg.det_eff_s);
    }
    if (theta_r2 > 0 || mzi) {
        apply_all([&](Branch& b) {
            b.rho.add_mode(Mode::AS4);
            if (theta_r2 > 0)
                b.rho.apply_unitary(cached_beam_splitter(theta_r2, 0.0, nm), Mode::Atom,
                                    Mode::AS4);
        });
        if (mzi) {
            apply_all([&](Branch& b) {
                b.rho.apply_phase(Mode::AS4, cfg.mzi_beta);
                b.rho.apply_unitary(
                    cached_beam_splitter(std::asin(std::sqrt(cfg.mzi_split_sin2)), 0.0, nm),
                    Mode::AS2, Mode::AS4);
                b.rho.rename_mode(Mode::AS2, Mode::AS5);
                b.rho.rename_mode(Mode::AS4, Mode::AS6);
            });
            measure_and_retire(Mode::AS5, Channel::AS5, cfg.det_eff_as);
            measure_and_retire(Mode::AS6, Channel::AS6, cfg.det_eff_as);
        } else {
            measure_and_retire(Mode::AS4, Channel::AS4, cfg.det_eff_as);
        }
    }

    std::map<std::uint8_t, double> dist;
    double total = 0;
    for (const Branch& b : branches) {
        dist[b.mask] += b.weight;
        total += b.weight;
    }
    // Truncation leakage in the squeeze operators is redistributed
    // proportionally, matching the trial engine's collapse renormalization.
    if (total > 0)
        for (auto& [mask, p] : dist) p /= total;

    // Channels whose mode never entered the sequence (skipped stages) still
    // gate a detector in the trial engine; only darks can fire there.
    std::vector<Channel> active =
        mzi ? std::vector<Channel>{Channel::S1, Channel::S2, Channel::S3, Channel::AS5,
                                   Channel::AS6}
            : std::vector<Channel>{Channel::S1, Channel::S2, Channel::S3, Channel::AS2,
                                   Channel::AS4};
    std::vector<Channel> measured{Channel::S1};
    if (r_scatter > 0) measured.push_back(Channel::S2);
    if (theta_r1 > 0 && !mzi) measured.push_back(Channel::AS2);
    if (r_probe > 0) measured.push_back(Channel::S3);
    if (theta_r2 > 0 && !mzi) measured.push_back(Channel::AS4);
    if (mzi) {
        measured.push_back(Channel::AS5);
        measured.push_back(Channel::AS6);
    }
    if (cfg.dark_prob > 0) {
        for (Channel c : active) {
            bool done = false;
            for (Channel m : measured) done = done || (m == c);
            if (done) continue;
            std::map<std::uint8_t, double> widened;
            for (const auto& [mask, p] : dist) {
                widened[mask] += p * (1.0 - cfg.dark_prob);
                widened[static_cast<std::uint8_t>(mask | channel_bit(c))] += p * cfg.dark_prob;
            }
            dist = std::move(widened);
        }
    }
    return dist;
}

} // namespace ewsim::oracle
