// protocol.hpp
// Orchestration of the full experimental sequence: write, herald, store,
// read, probe, second read, optional two-readout interference. Produces
// per-trial click records plus the closed-form amplification relations and
// the pulse-energy -> coupling calibration.

#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ewsim/coincidence.hpp"
#include "ewsim/errors.hpp"
#include "ewsim/fock.hpp"
#include "ewsim/modes.hpp"
#include "ewsim/rng.hpp"

namespace ewsim::protocol {

enum class DelayMode { Fiber2m, Fiber50m };
enum class PulseRole { Write, Read1, Probe, Read2 };

struct PulseSpec {
    double energy_pj = 220.0;
    PulseRole role = PulseRole::Write;
    double time_offset_ns = 0.0; // metadata; only ordering affects physics
};

// Coupling calibration anchored so that 220 pJ gives an intrinsic
// excitation probability sinh^2(kappa*dt) of 2.5%.
inline constexpr double kDefaultKCal = 0.157457 / 14.832396974191326; // / sqrt(220)

struct ProtocolConfig {
    std::array<PulseSpec, 4> pulses = {
        PulseSpec{220.0, PulseRole::Write, 0.0},
        PulseSpec{220.0, PulseRole::Read1, 200.0},
        PulseSpec{220.0, PulseRole::Probe, 240.0},
        PulseSpec{220.0, PulseRole::Read2, 280.0},
    };
    double k_cal = kDefaultKCal;     // kappa*dt per sqrt(pJ)
    double retrieval_sin2_r1 = 0.15; // intrinsic retrieval efficiency, read 1
    double retrieval_sin2_r2 = 0.15; // intrinsic retrieval efficiency, read 2
    bool s2_scatter = true;          // read pulse also weakly scatters (S2 path)
    double storage_time_ns = 200.0;
    double tau1_ns = 1200.0;
    double tau2_ns = 900.0;
    double det_eff_s = 0.071;
    double det_eff_as = 0.054;
    double dark_prob = 0.0;
    DelayMode delay_mode = DelayMode::Fiber2m;
    int n_max = 3;
    std::uint64_t trials = 1'000'000;
    std::uint64_t master_seed = 12345;
    // two-readout interferometer stage
    bool mzi_enabled = false;
    double mzi_beta = 0.0;
    double mzi_phase_sigma = 0.0; // per-trial Gaussian phase jitter, radians
    double mzi_split_sin2 = 0.5;  // combiner splitting ratio
    double eta_2ud = 1.0;         // AS5/AS6 channel-efficiency ratio (analysis-side)

    double energy(PulseRole role) const {
        for (const PulseSpec& p : pulses)
            if (p.role == role) return p.energy_pj;
        throw ConfigError("ProtocolConfig: missing pulse role");
    }
    void set_energy(PulseRole role, double pj) {
        for (PulseSpec& p : pulses)
            if (p.role == role) { p.energy_pj = pj; return; }
        throw ConfigError("ProtocolConfig: missing pulse role");
    }

    void validate() const {
        for (const PulseSpec& p : pulses)
            if (p.energy_pj < 0) throw ConfigError("pulse energy must be >= 0");
        if (k_cal <= 0) throw ConfigError("k_cal must be > 0");
        if (retrieval_sin2_r1 < 0 || retrieval_sin2_r1 > 1 ||
            retrieval_sin2_r2 < 0 || retrieval_sin2_r2 > 1)
            throw ConfigError("retrieval sin^2(theta) must be in [0,1]");
        if (storage_time_ns < 0) throw ConfigError("storage_time must be >= 0");
        if (tau1_ns <= 0 || tau2_ns <= 0) throw ConfigError("decay constants must be > 0");
        if (det_eff_s < 0 || det_eff_s > 1 || det_eff_as < 0 || det_eff_as > 1)
            throw ConfigError("detector efficiencies must be in [0,1]");
        if (dark_prob < 0 || dark_prob > 1) throw ConfigError("dark_prob must be in [0,1]");
        if (n_max < 1) throw ConfigError("n_max must be >= 1");
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (mzi_split_sin2 < 0 || mzi_split_sin2 > 1)
            throw ConfigError("mzi_split_sin2 must be in [0,1]");
        if (mzi_phase_sigma < 0) throw ConfigError("mzi_phase_sigma must be >= 0");
        if (eta_2ud <= 0) throw ConfigError("eta_2ud must be > 0");
    }
};

struct TrialOutcome {
    std::uint8_t clicks = 0; // bit per Channel
    std::array<Channel, kNumChannels> detection_order{};
    std::uint8_t n_detected = 0;
    std::uint64_t seed_index = 0;
};

// Pair-amplification relations for seminal Stokes photons / excitations:
//   n_S(t) = n_S0 cosh^2(kt) + (1 + n_E0) sinh^2(kt)
//   n_E(t) = n_E0 cosh^2(kt) + (1 + n_S0) sinh^2(kt)
inline std::pair<double, double> analytic_amplification(double n_s0, double n_e0,
                                                        double kappa_dt) {
    if (n_s0 < 0 || n_e0 < 0 || kappa_dt < 0)
        throw ConfigError("analytic_amplification: inputs must be >= 0");
    const double c2 = std::cosh(kappa_dt) * std::cosh(kappa_dt);
    const double s2 = std::sinh(kappa_dt) * std::sinh(kappa_dt);
    return {n_s0 * c2 + (1.0 + n_e0) * s2, n_e0 * c2 + (1.0 + n_s0) * s2};
}

// Coupling scales with field amplitude: kappa*dt = k_cal * sqrt(energy).
inline double calibrate_coupling(double energy_pj, double k_cal) {
    if (energy_pj < 0) throw ConfigError("calibrate_coupling: energy must be >= 0");
    if (k_cal <= 0) throw ConfigError("calibrate_coupling: k_cal must be > 0");
    return k_cal * std::sqrt(energy_pj);
}

// Spin-wave survival eta(t) = exp(-t/tau1 - (t/tau2)^2).
inline double memory_transmission(double t_ns, double tau1_ns, double tau2_ns) {
    if (tau1_ns <= 0 || tau2_ns <= 0)
        throw ConfigError("memory_transmission: decay constants must be > 0");
    if (t_ns < 0) throw ConfigError("memory_transmission: t must be >= 0");
    const double x = t_ns / tau2_ns;
    return std::exp(-t_ns / tau1_ns - x * x);
}

// Small-p mean of double excitations behind a herald: 2 p^2.
inline double high_order_mean(double p) {
    if (p < 0 || p > 1) throw ConfigError("high_order_mean: p must be in [0,1]");
    return 2.0 * p * p;
}

namespace detail {

// rng stream ids; fixed assignment, independent of delay mode
enum StreamId : std::uint64_t {
    kS1Num = 0, kMemLoss, kS2Num, kAS2Num, kS3Num, kAS4Num, kAS5Num, kAS6Num,
    kMziPhase,
    kClickBase = 16, // + channel index
};

} // namespace detail

// Precomputes every unitary the configured sequence needs, then runs
// trials. Detection outcomes are sampled in one canonical channel order at
// the end of the trial; the delay mode only selects the recorded detection
// ordering (the collapse operators act on disjoint modes and commute).
class TrialEngine {
public:
    explicit TrialEngine(ProtocolConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const int nm = cfg_.n_max;
        r_write_ = calibrate_coupling(cfg_.energy(PulseRole::Write), cfg_.k_cal);
        r_probe_ = calibrate_coupling(cfg_.energy(PulseRole::Probe), cfg_.k_cal);
        r_scatter_ = cfg_.s2_scatter
                         ? calibrate_coupling(cfg_.energy(PulseRole::Read1), cfg_.k_cal)
                         : 0.0;
        theta_r1_ = std::asin(std::sqrt(cfg_.retrieval_sin2_r1));
        theta_r2_ = std::asin(std::sqrt(cfg_.retrieval_sin2_r2));
        eta_mem_ = memory_transmission(cfg_.storage_time_ns, cfg_.tau1_ns, cfg_.tau2_ns);
        op_write_ = &cached_squeeze(r_write_, 0.0, nm);
        op_probe_ = &cached_squeeze(r_probe_, 0.0, nm);
        if (r_scatter_ > 0) op_scatter_ = &cached_squeeze(r_scatter_, 0.0, nm);
        if (theta_r1_ > 0) op_read1_ = &cached_beam_splitter(theta_r1_, 0.0, nm);
        if (theta_r2_ > 0) op_read2_ = &cached_beam_splitter(theta_r2_, 0.0, nm);
        if (eta_mem_ < 1.0)
            op_mem_loss_ = &cached_beam_splitter(std::acos(std::sqrt(eta_mem_)), 0.0, nm);
        if (cfg_.mzi_enabled)
            op_mzi_ = &cached_beam_splitter(std::asin(std::sqrt(cfg_.mzi_split_sin2)), 0.0, nm);
    }

    const ProtocolConfig& config() const { return cfg_; }
    double eta_mem() const { return eta_mem_; }

    // Channels that carry physics in this configuration.
    std::vector<Channel> active_channels() const {
        if (cfg_.mzi_enabled)
            return {Channel::S1, Channel::S2, Channel::S3, Channel::AS5, Channel::AS6};
        return {Channel::S1, Channel::S2, Channel::S3, Channel::AS2, Channel::AS4};
    }

    TrialOutcome run_trial(std::uint64_t trial_index) const {
        const int nm = cfg_.n_max;
        const std::uint64_t seed = cfg_.master_seed;
        std::array<int, kNumChannels> photons{};

        fock::StateVector st({Mode::Atom, Mode::S1}, fock::Truncation{nm});
        st.apply_two_mode(*op_write_, Mode::Atom, Mode::S1);
        {
            CounterRng rng(seed, trial_index, detail::kS1Num);
            photons[idx(Channel::S1)] = st.retire_mode_sampled(Mode::S1, rng);
        }
        if (eta_mem_ < 1.0) {
            CounterRng rng(seed, trial_index, detail::kMemLoss);
            st.add_mode(Mode::Ancilla);
            st.apply_two_mode(*op_mem_loss_, Mode::Atom, Mode::Ancilla);
            st.retire_mode_sampled(Mode::Ancilla, rng);
        }
        if (r_scatter_ > 0) {
            st.add_mode(Mode::S2);
            st.apply_two_mode(*op_scatter_, Mode::Atom, Mode::S2);
            CounterRng rng(seed, trial_index, detail::kS2Num);
            photons[idx(Channel::S2)] = st.retire_mode_sampled(Mode::S2, rng);
        }
        const bool mzi = cfg_.mzi_enabled;
        if (theta_r1_ > 0) {
            st.add_mode(Mode::AS2);
            st.apply_two_mode(*op_read1_, Mode::Atom, Mode::AS2);
            if (!mzi) {
                CounterRng rng(seed, trial_index, detail::kAS2Num);
                photons[idx(Channel::AS2)] = st.retire_mode_sampled(Mode::AS2, rng);
            }
        } else if (mzi) {
            st.add_mode(Mode::AS2);
        }
        if (r_probe_ > 0) {
            st.add_mode(Mode::S3);
            st.apply_two_mode(*op_probe_, Mode::Atom, Mode::S3);
            CounterRng rng(seed, trial_index, detail::kS3Num);
            photons[idx(Channel::S3)] = st.retire_mode_sampled(Mode::S3, rng);
        }
        if (theta_r2_ > 0 || mzi) {
            st.add_mode(Mode::AS4);
            if (theta_r2_ > 0)
                st.apply_two_mode(*op_read2_, Mode::Atom, Mode::AS4);
            if (mzi) {
                double beta = cfg_.mzi_beta;
                if (cfg_.mzi_phase_sigma > 0) {
                    CounterRng rng(seed, trial_index, detail::kMziPhase);
                    beta += cfg_.mzi_phase_sigma * rng.normal();
                }
                st.apply_phase(Mode::AS4, beta);
                st.apply_two_mode(*op_mzi_, Mode::AS2, Mode::AS4);
                st.rename_mode(Mode::AS2, Mode::AS5);
                st.rename_mode(Mode::AS4, Mode::AS6);
                {
                    CounterRng rng(seed, trial_index, detail::kAS5Num);
                    photons[idx(Channel::AS5)] = st.retire_mode_sampled(Mode::AS5, rng);
                }
                {
                    CounterRng rng(seed, trial_index, detail::kAS6Num);
                    photons[idx(Channel::AS6)] = st.retire_mode_sampled(Mode::AS6, rng);
                }
            } else {
                CounterRng rng(seed, trial_index, detail::kAS4Num);
                photons[idx(Channel::AS4)] = st.retire_mode_sampled(Mode::AS4, rng);
            }
        }

        // threshold click sampling, canonical channel order
        TrialOutcome out;
        out.seed_index = trial_index;
        for (Channel c : active_channels()) {
            const double eta = is_stokes(c) ? cfg_.det_eff_s : cfg_.det_eff_as;
            const int n = photons[idx(c)];
            const double p_click =
                1.0 - (1.0 - cfg_.dark_prob) * std::pow(1.0 - eta, static_cast<double>(n));
            CounterRng rng(seed, trial_index,
                           detail::kClickBase + static_cast<std::uint64_t>(c));
            if (rng.uniform() < p_click) out.clicks |= channel_bit(c);
        }
        // arrival-order metadata per delay mode
        for (Channel c : arrival_order(cfg_.delay_mode))
            if (out.clicks & channel_bit(c)) out.detection_order[out.n_detected++] = c;
        return out;
    }

    static std::array<Channel, kNumChannels> arrival_order(DelayMode mode) {
        // Fiber2m: AS photons arrive before the probe's S3; Fiber50m delays
        // the AS channels past S3.
        if (mode == DelayMode::Fiber2m)
            return {Channel::S1, Channel::S2, Channel::AS2, Channel::S3,
                    Channel::AS4, Channel::AS5, Channel::AS6};
        return {Channel::S1, Channel::S2, Channel::S3, Channel::AS2,
                Channel::AS4, Channel::AS5, Channel::AS6};
    }

private:
    static constexpr std::size_t idx(Channel c) { return static_cast<std::size_t>(c); }
    static constexpr bool is_stokes(Channel c) {
        return c == Channel::S1 || c == Channel::S2 || c == Channel::S3;
    }

    ProtocolConfig cfg_;
    double r_write_ = 0, r_probe_ = 0, r_scatter_ = 0;
    double theta_r1_ = 0, theta_r2_ = 0;
    double eta_mem_ = 1.0;
    const TwoModeOp* op_write_ = nullptr;
    const TwoModeOp* op_probe_ = nullptr;
    const TwoModeOp* op_scatter_ = nullptr;
    const TwoModeOp* op_read1_ = nullptr;
    const TwoModeOp* op_read2_ = nullptr;
    const TwoModeOp* op_mem_loss_ = nullptr;
    const TwoModeOp* op_mzi_ = nullptr;
};

inline TrialOutcome run_trial(const ProtocolConfig& cfg, std::uint64_t trial_index) {
    return TrialEngine(cfg).run_trial(trial_index);
}

// Runs trials [first_index, first_index + count) and aggregates. Workers
// pull fixed-size chunks; integer-count merging is commutative, so the
// result is identical for any job count.
inline CoincidenceStats run_many(const TrialEngine& engine, std::uint64_t first_index,
                                 std::uint64_t count, std::vector<std::uint8_t> watched,
                                 unsigned jobs = 1) {
    if (jobs <= 1) {
        CoincidenceStats stats(std::move(watched));
        for (std::uint64_t i = 0; i < count; ++i)
            stats.add(engine.run_trial(first_index + i).clicks);
        return stats;
    }
    const std::uint64_t chunk = 1 << 14;
    const std::uint64_t n_chunks = (count + chunk - 1) / chunk;
    std::atomic<std::uint64_t> next{0};
    std::vector<CoincidenceStats> partial(jobs, CoincidenceStats(watched));
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            for (;;) {
                const std::uint64_t c = next.fetch_add(1);
                if (c >= n_chunks) break;
                const std::uint64_t lo = c * chunk;
                const std::uint64_t hi = std::min(count, lo + chunk);
                for (std::uint64_t i = lo; i < hi; ++i)
                    partial[w].add(engine.run_trial(first_index + i).clicks);
            }
        });
    }
    for (std::thread& t : workers) t.join();
    CoincidenceStats stats(std::move(watched));
    for (const CoincidenceStats& p : partial) stats.merge(p);
    return stats;
}

} // namespace ewsim::protocol
