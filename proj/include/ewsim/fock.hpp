// fock.hpp
// Truncated multi-mode Fock-space state vector and the elementary
// operations on it: two-mode squeeze, beam splitter, sampled loss,
// threshold-click measurement, projective number measurement.
//
// The state is a value type; independent trajectories never share state.
// Truncation leakage is accumulated in norm_deficit and is only folded
// back in (by renormalization) at measurement collapse.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "ewsim/errors.hpp"
#include "ewsim/modes.hpp"
#include "ewsim/rng.hpp"
#include "ewsim/unitaries.hpp"

namespace ewsim::fock {

struct Truncation {
    int n_max = 3;
};

class StateVector {
public:
    StateVector(std::vector<Mode> reg, Truncation trunc)
        : register_(std::move(reg)), n_max_(trunc.n_max) {
        if (n_max_ < 1) throw ConfigError("Truncation: n_max must be >= 1");
        if (register_.empty()) throw ConfigError("vacuum: empty mode register");
        for (std::size_t i = 0; i < register_.size(); ++i)
            for (std::size_t j = i + 1; j < register_.size(); ++j)
                if (register_[i] == register_[j])
                    throw ConfigError("vacuum: duplicate mode label");
        std::size_t total = 1;
        for (std::size_t i = 0; i < register_.size(); ++i) total *= dim();
        amp_.assign(total, cd(0, 0));
        amp_[0] = cd(1, 0);
    }

    int n_max() const { return n_max_; }
    int dim() const { return n_max_ + 1; }
    const std::vector<Mode>& register_modes() const { return register_; }
    double norm_deficit() const { return norm_deficit_; }
    std::size_t size() const { return amp_.size(); }
    const std::vector<cd>& amplitudes() const { return amp_; }

    bool has_mode(Mode m) const {
        return std::find(register_.begin(), register_.end(), m) != register_.end();
    }

    int mode_index(Mode m) const {
        for (std::size_t i = 0; i < register_.size(); ++i)
            if (register_[i] == m) return static_cast<int>(i);
        throw ConfigError(std::string("unknown mode in register: ") +
                          std::string(mode_name(m)));
    }

    // Stride of mode k: register_[0] is fastest.
    std::size_t stride(int k) const {
        std::size_t s = 1;
        for (int i = 0; i < k; ++i) s *= static_cast<std::size_t>(dim());
        return s;
    }

    // Amplitude of a basis state given per-mode occupations (register order).
    cd amplitude(const std::vector<int>& ns) const {
        if (ns.size() != register_.size())
            throw ConfigError("amplitude: occupation list does not match register");
        std::size_t idx = 0;
        std::size_t s = 1;
        for (std::size_t k = 0; k < ns.size(); ++k) {
            if (ns[k] < 0 || ns[k] > n_max_) return cd(0, 0);
            idx += static_cast<std::size_t>(ns[k]) * s;
            s *= static_cast<std::size_t>(dim());
        }
        return amp_[idx];
    }

    double norm_squared() const {
        double s = 0;
        for (const cd& a : amp_) s += std::norm(a);
        return s;
    }

    // Appends a new mode in vacuum as the slowest index. Old amplitudes
    // already occupy the n=0 block, so this is a plain resize.
    void add_mode(Mode m) {
        if (has_mode(m))
            throw ConfigError(std::string("add_mode: duplicate mode label ") +
                              std::string(mode_name(m)));
        register_.push_back(m);
        amp_.resize(amp_.size() * static_cast<std::size_t>(dim()), cd(0, 0));
    }

    void rename_mode(Mode from, Mode to) {
        if (has_mode(to)) throw ConfigError("rename_mode: target label already present");
        register_[static_cast<std::size_t>(mode_index(from))] = to;
    }

    // Unnormalized marginal photon-number weights of one mode.
    std::vector<double> marginal_weights(Mode m) const {
        const int k = mode_index(m);
        const std::size_t s = stride(k);
        const int d = dim();
        std::vector<double> w(static_cast<std::size_t>(d), 0.0);
        for (std::size_t i = 0; i < amp_.size(); ++i) {
            const double p = std::norm(amp_[i]);
            if (p != 0.0) w[(i / s) % static_cast<std::size_t>(d)] += p;
        }
        return w;
    }

    // Normalized marginal distribution.
    std::vector<double> marginal(Mode m) const {
        std::vector<double> w = marginal_weights(m);
        double tot = 0;
        for (double x : w) tot += x;
        if (tot > 0)
            for (double& x : w) x /= tot;
        return w;
    }

    // Applies a two-mode operator; leakage (norm drop) goes to norm_deficit.
    void apply_two_mode(const TwoModeOp& op, Mode a, Mode b) {
        if (a == b) throw ConfigError("two-mode operation requires distinct modes");
        const int d = dim();
        if (op.dim != d) throw ConfigError("operator dimension does not match truncation");
        const std::size_t sa = stride(mode_index(a));
        const std::size_t sb = stride(mode_index(b));
        const int d2 = d * d;
        thread_local std::vector<cd> in, out;
        in.resize(static_cast<std::size_t>(d2));
        out.resize(static_cast<std::size_t>(d2));
        double before = 0, after = 0;
        // iterate over base indices with n_a = n_b = 0
        const std::size_t total = amp_.size();
        for (std::size_t base = 0; base < total; ++base) {
            if ((base / sa) % static_cast<std::size_t>(d) != 0) continue;
            if ((base / sb) % static_cast<std::size_t>(d) != 0) continue;
            for (int na = 0; na < d; ++na)
                for (int nb = 0; nb < d; ++nb)
                    in[static_cast<std::size_t>(na * d + nb)] =
                        amp_[base + na * sa + nb * sb];
            for (int o = 0; o < d2; ++o) {
                cd acc(0, 0);
                const cd* row = op.m.data() + static_cast<std::size_t>(o) * d2;
                for (int i = 0; i < d2; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
                out[static_cast<std::size_t>(o)] = acc;
            }
            for (int na = 0; na < d; ++na)
                for (int nb = 0; nb < d; ++nb) {
                    const std::size_t idx = base + na * sa + nb * sb;
                    before += std::norm(amp_[idx]);
                    amp_[idx] = out[static_cast<std::size_t>(na * d + nb)];
                    after += std::norm(amp_[idx]);
                }
        }
        if (before > after) norm_deficit_ += before - after;
    }

    void apply_phase(Mode m, double beta) {
        const std::size_t s = stride(mode_index(m));
        const int d = dim();
        std::vector<cd> ph(static_cast<std::size_t>(d));
        for (int n = 0; n < d; ++n) ph[static_cast<std::size_t>(n)] = std::exp(cd(0, beta * n));
        for (std::size_t i = 0; i < amp_.size(); ++i)
            amp_[i] *= ph[(i / s) % static_cast<std::size_t>(d)];
    }

    // Projects mode m onto |n>, renormalizes (measurement collapse), keeps
    // the mode in the register.
    void project_mode(Mode m, int n) {
        const std::size_t s = stride(mode_index(m));
        const int d = dim();
        double kept = 0;
        for (std::size_t i = 0; i < amp_.size(); ++i) {
            if ((i / s) % static_cast<std::size_t>(d) != static_cast<std::size_t>(n))
                amp_[i] = cd(0, 0);
            else
                kept += std::norm(amp_[i]);
        }
        renormalize(kept);
    }

    // Samples a projective number measurement of mode m, collapses, and
    // removes the mode from the register. Returns the sampled occupation.
    int retire_mode_sampled(Mode m, CounterRng& rng) {
        const int k = mode_index(m);
        const std::size_t s = stride(k);
        const int d = dim();
        std::vector<double> w = marginal_weights(m);
        const int n = sample_from_weights(w, rng);
        // gather the n-slice into a compact vector
        std::vector<cd> next(amp_.size() / static_cast<std::size_t>(d));
        std::size_t j = 0;
        double kept = 0;
        for (std::size_t i = 0; i < amp_.size(); ++i) {
            if ((i / s) % static_cast<std::size_t>(d) == static_cast<std::size_t>(n)) {
                kept += std::norm(amp_[i]);
                next[j++] = amp_[i];
            }
        }
        amp_ = std::move(next);
        register_.erase(register_.begin() + k);
        renormalize(kept);
        return n;
    }

    // Mean photon number of one mode, Sum n * P(n) over the normalized
    // marginal.
    double expected_photon_number(Mode m) const {
        std::vector<double> p = marginal(m);
        double e = 0;
        for (std::size_t n = 0; n < p.size(); ++n) e += static_cast<double>(n) * p[n];
        return e;
    }

    static int sample_from_weights(const std::vector<double>& w, CounterRng& rng) {
        double tot = 0;
        for (double x : w) tot += x;
        double u = rng.uniform() * tot;
        double acc = 0;
        for (std::size_t n = 0; n < w.size(); ++n) {
            acc += w[n];
            if (u < acc) return static_cast<int>(n);
        }
        return static_cast<int>(w.size()) - 1;
    }

    // Scales amplitudes by arbitrary per-occupation factors of one mode and
    // renormalizes; used for the threshold-POVM collapse.
    void scale_by_occupation(Mode m, const std::vector<double>& factor) {
        const std::size_t s = stride(mode_index(m));
        const int d = dim();
        double kept = 0;
        for (std::size_t i = 0; i < amp_.size(); ++i) {
            amp_[i] *= factor[(i / s) % static_cast<std::size_t>(d)];
            kept += std::norm(amp_[i]);
        }
        renormalize(kept);
    }

private:
    void renormalize(double norm_sq) {
        if (norm_sq <= 0)
            throw ConfigError("measurement collapse onto zero-probability outcome");
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (cd& a : amp_) a *= inv;
        norm_deficit_ = 0; // renormalization happens only at collapse
    }

    std::vector<Mode> register_;
    int n_max_;
    std::vector<cd> amp_;
    double norm_deficit_ = 0;
};

inline StateVector vacuum(std::vector<Mode> reg, Truncation trunc) {
    return StateVector(std::move(reg), trunc);
}

inline void apply_two_mode_squeeze(StateVector& state, Mode a, Mode b, double r,
                                   double phase = 0.0) {
    if (a == b) throw ConfigError("apply_two_mode_squeeze: modes must differ");
    if (r < 0) throw ConfigError("apply_two_mode_squeeze: r must be >= 0");
    state.apply_two_mode(cached_squeeze(r, phase, state.n_max()), a, b);
}

inline void apply_beam_splitter(StateVector& state, Mode a, Mode b, double theta,
                                double phase = 0.0) {
    if (a == b) throw ConfigError("apply_beam_splitter: modes must differ");
    state.apply_two_mode(cached_beam_splitter(theta, phase, state.n_max()), a, b);
}

// Loss as a beam splitter to a fresh ancilla followed by an immediate
// sampled number measurement of the ancilla; keeps the trajectory pure.
// Returns the number of photons lost.
inline int apply_loss_sampled(StateVector& state, Mode mode, double eta,
                              CounterRng& rng) {
    if (eta < 0.0 || eta > 1.0)
        throw ConfigError("apply_loss_sampled: eta must be in [0,1]");
    if (eta == 1.0) return 0;
    const double theta = std::acos(std::sqrt(eta));
    state.add_mode(Mode::Ancilla);
    state.apply_two_mode(cached_beam_splitter(theta, 0.0, state.n_max()), mode,
                         Mode::Ancilla);
    return state.retire_mode_sampled(Mode::Ancilla, rng);
}

// Threshold (non-number-resolving) APD: P(click | n) = 1 - (1-dark)(1-eta)^n.
// Collapse by sqrt of the sampled POVM element (diagonal in photon number).
inline bool measure_click(StateVector& state, Mode mode, double eta, double dark_prob,
                          CounterRng& rng) {
    if (eta < 0.0 || eta > 1.0) throw ConfigError("measure_click: eta must be in [0,1]");
    if (dark_prob < 0.0 || dark_prob > 1.0)
        throw ConfigError("measure_click: dark_prob must be in [0,1]");
    const std::vector<double> p = state.marginal(mode);
    double p_noclick = 0;
    for (std::size_t n = 0; n < p.size(); ++n)
        p_noclick += p[n] * (1.0 - dark_prob) * std::pow(1.0 - eta, static_cast<double>(n));
    const bool clicked = rng.uniform() >= p_noclick;
    std::vector<double> factor(p.size());
    for (std::size_t n = 0; n < p.size(); ++n) {
        const double e_nc = (1.0 - dark_prob) * std::pow(1.0 - eta, static_cast<double>(n));
        factor[n] = std::sqrt(clicked ? 1.0 - e_nc : e_nc);
    }
    state.scale_by_occupation(mode, factor);
    return clicked;
}

inline double expected_photon_number(const StateVector& state, Mode m) {
    return state.expected_photon_number(m);
}

} // namespace ewsim::fock
