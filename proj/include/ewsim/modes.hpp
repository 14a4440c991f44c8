// modes.hpp
// Symbolic mode labels for the light-matter interface and the detection
// channel set used by the coincidence counters.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace ewsim {

// Bosonic modes of the trajectory state. Atom is the collective spin-wave
// mode; S* are Stokes channels, AS* anti-Stokes channels. Ancilla is a
// scratch mode used to realize loss as a beam-splitter coupling.
enum class Mode : std::uint8_t {
    Atom = 0, S1, S2, S3, AS2, AS4, AS5, AS6, Ancilla
};

inline constexpr std::string_view mode_name(Mode m) {
    constexpr std::array<std::string_view, 9> names = {
        "Atom", "S1", "S2", "S3", "AS2", "AS4", "AS5", "AS6", "Ancilla"};
    return names[static_cast<std::size_t>(m)];
}

// Detection channels recorded per trial.
enum class Channel : std::uint8_t {
    S1 = 0, S2, S3, AS2, AS4, AS5, AS6
};

inline constexpr int kNumChannels = 7;

inline constexpr std::string_view channel_name(Channel c) {
    constexpr std::array<std::string_view, kNumChannels> names = {
        "S1", "S2", "S3", "AS2", "AS4", "AS5", "AS6"};
    return names[static_cast<std::size_t>(c)];
}

inline constexpr std::uint8_t channel_bit(Channel c) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(c));
}

} // namespace ewsim
