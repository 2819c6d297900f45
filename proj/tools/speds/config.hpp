#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "speds/cavity.hpp"
#include "speds/correlation.hpp"
#include "speds/dipole.hpp"
#include "speds/qd_source.hpp"

namespace speds::cli {

using Json = nlohmann::ordered_json;

// Malformed or out-of-range configuration. The message names the field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EmissionPatternConfig {
    std::string geometry_kind;  // "cavity" or "custom"
    std::optional<cavity::CavityDesign> design;
    dipole::EmissionGeometry geometry;
    double angular_resolution_deg = 0.5;
    std::vector<double> numerical_apertures{0.5};
};

struct CavitySweepConfig {
    enum class Kind { BottomMirror, TopMirror };
    Kind kind = Kind::BottomMirror;
    int max_periods = 25;
    std::vector<double> numerical_apertures{0.5};
    int bottom_periods = 12;
    int max_top = 8;
    double numerical_aperture = 0.5;
    double angular_resolution_deg = 0.5;
};

struct SourceConfig {
    bool is_laser = false;
    qd::QDModel model;
    qd::DriveProgram drive;
    qd::LaserSource laser;

    [[nodiscard]] bool pulsed() const { return is_laser || drive.mode == qd::DriveMode::Pulsed; }
    [[nodiscard]] double repetition_rate_mhz() const {
        return is_laser ? laser.repetition_rate_mhz : drive.repetition_rate_mhz;
    }
    [[nodiscard]] double duration_ns() const { return is_laser ? laser.duration_ns : drive.duration_ns; }
};

struct DecayConfig {
    qd::Line line = qd::Line::X;
    double bin_ps = 10.0;
    double fit_start_ns = 0.0;
    double fit_end_ns = 0.0;  // 0 means the end of the period
};

struct HbtConfig {
    SourceConfig source;
    correlation::DetectorPair detectors;
    // Background rate per detector set after the source run so that
    // (dark + background) = noise_to_signal * signal rate per detector.
    std::optional<double> noise_to_signal;
    std::vector<qd::Line> lines_a{qd::Line::X};
    std::vector<qd::Line> lines_b{qd::Line::X};
    double window_ns = 0.0;
    double bin_ns = 0.0;
    int m_far = 10;
    double peak_window_ns = 0.0;
    std::optional<DecayConfig> decay;
    bool write_events = false;
};

struct ThroughputConfig {
    double collection_gain = 10.0;
    double rate_gain = 13.4;
    double qe_factor = 0.5;
    std::string rate_source = "given";  // or "repetition_rates"
    std::string qe_source = "given";    // or "truncation"
    double repetition_rate_mhz = 0.0;
    double reference_rate_mhz = 0.0;
    double emission_window_ns = 0.0;
    double lifetime_ns = 0.0;
};

struct RunConfig {
    std::string command;
    std::string preset;  // empty for --config runs
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    std::optional<EmissionPatternConfig> emission_pattern;
    std::optional<CavitySweepConfig> cavity_sweep;
    std::optional<HbtConfig> hbt;
    std::optional<ThroughputConfig> throughput;
};

// Parses and fully validates a configuration document for `command`.
// Throws ConfigError; nothing is computed.
[[nodiscard]] RunConfig parse_config(const Json& document, const std::string& command);

}  // namespace speds::cli
