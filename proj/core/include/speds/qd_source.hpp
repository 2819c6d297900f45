#pragma once

// Kinetic Monte Carlo model of a single quantum dot under DC or pulsed
// electrical injection. States: empty, exciton (X), biexciton (X2), shelved
// (a dark or charged configuration that emits neither X nor X2). A shelved dot
// can optionally host a charged exciton whose recombination is reported as
// the marker line `Charged`.
//
// Times in ns, rates in 1/ns, repetition rates in MHz, pulse widths in ps.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace speds::qd {

enum class Line : unsigned char { X, X2, Charged };

[[nodiscard]] std::string_view to_string(Line line);
// Accepts "X", "X2", "Charged". Throws InvalidInput otherwise.
[[nodiscard]] Line parse_line(std::string_view name);

enum class DriveMode : unsigned char { DC, Pulsed };

enum class SweepOutRegime : unsigned char {
    None,           // low field between pulses: carriers stay on the dot
    ElectronsOnly,  // excitons are destroyed, shelving still possible
    FullReset,      // excitons and shelved charges are all removed
};

[[nodiscard]] std::string_view to_string(SweepOutRegime regime);
[[nodiscard]] SweepOutRegime parse_regime(std::string_view name);

struct QDModel {
    double tau_x_ns = 2.1;
    double tau_x2_ns = 0.68;
    double capture_rate_per_ns = 20.0;  // one electron-hole pair at a time, while injection is on
    double shelve_probability = 0.2;    // per return to the empty dot
    double unshelve_rate_per_ns = 0.3;
    double sweep_rate_per_ns = 50.0;    // carrier removal while sweep-out is active
    int max_excitons = 2;               // 1 gives a two-level emitter
    double charged_lifetime_ns = 0.0;   // > 0 enables the Charged marker line

    void validate() const;
};

struct DriveProgram {
    DriveMode mode = DriveMode::Pulsed;
    double repetition_rate_mhz = 80.0;
    double pulse_width_ps = 300.0;
    SweepOutRegime sweep_out = SweepOutRegime::None;
    // Sweep-out starts this long after the pulse starts; 0 means right at the
    // end of the pulse. Ignored when sweep_out is None.
    double emission_window_ns = 0.0;
    double duration_ns = 1e6;

    [[nodiscard]] double period_ns() const { return 1e3 / repetition_rate_mhz; }
    [[nodiscard]] double pulse_width_ns() const { return pulse_width_ps * 1e-3; }
    [[nodiscard]] double sweep_onset_ns() const;
    [[nodiscard]] std::size_t periods() const;
    void validate() const;
};

struct EmissionEvent {
    double time_ns = 0.0;
    Line line = Line::X;

    bool operator==(const EmissionEvent&) const = default;
};

struct EmissionRecord {
    std::vector<EmissionEvent> events;  // ascending in time
    double duration_ns = 0.0;

    [[nodiscard]] std::size_t count(Line line) const;
    bool operator==(const EmissionRecord&) const = default;
};

[[nodiscard]] EmissionRecord simulate(const QDModel& model, const DriveProgram& drive, std::uint64_t seed);

// Independent trajectories; trajectory i uses a seed derived from (seed, i),
// so results do not depend on the thread count.
[[nodiscard]] std::vector<EmissionRecord> simulate_ensemble(const QDModel& model, const DriveProgram& drive,
                                                            std::uint64_t seed, std::size_t trajectories,
                                                            std::size_t threads = 0);

// Attenuated pulsed laser: Poisson photon number per pulse, times uniform over
// the pulse. Photons are labelled X.
struct LaserSource {
    double repetition_rate_mhz = 80.0;
    double mean_photons_per_pulse = 0.1;
    double pulse_width_ps = 50.0;
    double duration_ns = 1e6;

    void validate() const;
};

[[nodiscard]] EmissionRecord simulate_laser(const LaserSource& laser, std::uint64_t seed);

// Histogram of emission time modulo the period.
struct DecayProfile {
    double bin_ns = 0.0;
    double period_ns = 0.0;
    std::vector<std::uint64_t> counts;

    [[nodiscard]] double bin_centre(std::size_t i) const { return (static_cast<double>(i) + 0.5) * bin_ns; }
    [[nodiscard]] std::uint64_t total() const;
};

[[nodiscard]] DecayProfile decay_profile(const EmissionRecord& record, const DriveProgram& drive, Line line,
                                         double bin_ps);

struct DecayFit {
    double tau_ns = 0.0;
    double standard_error_ns = 0.0;
    std::uint64_t events = 0;
};

// Maximum-likelihood single-exponential fit to the bins whose centres lie in
// [start_ns, end_ns]. Throws NumericalFailure with fewer than 2 events.
[[nodiscard]] DecayFit fit_decay(const DecayProfile& profile, double start_ns, double end_ns);

// Photons of one line per drive period.
[[nodiscard]] double photons_per_period(const EmissionRecord& record, const DriveProgram& drive, Line line);

// Fraction of an exciton population of lifetime tau that decays within the
// emission window: 1 - exp(-window/tau).
[[nodiscard]] double truncation_factor(double window_ns, double tau_ns);

[[nodiscard]] double throughput_ratio(double collection_gain, double rate_gain, double qe_factor);

// "time_ns,line" rows.
void write_csv(std::ostream& os, const EmissionRecord& record);

// Seed mixing for derived random streams.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace speds::qd
