#pragma once

// Hanbury-Brown-Twiss detection chain and coincidence histograms.
//
// Photons from an EmissionRecord go through a beam splitter onto two
// detectors (arms A and B). Each arm keeps only its own set of lines, loses
// photons with probability 1 - efficiency, smears times with Gaussian jitter
// and adds Poissonian dark and background counts. Detector rates are in
// counts per second, times in ns.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "speds/qd_source.hpp"

namespace speds::correlation {

using qd::Line;

struct DetectorPair {
    double efficiency = 1.0;           // per detector, (0, 1]
    double dark_rate_cps = 0.0;        // per detector
    double background_rate_cps = 0.0;  // per detector
    double timing_jitter_ps = 350.0;   // Gaussian sigma
    double splitter_ratio = 0.5;       // probability a photon goes to arm A
    double dead_time_ns = 0.0;

    [[nodiscard]] double noise_rate_cps() const { return dark_rate_cps + background_rate_cps; }
    void validate() const;
};

struct DetectionStreams {
    std::vector<double> a;  // ascending detection times
    std::vector<double> b;
    double duration_ns = 0.0;
    std::size_t signal_a = 0;  // detections that came from photons
    std::size_t signal_b = 0;
};

// Lines kept by each arm. Equal sets give an auto-correlation, different sets
// a cross-correlation.
[[nodiscard]] DetectionStreams detect(const qd::EmissionRecord& record, const DetectorPair& detectors,
                                      std::span<const Line> lines_a, std::span<const Line> lines_b,
                                      std::uint64_t seed);

enum class CorrelationMode : unsigned char { Auto, Cross };

struct CorrelationHistogram {
    double bin_ns = 0.0;
    double window_ns = 0.0;
    // counts[i] covers delays tB - tA in [lower_edge + i*bin, lower_edge + (i+1)*bin);
    // the central bin is centred on zero delay.
    std::vector<std::uint64_t> counts;
    CorrelationMode mode = CorrelationMode::Auto;
    std::vector<Line> lines_a;
    std::vector<Line> lines_b;
    std::size_t events_a = 0;
    std::size_t events_b = 0;
    double duration_ns = 0.0;

    [[nodiscard]] std::size_t half_bins() const { return counts.empty() ? 0 : (counts.size() - 1) / 2; }
    [[nodiscard]] double lower_edge() const { return -(static_cast<double>(half_bins()) + 0.5) * bin_ns; }
    [[nodiscard]] double bin_centre(std::size_t i) const;
    // Coincidences expected in bin i for two uncorrelated Poisson streams with
    // the same counts, including the finite-record overlap.
    [[nodiscard]] double poisson_expectation(std::size_t i) const;
    [[nodiscard]] std::vector<double> g2_normalized() const;
    [[nodiscard]] std::uint64_t total() const;

    // Adds another histogram over the same grid (counts and events are summed,
    // durations added). Associative and commutative.
    void merge(const CorrelationHistogram& other);
};

// All pairwise delays within +/- window_ns. bin_ns <= window_ns / 50. Empty
// streams give an all-zero histogram.
[[nodiscard]] CorrelationHistogram correlate(std::span<const double> a, std::span<const double> b,
                                             double duration_ns, double window_ns, double bin_ns,
                                             std::size_t threads = 0);
[[nodiscard]] CorrelationHistogram correlate(const DetectionStreams& streams, double window_ns, double bin_ns,
                                             std::size_t threads = 0);

struct Estimate {
    double value = 0.0;
    double standard_error = 0.0;
};

// Normalized coincidences in the zero-delay bin.
[[nodiscard]] Estimate g2_at_zero(const CorrelationHistogram& histogram);

// g2(0) of a perfect single-photon signal at rate R_S diluted by uncorrelated
// dark (R_D) and background (R_BK) counts:
//   (2 (R_D + R_BK) R_S + (R_D + R_BK)^2) / (R_D + R_BK + R_S)^2
[[nodiscard]] double g2_zero_closed_form(double signal_rate, double dark_rate, double background_rate);

// Noise-to-signal ratio (R_D + R_BK) / R_S at which the closed form equals target.
[[nodiscard]] double noise_to_signal_for_g2(double target);

struct PeakAreas {
    std::vector<int> m;  // peak index, centred at m / repetition rate
    std::vector<double> area;
    std::vector<double> standard_error;
    std::vector<std::uint64_t> raw_counts;
    int m_far = 10;
    double normalization = 0.0;  // mean raw area of peaks with |m| >= m_far
    double period_ns = 0.0;
    double window_ns = 0.0;

    [[nodiscard]] double area_at(int peak) const;
    [[nodiscard]] double error_at(int peak) const;
};

// Sums counts of the bins centred within window_ns around each m * period and
// normalizes by the far peaks. window_ns = 0 uses one full period. The
// histogram must reach beyond peak m_far.
[[nodiscard]] PeakAreas peak_area_analysis(const CorrelationHistogram& histogram, double repetition_rate_mhz,
                                           int m_far = 10, double window_ns = 0.0);

// "tau_ns,counts,g2_normalized" rows.
void write_csv(std::ostream& os, const CorrelationHistogram& histogram);
// "m,area" rows.
void write_csv(std::ostream& os, const PeakAreas& areas);

}  // namespace speds::correlation
