#include "speds/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "speds/error.hpp"
#include "speds/parallel.hpp"

namespace speds::correlation {

namespace {

bool contains(std::span<const Line> lines, Line l) { return std::find(lines.begin(), lines.end(), l) != lines.end(); }

void add_noise(std::vector<double>& arm, double rate_cps, double duration_ns, std::uint64_t seed) {
    if (rate_cps <= 0.0) return;
    std::mt19937_64 rng(seed);
    std::poisson_distribution<long long> count(rate_cps * duration_ns * 1e-9);
    std::uniform_real_distribution<double> when(0.0, duration_ns);
    const long long n = count(rng);
    for (long long i = 0; i < n; ++i) arm.push_back(when(rng));
}

void apply_dead_time(std::vector<double>& arm, double dead_ns) {
    if (dead_ns <= 0.0 || arm.empty()) return;
    std::vector<double> kept;
    kept.reserve(arm.size());
    for (double t : arm) {
        if (kept.empty() || t - kept.back() >= dead_ns) kept.push_back(t);
    }
    arm = std::move(kept);
}

}  // namespace

void DetectorPair::validate() const {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw InvalidInput("detectors: efficiency must lie in (0, 1]");
    auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
    if (!nonneg(dark_rate_cps)) throw InvalidInput("detectors: dark_rate_cps must be finite and >= 0");
    if (!nonneg(background_rate_cps)) throw InvalidInput("detectors: background_rate_cps must be finite and >= 0");
    if (!nonneg(timing_jitter_ps)) throw InvalidInput("detectors: timing_jitter_ps must be finite and >= 0");
    if (!(splitter_ratio >= 0.0 && splitter_ratio <= 1.0)) {
        throw InvalidInput("detectors: splitter_ratio must lie in [0, 1]");
    }
    if (!nonneg(dead_time_ns)) throw InvalidInput("detectors: dead_time_ns must be finite and >= 0");
}

DetectionStreams detect(const qd::EmissionRecord& record, const DetectorPair& detectors,
                        std::span<const Line> lines_a, std::span<const Line> lines_b, std::uint64_t seed) {
    detectors.validate();
    if (!(std::isfinite(record.duration_ns) && record.duration_ns > 0.0)) {
        throw InvalidInput("detect: record duration must be finite and > 0");
    }

    DetectionStreams out;
    out.duration_ns = record.duration_ns;
    std::mt19937_64 rng(qd::derive_seed(seed, 1));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, detectors.timing_jitter_ps * 1e-3);
    const bool smear = detectors.timing_jitter_ps > 0.0;

    for (const auto& e : record.events) {
        const bool to_a = uniform(rng) < detectors.splitter_ratio;
        const bool survives = uniform(rng) < detectors.efficiency;
        const double dt = smear ? jitter(rng) : 0.0;
        if (!survives || !contains(to_a ? lines_a : lines_b, e.line)) continue;
        (to_a ? out.a : out.b).push_back(e.time_ns + dt);
    }
    out.signal_a = out.a.size();
    out.signal_b = out.b.size();

    add_noise(out.a, detectors.noise_rate_cps(), record.duration_ns, qd::derive_seed(seed, 2));
    add_noise(out.b, detectors.noise_rate_cps(), record.duration_ns, qd::derive_seed(seed, 3));
    for (auto* arm : {&out.a, &out.b}) {
        std::sort(arm->begin(), arm->end());
        apply_dead_time(*arm, detectors.dead_time_ns);
    }
    if (detectors.dead_time_ns > 0.0) {
        // Signal bookkeeping is only exact without dead time.
        out.signal_a = std::min(out.signal_a, out.a.size());
        out.signal_b = std::min(out.signal_b, out.b.size());
    }
    return out;
}

double CorrelationHistogram::bin_centre(std::size_t i) const {
    return (static_cast<double>(i) - static_cast<double>(half_bins())) * bin_ns;
}

double CorrelationHistogram::poisson_expectation(std::size_t i) const {
    if (duration_ns <= 0.0) return 0.0;
    const double overlap = std::max(0.0, duration_ns - std::abs(bin_centre(i)));
    return static_cast<double>(events_a) * static_cast<double>(events_b) * bin_ns * overlap /
           (duration_ns * duration_ns);
}

std::vector<double> CorrelationHistogram::g2_normalized() const {
    std::vector<double> g(counts.size(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = poisson_expectation(i);
        g[i] = e > 0.0 ? static_cast<double>(counts[i]) / e : 0.0;
    }
    return g;
}

std::uint64_t CorrelationHistogram::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

void CorrelationHistogram::merge(const CorrelationHistogram& other) {
    if (other.counts.size() != counts.size() || other.bin_ns != bin_ns) {
        throw InvalidInput("CorrelationHistogram::merge: histograms use different grids");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    events_a += other.events_a;
    events_b += other.events_b;
    duration_ns += other.duration_ns;
}

CorrelationHistogram correlate(std::span<const double> a, std::span<const double> b, double duration_ns,
                               double window_ns, double bin_ns, std::size_t threads) {
    if (!(std::isfinite(window_ns) && window_ns > 0.0)) throw InvalidInput("correlate: window_ns must be > 0");
    if (!(std::isfinite(bin_ns) && bin_ns > 0.0)) throw InvalidInput("correlate: bin_ns must be > 0");
    if (bin_ns > window_ns / 50.0 * (1.0 + 1e-12)) throw InvalidInput("correlate: bin_ns must be <= window_ns / 50");
    if (!(std::isfinite(duration_ns) && duration_ns > 0.0)) throw InvalidInput("correlate: duration_ns must be > 0");
    if (!std::is_sorted(a.begin(), a.end()) || !std::is_sorted(b.begin(), b.end())) {
        throw InvalidInput("correlate: detection streams must be sorted");
    }

    CorrelationHistogram h;
    h.bin_ns = bin_ns;
    h.window_ns = window_ns;
    const auto half = static_cast<std::size_t>(std::llround(window_ns / bin_ns));
    h.counts.assign(2 * half + 1, 0);
    h.events_a = a.size();
    h.events_b = b.size();
    h.duration_ns = duration_ns;
    if (a.empty() || b.empty()) return h;

    const double lo = h.lower_edge();
    const double hi = -lo;
    const std::size_t bins = h.counts.size();
    const std::size_t chunk = 4096;
    const std::size_t chunks = (a.size() + chunk - 1) / chunk;
    auto partial = parallel_map(
        chunks,
        [&](std::size_t c) {
            std::vector<std::uint64_t> local(bins, 0);
            const std::size_t first = c * chunk;
            const std::size_t last = std::min(a.size(), first + chunk);
            auto j = static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), a[first] + lo) - b.begin());
            for (std::size_t i = first; i < last; ++i) {
                const double ta = a[i];
                while (j < b.size() && b[j] < ta + lo) ++j;
                for (std::size_t k = j; k < b.size(); ++k) {
                    const double d = b[k] - ta;
                    if (d >= hi) break;
                    const auto idx = std::min(bins - 1, static_cast<std::size_t>((d - lo) / bin_ns));
                    ++local[idx];
                }
            }
            return local;
        },
        threads);
    for (const auto& p : partial) {
        for (std::size_t i = 0; i < bins; ++i) h.counts[i] += p[i];
    }
    return h;
}

CorrelationHistogram correlate(const DetectionStreams& streams, double window_ns, double bin_ns, std::size_t threads) {
    return correlate(streams.a, streams.b, streams.duration_ns, window_ns, bin_ns, threads);
}

Estimate g2_at_zero(const CorrelationHistogram& histogram) {
    if (histogram.counts.empty()) throw InvalidInput("g2_at_zero: empty histogram");
    const std::size_t i = histogram.half_bins();
    const double e = histogram.poisson_expectation(i);
    if (!(e > 0.0)) throw InvalidInput("g2_at_zero: no expected coincidences (empty streams)");
    const double c = static_cast<double>(histogram.counts[i]);
    return {c / e, std::sqrt(std::max(c, 1.0)) / e};
}

double g2_zero_closed_form(double signal_rate, double dark_rate, double background_rate) {
    for (double r : {signal_rate, dark_rate, background_rate}) {
        if (!(std::isfinite(r) && r >= 0.0)) throw InvalidInput("g2_zero_closed_form: rates must be finite and >= 0");
    }
    const double noise = dark_rate + background_rate;
    const double all = noise + signal_rate;
    if (!(all > 0.0)) throw InvalidInput("g2_zero_closed_form: at least one rate must be > 0");
    return (2.0 * noise * signal_rate + noise * noise) / (all * all);
}

double noise_to_signal_for_g2(double target) {
    if (!(target >= 0.0 && target < 1.0)) throw InvalidInput("noise_to_signal_for_g2: target must lie in [0, 1)");
    return 1.0 / std::sqrt(1.0 - target) - 1.0;
}

double PeakAreas::area_at(int peak) const {
    const auto it = std::find(m.begin(), m.end(), peak);
    if (it == m.end()) throw InvalidInput("PeakAreas: no peak with that index");
    return area[static_cast<std::size_t>(it - m.begin())];
}

double PeakAreas::error_at(int peak) const {
    const auto it = std::find(m.begin(), m.end(), peak);
    if (it == m.end()) throw InvalidInput("PeakAreas: no peak with that index");
    return standard_error[static_cast<std::size_t>(it - m.begin())];
}

PeakAreas peak_area_analysis(const CorrelationHistogram& histogram, double repetition_rate_mhz, int m_far,
                             double window_ns) {
    if (!(std::isfinite(repetition_rate_mhz) && repetition_rate_mhz > 0.0)) {
        throw InvalidInput("peak_area_analysis: repetition_rate_mhz must be > 0");
    }
    if (m_far < 1) throw InvalidInput("peak_area_analysis: m_far must be >= 1");
    const double period = 1e3 / repetition_rate_mhz;
    if (window_ns == 0.0) window_ns = period;
    if (!(window_ns > 0.0)) throw InvalidInput("peak_area_analysis: window_ns must be > 0");
    if (window_ns > period * (1.0 + 1e-12)) {
        throw InvalidInput("peak_area_analysis: window_ns exceeds the period, so peak windows would overlap");
    }
    if (histogram.counts.empty()) throw InvalidInput("peak_area_analysis: empty histogram");
    const double reach = -histogram.lower_edge();
    const int m_max = static_cast<int>(std::floor((reach - 0.5 * window_ns) / period + 1e-9));
    if (m_max < m_far) {
        throw InvalidInput("peak_area_analysis: histogram window must cover peaks out to |m| = m_far (window >= (m_far + 0.5) periods)");
    }

    PeakAreas out;
    out.m_far = m_far;
    out.period_ns = period;
    out.window_ns = window_ns;
    for (int k = -m_max; k <= m_max; ++k) {
        const double centre = k * period;
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
            const double d = histogram.bin_centre(i) - centre;
            if (d >= -0.5 * window_ns && d < 0.5 * window_ns) sum += histogram.counts[i];
        }
        out.m.push_back(k);
        out.raw_counts.push_back(sum);
    }
    double far = 0.0;
    int n_far = 0;
    for (std::size_t i = 0; i < out.m.size(); ++i) {
        if (std::abs(out.m[i]) >= m_far) {
            far += static_cast<double>(out.raw_counts[i]);
            ++n_far;
        }
    }
    out.normalization = far / n_far;
    if (!(out.normalization > 0.0)) throw NumericalFailure("peak_area_analysis: far peaks are empty");
    for (auto c : out.raw_counts) {
        const double x = static_cast<double>(c);
        out.area.push_back(x / out.normalization);
        out.standard_error.push_back(std::sqrt(std::max(x, 1.0)) / out.normalization);
    }
    return out;
}

void write_csv(std::ostream& os, const CorrelationHistogram& histogram) {
    os << std::setprecision(12);
    os << "tau_ns,counts,g2_normalized\n";
    const auto g = histogram.g2_normalized();
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        os << histogram.bin_centre(i) << ',' << histogram.counts[i] << ',' << g[i] << '\n';
    }
}

void write_csv(std::ostream& os, const PeakAreas& areas) {
    os << std::setprecision(12);
    os << "m,area\n";
    for (std::size_t i = 0; i < areas.m.size(); ++i) os << areas.m[i] << ',' << areas.area[i] << '\n';
}

}  // namespace speds::correlation
