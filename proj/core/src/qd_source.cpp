#include "speds/qd_source.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "speds/error.hpp"
#include "speds/parallel.hpp"

namespace speds::qd {

namespace {

bool finite_nonnegative(double x) { return std::isfinite(x) && x >= 0.0; }

enum class State : unsigned char { Empty, X, X2, Shelved, ShelvedCharged };

struct Segment {
    double begin = 0.0;
    double end = 0.0;
    bool inject = false;
    bool sweep = false;
};

class Trajectory {
public:
    Trajectory(const QDModel& model, const DriveProgram& drive, std::uint64_t seed)
        : model_(model), drive_(drive), rng_(derive_seed(seed, 0)) {}

    void run(const Segment& s) {
        t_ = std::max(t_, s.begin);
        for (;;) {
            const auto moves = available(s);
            double total = 0.0;
            for (const auto& m : moves) total += m.rate;
            if (total <= 0.0) break;
            const double wait = exponential_(rng_) / total;
            if (t_ + wait >= s.end) break;
            t_ += wait;
            double pick = uniform_(rng_) * total;
            std::size_t k = 0;
            while (k + 1 < moves.size() && (pick -= moves[k].rate) >= 0.0) ++k;
            apply(moves[k].kind);
        }
        t_ = s.end;
    }

    EmissionRecord take(double duration) {
        EmissionRecord r;
        r.events = std::move(events_);
        r.duration_ns = duration;
        return r;
    }

private:
    enum class Kind : unsigned char { Capture, DecayX, DecayX2, DecayCharged, Unshelve, Sweep };
    struct Move {
        double rate = 0.0;
        Kind kind = Kind::Capture;
    };

    struct Moves {
        std::array<Move, 4> items{};
        std::size_t n = 0;
        void add(double rate, Kind kind) {
            if (rate > 0.0) items[n++] = {rate, kind};
        }
        [[nodiscard]] std::size_t size() const { return n; }
        const Move& operator[](std::size_t i) const { return items[i]; }
        [[nodiscard]] const Move* begin() const { return items.data(); }
        [[nodiscard]] const Move* end() const { return items.data() + n; }
    };

    Moves available(const Segment& s) const {
        Moves m;
        const double capture = s.inject ? model_.capture_rate_per_ns : 0.0;
        const double sweep = s.sweep ? model_.sweep_rate_per_ns : 0.0;
        const bool full_reset = drive_.sweep_out == SweepOutRegime::FullReset;
        switch (state_) {
            case State::Empty:
                m.add(capture, Kind::Capture);
                break;
            case State::X:
                m.add(1.0 / model_.tau_x_ns, Kind::DecayX);
                if (model_.max_excitons >= 2) m.add(capture, Kind::Capture);
                m.add(sweep, Kind::Sweep);
                break;
            case State::X2:
                m.add(1.0 / model_.tau_x2_ns, Kind::DecayX2);
                m.add(sweep, Kind::Sweep);
                break;
            case State::Shelved:
                m.add(model_.unshelve_rate_per_ns, Kind::Unshelve);
                if (model_.charged_lifetime_ns > 0.0) m.add(capture, Kind::Capture);
                if (full_reset) m.add(sweep, Kind::Sweep);
                break;
            case State::ShelvedCharged:
                m.add(1.0 / model_.charged_lifetime_ns, Kind::DecayCharged);
                m.add(model_.unshelve_rate_per_ns, Kind::Unshelve);
                m.add(sweep, Kind::Sweep);
                break;
        }
        return m;
    }

    void to_ground() {
        const bool may_shelve = drive_.sweep_out != SweepOutRegime::FullReset;
        state_ = may_shelve && uniform_(rng_) < model_.shelve_probability ? State::Shelved : State::Empty;
    }

    void emit(Line line) { events_.push_back({t_, line}); }

    void apply(Kind kind) {
        switch (kind) {
            case Kind::Capture:
                state_ = state_ == State::Empty     ? State::X
                         : state_ == State::X       ? State::X2
                                                    : State::ShelvedCharged;
                break;
            case Kind::DecayX:
                emit(Line::X);
                to_ground();
                break;
            case Kind::DecayX2:
                emit(Line::X2);
                state_ = State::X;
                break;
            case Kind::DecayCharged:
                emit(Line::Charged);
                state_ = State::Shelved;
                break;
            case Kind::Unshelve:
                state_ = State::Empty;
                break;
            case Kind::Sweep:
                if (drive_.sweep_out == SweepOutRegime::FullReset) {
                    state_ = State::Empty;
                } else if (state_ == State::ShelvedCharged) {
                    state_ = State::Shelved;
                } else {
                    to_ground();
                }
                break;
        }
    }

    const QDModel& model_;
    const DriveProgram& drive_;
    std::mt19937_64 rng_;
    std::exponential_distribution<double> exponential_{1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    State state_ = State::Empty;
    double t_ = 0.0;
    std::vector<EmissionEvent> events_;
};

}  // namespace

std::string_view to_string(Line line) {
    switch (line) {
        case Line::X: return "X";
        case Line::X2: return "X2";
        case Line::Charged: return "Charged";
    }
    return "?";
}

Line parse_line(std::string_view name) {
    if (name == "X") return Line::X;
    if (name == "X2") return Line::X2;
    if (name == "Charged") return Line::Charged;
    throw InvalidInput("unknown emission line '" + std::string(name) + "' (expected X, X2 or Charged)");
}

std::string_view to_string(SweepOutRegime regime) {
    switch (regime) {
        case SweepOutRegime::None: return "none";
        case SweepOutRegime::ElectronsOnly: return "electrons_only";
        case SweepOutRegime::FullReset: return "full_reset";
    }
    return "?";
}

SweepOutRegime parse_regime(std::string_view name) {
    if (name == "none") return SweepOutRegime::None;
    if (name == "electrons_only") return SweepOutRegime::ElectronsOnly;
    if (name == "full_reset") return SweepOutRegime::FullReset;
    throw InvalidInput("unknown sweep_out regime '" + std::string(name) +
                       "' (expected none, electrons_only or full_reset)");
}

void QDModel::validate() const {
    if (!(std::isfinite(tau_x_ns) && tau_x_ns > 0.0)) throw InvalidInput("qd model: tau_x_ns must be finite and > 0");
    if (!(std::isfinite(tau_x2_ns) && tau_x2_ns > 0.0)) throw InvalidInput("qd model: tau_x2_ns must be finite and > 0");
    if (!finite_nonnegative(capture_rate_per_ns)) throw InvalidInput("qd model: capture_rate_per_ns must be finite and >= 0");
    if (!(shelve_probability >= 0.0 && shelve_probability <= 1.0)) {
        throw InvalidInput("qd model: shelve_probability must lie in [0, 1]");
    }
    if (!finite_nonnegative(unshelve_rate_per_ns)) throw InvalidInput("qd model: unshelve_rate_per_ns must be finite and >= 0");
    if (!finite_nonnegative(sweep_rate_per_ns)) throw InvalidInput("qd model: sweep_rate_per_ns must be finite and >= 0");
    if (max_excitons != 1 && max_excitons != 2) throw InvalidInput("qd model: max_excitons must be 1 or 2");
    if (!finite_nonnegative(charged_lifetime_ns)) throw InvalidInput("qd model: charged_lifetime_ns must be finite and >= 0");
}

double DriveProgram::sweep_onset_ns() const {
    if (mode == DriveMode::DC || sweep_out == SweepOutRegime::None) return period_ns();
    return emission_window_ns > 0.0 ? emission_window_ns : pulse_width_ns();
}

std::size_t DriveProgram::periods() const {
    if (mode == DriveMode::DC) return 1;
    return static_cast<std::size_t>(std::floor(duration_ns / period_ns() + 1e-9));
}

void DriveProgram::validate() const {
    if (!(std::isfinite(duration_ns) && duration_ns > 0.0)) throw InvalidInput("drive: duration_ns must be finite and > 0");
    if (mode == DriveMode::DC) return;
    if (!(std::isfinite(repetition_rate_mhz) && repetition_rate_mhz > 0.0)) {
        throw InvalidInput("drive: repetition_rate_mhz must be finite and > 0");
    }
    if (!(std::isfinite(pulse_width_ps) && pulse_width_ps > 0.0)) {
        throw InvalidInput("drive: pulse_width_ps must be finite and > 0");
    }
    if (pulse_width_ns() >= period_ns()) throw InvalidInput("drive: pulse_width_ps must be shorter than the period");
    if (!finite_nonnegative(emission_window_ns)) throw InvalidInput("drive: emission_window_ns must be finite and >= 0");
    if (sweep_out != SweepOutRegime::None && emission_window_ns > 0.0 &&
        (emission_window_ns < pulse_width_ns() || emission_window_ns >= period_ns())) {
        throw InvalidInput("drive: emission_window_ns must lie between the pulse width and the period");
    }
    if (duration_ns < period_ns()) throw InvalidInput("drive: duration_ns must contain at least one period");
}

std::size_t EmissionRecord::count(Line line) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [line](const EmissionEvent& e) { return e.line == line; }));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

EmissionRecord simulate(const QDModel& model, const DriveProgram& drive, std::uint64_t seed) {
    model.validate();
    drive.validate();

    Trajectory traj(model, drive, seed);
    if (drive.mode == DriveMode::DC) {
        traj.run({0.0, drive.duration_ns, true, false});
        return traj.take(drive.duration_ns);
    }

    const double period = drive.period_ns();
    const double pulse = drive.pulse_width_ns();
    const double onset = drive.sweep_onset_ns();
    const std::size_t n = drive.periods();
    for (std::size_t k = 0; k < n; ++k) {
        const double t0 = static_cast<double>(k) * period;
        traj.run({t0, t0 + pulse, true, false});
        if (onset > pulse) traj.run({t0 + pulse, t0 + onset, false, false});
        if (onset < period) traj.run({t0 + onset, t0 + period, false, true});
    }
    const double tail = static_cast<double>(n) * period;
    if (tail < drive.duration_ns) traj.run({tail, drive.duration_ns, false, false});
    return traj.take(drive.duration_ns);
}

std::vector<EmissionRecord> simulate_ensemble(const QDModel& model, const DriveProgram& drive, std::uint64_t seed,
                                              std::size_t trajectories, std::size_t threads) {
    model.validate();
    drive.validate();
    return parallel_map(
        trajectories, [&](std::size_t i) { return simulate(model, drive, derive_seed(seed, 1000 + i)); }, threads);
}

void LaserSource::validate() const {
    if (!(std::isfinite(repetition_rate_mhz) && repetition_rate_mhz > 0.0)) {
        throw InvalidInput("laser: repetition_rate_mhz must be finite and > 0");
    }
    if (!finite_nonnegative(mean_photons_per_pulse)) {
        throw InvalidInput("laser: mean_photons_per_pulse must be finite and >= 0");
    }
    if (!(std::isfinite(pulse_width_ps) && pulse_width_ps >= 0.0) || pulse_width_ps * 1e-3 >= 1e3 / repetition_rate_mhz) {
        throw InvalidInput("laser: pulse_width_ps must be >= 0 and shorter than the period");
    }
    if (!(std::isfinite(duration_ns) && duration_ns >= 1e3 / repetition_rate_mhz)) {
        throw InvalidInput("laser: duration_ns must contain at least one period");
    }
}

EmissionRecord simulate_laser(const LaserSource& laser, std::uint64_t seed) {
    laser.validate();
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::poisson_distribution<int> photons(laser.mean_photons_per_pulse);
    std::uniform_real_distribution<double> offset(0.0, laser.pulse_width_ps * 1e-3);
    const double period = 1e3 / laser.repetition_rate_mhz;
    const auto n = static_cast<std::size_t>(std::floor(laser.duration_ns / period + 1e-9));

    EmissionRecord r;
    r.duration_ns = laser.duration_ns;
    std::vector<double> times;
    for (std::size_t k = 0; k < n; ++k) {
        const int count = laser.mean_photons_per_pulse > 0.0 ? photons(rng) : 0;
        times.clear();
        for (int j = 0; j < count; ++j) times.push_back(static_cast<double>(k) * period + offset(rng));
        std::sort(times.begin(), times.end());
        for (double t : times) r.events.push_back({t, Line::X});
    }
    return r;
}

std::uint64_t DecayProfile::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

DecayProfile decay_profile(const EmissionRecord& record, const DriveProgram& drive, Line line, double bin_ps) {
    if (drive.mode != DriveMode::Pulsed) throw InvalidInput("decay_profile: requires a pulsed drive");
    drive.validate();
    if (!(std::isfinite(bin_ps) && bin_ps > 0.0)) throw InvalidInput("decay_profile: bin_ps must be finite and > 0");

    DecayProfile p;
    p.period_ns = drive.period_ns();
    const auto bins = static_cast<std::size_t>(std::ceil(p.period_ns / (bin_ps * 1e-3) - 1e-9));
    p.bin_ns = p.period_ns / static_cast<double>(bins);
    p.counts.assign(bins, 0);
    for (const auto& e : record.events) {
        if (e.line != line) continue;
        const double phase = std::fmod(e.time_ns, p.period_ns);
        const auto i = std::min(bins - 1, static_cast<std::size_t>(phase / p.bin_ns));
        ++p.counts[i];
    }
    return p;
}

DecayFit fit_decay(const DecayProfile& profile, double start_ns, double end_ns) {
    if (!(end_ns > start_ns)) throw InvalidInput("fit_decay: end_ns must exceed start_ns");
    std::vector<double> t;
    std::vector<double> n;
    double events = 0.0;
    double sum_t = 0.0;
    for (std::size_t i = 0; i < profile.counts.size(); ++i) {
        const double c = profile.bin_centre(i);
        if (c < start_ns || c > end_ns) continue;
        t.push_back(c - start_ns);
        n.push_back(static_cast<double>(profile.counts[i]));
        events += n.back();
        sum_t += n.back() * t.back();
    }
    if (events < 2.0 || t.size() < 2) throw NumericalFailure("fit_decay: fewer than 2 events in the fit window");
    const double observed_mean = sum_t / events;

    // Model mean of the bin-centre distribution for decay rate g; decreasing in g.
    auto moments = [&](double g) {
        double z = 0.0;
        double m1 = 0.0;
        double m2 = 0.0;
        for (double x : t) {
            const double w = std::exp(-g * x);
            z += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        return std::pair{m1 / z, m2 / z - (m1 / z) * (m1 / z)};
    };
    const double span = t.back();
    double lo = -50.0 / span;
    double hi = 50.0 / span;
    if (!(moments(lo).first > observed_mean && moments(hi).first < observed_mean)) {
        throw NumericalFailure("fit_decay: observed mean outside the range of a single exponential");
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (moments(mid).first > observed_mean ? lo : hi) = mid;
    }
    const double g = 0.5 * (lo + hi);
    if (!(g > 0.0)) throw NumericalFailure("fit_decay: tail is not decaying");
    const double var = moments(g).second;

    DecayFit fit;
    fit.tau_ns = 1.0 / g;
    fit.standard_error_ns = fit.tau_ns * fit.tau_ns / std::sqrt(events * var);
    fit.events = static_cast<std::uint64_t>(events);
    return fit;
}

double photons_per_period(const EmissionRecord& record, const DriveProgram& drive, Line line) {
    if (drive.mode != DriveMode::Pulsed) throw InvalidInput("photons_per_period: requires a pulsed drive");
    const auto n = drive.periods();
    if (n == 0) throw InvalidInput("photons_per_period: no complete period");
    return static_cast<double>(record.count(line)) / static_cast<double>(n);
}

double truncation_factor(double window_ns, double tau_ns) {
    if (!finite_nonnegative(window_ns)) throw InvalidInput("truncation_factor: window must be finite and >= 0");
    if (!(std::isfinite(tau_ns) && tau_ns > 0.0)) throw InvalidInput("truncation_factor: lifetime must be > 0");
    return -std::expm1(-window_ns / tau_ns);
}

double throughput_ratio(double collection_gain, double rate_gain, double qe_factor) {
    for (double f : {collection_gain, rate_gain, qe_factor}) {
        if (!(std::isfinite(f) && f > 0.0)) throw InvalidInput("throughput_ratio: every factor must be finite and > 0");
    }
    return collection_gain * rate_gain * qe_factor;
}

void write_csv(std::ostream& os, const EmissionRecord& record) {
    os << std::setprecision(12);
    os << "time_ns,line\n";
    for (const auto& e : record.events) os << e.time_ns << ',' << to_string(e.line) << '\n';
}

}  // namespace speds::qd
