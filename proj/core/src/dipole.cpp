#include "speds/dipole.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include <boost/math/tools/minima.hpp>

#include "speds/error.hpp"
#include "speds/parallel.hpp"
#include "speds/quadrature.hpp"

namespace speds::dipole {

using optics::Polarization;

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kDeg = std::numbers::pi / 180.0;

bool has_gain(Complex n) { return n.imag() < 0.0; }

// Per-polarization quantities at one in-plane wavevector.
struct ChannelResponse {
    Complex r_top;   // upper-stack reflection referred to the dipole plane
    Complex r_bot;   // lower-stack reflection referred to the dipole plane
    double t_top = 0.0;  // power transmittance host -> top half-space
    double t_bot = 0.0;  // power transmittance host -> substrate
};

class Evaluator {
public:
    Evaluator(const EmissionGeometry& g, double regularization)
        : upper_(optics::with_added_extinction(g.upper, regularization)),
          lower_(optics::with_added_extinction(g.lower, regularization)),
          lambda_(g.source.vacuum_wavelength_nm),
          k0_(optics::vacuum_wavenumber(g.source.vacuum_wavelength_nm)),
          n_host_(g.source.host_index.real()),
          d_up_(g.source.distance_to_upper_stack_nm),
          d_lo_(g.source.distance_to_lower_stack_nm) {}

    ChannelResponse channel(double alpha, Polarization pol) const {
        const double u = std::sin(alpha);
        optics::PlaneWaveQuery q;
        q.vacuum_wavelength_nm = lambda_;
        q.in_plane_wavevector = n_host_ * k0_ * u;
        q.polarization = pol;

        const double kz_host = n_host_ * k0_ * std::cos(alpha);
        const Complex host{n_host_, 0.0};
        const double y_host = optics::admittance(host, Complex(kz_host, 0.0), pol).real();

        const auto up = optics::stack_response(upper_, q);
        const auto lo = optics::stack_response(lower_, q);
        const Complex prop_up = std::exp(Complex(0.0, 2.0 * kz_host * d_up_));
        const Complex prop_lo = std::exp(Complex(0.0, 2.0 * kz_host * d_lo_));

        auto transmittance = [&](const LayerStack& s, Complex t) {
            const Complex n_out = s.exit_index;
            const Complex kz_out = optics::normal_wavevector(n_out, k0_, q.in_plane_wavevector);
            const double y_out = optics::admittance(n_out, kz_out, pol).real();
            return y_host > 0.0 ? std::max(0.0, y_out) / y_host * std::norm(t) : 0.0;
        };

        ChannelResponse c;
        c.r_top = up.r * prop_up;
        c.r_bot = lo.r * prop_lo;
        c.t_top = transmittance(upper_, up.t);
        c.t_bot = transmittance(lower_, lo.t);
        return c;
    }

    // |1 - R_t R_b|; its minima mark cavity and guided-mode resonances.
    double resonance_denominator(double alpha, Polarization pol) const {
        const auto c = channel(alpha, pol);
        return std::abs(1.0 - c.r_top * c.r_bot);
    }

    double dissipated(double alpha) const {
        const double s = std::sin(alpha);
        const double c2 = std::cos(alpha) * std::cos(alpha);
        const auto te = channel(alpha, Polarization::TE);
        const auto tm = channel(alpha, Polarization::TM);
        const Complex te_term = (1.0 + te.r_top) * (1.0 + te.r_bot) / (1.0 - te.r_top * te.r_bot);
        const Complex tm_term = (1.0 - tm.r_top) * (1.0 - tm.r_bot) / (1.0 - tm.r_top * tm.r_bot);
        return 0.75 * s * (te_term.real() + c2 * tm_term.real());
    }

    struct Flux {
        double up = 0.0;
        double down = 0.0;
    };

    Flux flux(double alpha) const {
        const double s = std::sin(alpha);
        const double c2 = std::cos(alpha) * std::cos(alpha);
        const auto te = channel(alpha, Polarization::TE);
        const auto tm = channel(alpha, Polarization::TM);
        const double d_te = std::norm(1.0 - te.r_top * te.r_bot);
        const double d_tm = std::norm(1.0 - tm.r_top * tm.r_bot);
        Flux f;
        f.up = 0.375 * s *
               (std::norm(1.0 + te.r_bot) / d_te * te.t_top + c2 * std::norm(1.0 - tm.r_bot) / d_tm * tm.t_top);
        f.down = 0.375 * s *
                 (std::norm(1.0 + te.r_top) / d_te * te.t_bot + c2 * std::norm(1.0 - tm.r_top) / d_tm * tm.t_bot);
        return f;
    }

private:
    LayerStack upper_;
    LayerStack lower_;
    double lambda_;
    double k0_;
    double n_host_;
    double d_up_;
    double d_lo_;
};

struct Breakpoints {
    std::vector<double> regular;   // resonances and layer light lines
    std::vector<double> branch;    // light lines of the half-spaces
};

void sort_unique(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return b - a < 1e-15; }), v.end());
}

// Breakpoints in alpha: light lines of every lower-index medium and a
// geometric ladder around each resonance of |1 - R_t R_b|.
Breakpoints breakpoints(const EmissionGeometry& g, const Evaluator& ev, const EmissionOptions& opt) {
    Breakpoints bp;
    const double n_host = g.source.host_index.real();
    auto light_line = [&](Complex n, std::vector<double>& into) {
        const double ratio = n.real() / n_host;
        if (ratio > 0.0 && ratio < 1.0) into.push_back(std::asin(ratio));
    };
    for (const auto* s : {&g.upper, &g.lower}) {
        light_line(s->exit_index, bp.branch);
        for (const auto& l : s->layers) light_line(l.refractive_index, bp.regular);
    }

    const std::size_t m = std::max<std::size_t>(opt.pole_scan_points, 16);
    const double step = kHalfPi / static_cast<double>(m);
    for (Polarization pol : {Polarization::TE, Polarization::TM}) {
        auto grid = parallel_map(
            m, [&](std::size_t i) { return ev.resonance_denominator((static_cast<double>(i) + 0.5) * step, pol); },
            opt.threads);
        for (std::size_t i = 1; i + 1 < m; ++i) {
            if (!(grid[i] < grid[i - 1] && grid[i] <= grid[i + 1])) continue;
            const double lo = (static_cast<double>(i) - 0.5) * step;
            const double hi = (static_cast<double>(i) + 1.5) * step;
            auto f = [&](double a) { return ev.resonance_denominator(a, pol); };
            const auto [centre, depth] = boost::math::tools::brent_find_minima(f, lo, hi, 50);
            const double probe = step / 4.0;
            const double rise = 0.5 * (std::abs(f(std::min(centre + probe, kHalfPi)) - depth) +
                                       std::abs(f(std::max(centre - probe, 0.0)) - depth));
            const double slope = rise / probe;
            double width = slope > 0.0 ? depth / slope : step;
            width = std::max(width, 1e-13);
            bp.regular.push_back(centre);
            for (double w = width; w < 2.0 * step; w *= 4.0) {
                bp.regular.push_back(centre - w);
                bp.regular.push_back(centre + w);
            }
        }
    }

    std::erase_if(bp.regular, [](double a) { return !(a > 0.0 && a < kHalfPi); });
    sort_unique(bp.regular);
    sort_unique(bp.branch);
    return bp;
}

// Pieces of [lo, hi] cut at every breakpoint strictly inside; edges that sit
// on a branch point are flagged for the square-root substitution.
std::vector<quadrature::Interval> split(double lo, double hi, const std::vector<double>& regular,
                                        const std::vector<double>& branch) {
    std::vector<std::pair<double, bool>> cuts;
    for (double p : regular) {
        if (p > lo && p < hi) cuts.emplace_back(p, false);
    }
    for (double p : branch) {
        if (p >= lo && p <= hi) cuts.emplace_back(p, true);
    }
    std::sort(cuts.begin(), cuts.end());

    std::vector<quadrature::Interval> out;
    if (!(hi > lo)) return out;
    double a = lo;
    bool a_branch = false;
    for (const auto& [p, is_branch] : cuts) {
        if (p - a < 1e-15) {
            a_branch = a_branch || is_branch;
            continue;
        }
        out.push_back({a, p, a_branch ? quadrature::Edge::SqrtBranch : quadrature::Edge::Regular,
                       is_branch ? quadrature::Edge::SqrtBranch : quadrature::Edge::Regular});
        a = p;
        a_branch = is_branch;
    }
    if (hi - a > 1e-15) {
        out.push_back({a, hi, a_branch ? quadrature::Edge::SqrtBranch : quadrature::Edge::Regular,
                       quadrature::Edge::Regular});
    } else if (!out.empty()) {
        out.back().hi = hi;
    }
    return out;
}

quadrature::Options quadrature_options(const EmissionOptions& opt) {
    quadrature::Options q;
    q.relative_tolerance = opt.relative_tolerance;
    q.absolute_tolerance = opt.absolute_tolerance;
    q.max_subdivisions = opt.max_subdivisions;
    return q;
}

double total_from(const Evaluator& ev, const Breakpoints& bp, const EmissionOptions& opt) {
    const auto pieces = split(0.0, kHalfPi, bp.regular, bp.branch);
    try {
        return quadrature::integrate([&](double a) { return ev.dissipated(a); }, pieces, quadrature_options(opt))
            .value;
    } catch (const NumericalFailure& e) {
        throw NumericalFailure(std::string("total power: ") + e.what());
    }
}

// Far-field angle in a half-space of index n_out reached from host angle
// alpha, or NaN beyond that half-space's light line.
double exit_angle(double n_out, double n_host, double alpha) {
    const double s = n_host * std::sin(alpha) / n_out;
    return s <= 1.0 ? std::asin(s) : std::numeric_limits<double>::quiet_NaN();
}

// Breakpoints carried into the exit angle of one half-space. The exit
// medium's own light line lands on 90 degrees, where the integrand in that
// variable is smooth, so it is dropped.
Breakpoints to_exit_angle(const Breakpoints& bp, double n_out, double n_host) {
    Breakpoints out;
    for (double a : bp.regular) {
        const double t = exit_angle(n_out, n_host, a);
        if (std::isfinite(t)) out.regular.push_back(t);
    }
    for (double a : bp.branch) {
        const double t = exit_angle(n_out, n_host, a);
        if (std::isfinite(t) && t < kHalfPi - 1e-12) out.branch.push_back(t);
    }
    sort_unique(out.regular);
    sort_unique(out.branch);
    return out;
}

}  // namespace

EmissionGeometry homogeneous_geometry(Complex host_index, double vacuum_wavelength_nm) {
    EmissionGeometry g;
    g.source.host_index = host_index;
    g.source.vacuum_wavelength_nm = vacuum_wavelength_nm;
    g.upper.entry_index = g.upper.exit_index = host_index;
    g.lower.entry_index = g.lower.exit_index = host_index;
    return g;
}

void validate(const EmissionGeometry& g) {
    const auto& src = g.source;
    if (!std::isfinite(src.vacuum_wavelength_nm) || src.vacuum_wavelength_nm <= 0.0) {
        throw InvalidInput("dipole source: vacuum wavelength must be finite and > 0");
    }
    if (!std::isfinite(src.distance_to_upper_stack_nm) || src.distance_to_upper_stack_nm < 0.0 ||
        !std::isfinite(src.distance_to_lower_stack_nm) || src.distance_to_lower_stack_nm < 0.0) {
        throw InvalidInput("dipole source: distances to the stacks must be finite and >= 0");
    }

    std::vector<Complex> media{src.host_index, g.upper.entry_index, g.upper.exit_index, g.lower.entry_index,
                               g.lower.exit_index};
    for (const auto& l : g.upper.layers) media.push_back(l.refractive_index);
    for (const auto& l : g.lower.layers) media.push_back(l.refractive_index);
    if (std::any_of(media.begin(), media.end(), has_gain)) {
        throw UnsupportedInput("emission geometry: gain media (Im(n) < 0) are not supported");
    }
    if (src.host_index.imag() != 0.0) {
        throw UnsupportedInput("emission geometry: the host layer must be lossless");
    }
    if (std::abs(g.upper.entry_index - src.host_index) > 1e-12 ||
        std::abs(g.lower.entry_index - src.host_index) > 1e-12) {
        throw InvalidInput("emission geometry: upper and lower stacks must start in the host medium");
    }
    optics::validate(g.upper);
    optics::validate(g.lower);
    const double n_host = src.host_index.real();
    if (g.upper.exit_index.real() > n_host || g.lower.exit_index.real() > n_host) {
        throw UnsupportedInput("emission geometry: half-space index above the host index is not supported");
    }
}

double total_power(const EmissionGeometry& geometry, const EmissionOptions& options) {
    validate(geometry);
    const Evaluator ev(geometry, options.regularization);
    return total_from(ev, breakpoints(geometry, ev, options), options);
}

AngularPowerSpectrum emission_pattern(const EmissionGeometry& geometry, double angular_resolution_deg,
                                      const EmissionOptions& options) {
    if (!(angular_resolution_deg > 0.0 && angular_resolution_deg <= 0.5)) {
        throw InvalidInput("emission_pattern: angular resolution must lie in (0, 0.5] degrees");
    }
    validate(geometry);

    const Evaluator ev(geometry, options.regularization);
    const auto pts = breakpoints(geometry, ev, options);

    const auto half_bins = static_cast<std::size_t>(std::ceil(90.0 / angular_resolution_deg - 1e-9));
    const double width_deg = 90.0 / static_cast<double>(half_bins);
    const std::size_t bins = 2 * half_bins;

    const double n_host = geometry.source.host_index.real();
    const double n_top = geometry.upper.exit_index.real();
    const double n_bot = geometry.lower.exit_index.real();
    const auto bp_top = to_exit_angle(pts, n_top, n_host);
    const auto bp_bot = to_exit_angle(pts, n_bot, n_host);
    auto bin_options = quadrature_options(options);
    bin_options.relative_tolerance = std::max(options.relative_tolerance, 1e-9);

    // Each bin is integrated in the far-field angle of its own half-space,
    // where the transmitted flux has no light-line kink at grazing exit.
    auto bin_power = [&](std::size_t i) {
        const double lo_deg = width_deg * static_cast<double>(i);
        const double hi_deg = lo_deg + width_deg;
        const bool top = i < half_bins;
        const double n_out = top ? n_top : n_bot;
        // Bottom bins are measured from the downward axis in the substrate.
        const double a = (top ? lo_deg : 180.0 - hi_deg) * kDeg;
        const double b = (top ? hi_deg : 180.0 - lo_deg) * kDeg;
        const auto& bp = top ? bp_top : bp_bot;
        auto integrand = [&](double theta) {
            const double alpha = std::asin(std::min(1.0, n_out * std::sin(theta) / n_host));
            const double ca = std::cos(alpha);
            const double jacobian = ca > 0.0 ? n_out * std::cos(theta) / (n_host * ca) : 1.0;
            const auto f = ev.flux(alpha);
            return (top ? f.up : f.down) * jacobian;
        };
        try {
            return quadrature::integrate(integrand, split(a, b, bp.regular, bp.branch), bin_options).value;
        } catch (const NumericalFailure& e) {
            std::ostringstream msg;
            msg << "angular spectrum bin [" << lo_deg << ", " << hi_deg << "] deg: " << e.what();
            throw NumericalFailure(msg.str());
        }
    };

    const auto powers = parallel_map(bins, bin_power, options.threads);

    AngularPowerSpectrum out;
    out.resolution_deg = width_deg;
    out.theta_deg.resize(bins);
    out.power_density.resize(bins);
    double radiated = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        out.theta_deg[i] = width_deg * (static_cast<double>(i) + 0.5);
        out.power_density[i] = powers[i] / (width_deg * kDeg);
        radiated += powers[i];
    }

    out.total_power = total_from(ev, pts, options);
    const double guided = out.total_power - radiated;
    if (guided < -5e-3 * out.total_power) {
        std::ostringstream msg;
        msg << "emission_pattern: radiated power " << radiated << " exceeds dissipated power " << out.total_power;
        throw NumericalFailure(msg.str());
    }
    out.guided_power = std::max(0.0, guided);
    return out;
}

double AngularPowerSpectrum::integrate(double lo_deg, double hi_deg) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < power_density.size(); ++i) {
        const double a = theta_deg[i] - 0.5 * resolution_deg;
        const double b = theta_deg[i] + 0.5 * resolution_deg;
        const double overlap = std::min(hi_deg, b) - std::max(lo_deg, a);
        if (overlap > 0.0) sum += power_density[i] * overlap * kDeg;
    }
    return sum;
}

double collection_efficiency(const AngularPowerSpectrum& spectrum, double numerical_aperture) {
    if (!(numerical_aperture > 0.0 && numerical_aperture <= 1.0)) {
        throw InvalidInput("collection_efficiency: numerical aperture must lie in (0, 1]");
    }
    if (!(spectrum.total_power > 0.0)) throw InvalidInput("collection_efficiency: spectrum has no power");
    const double cone_deg = std::asin(numerical_aperture) / kDeg;
    return spectrum.integrate(0.0, cone_deg) / spectrum.total_power;
}

double analytic_no_cavity_efficiency(double n, double numerical_aperture) {
    if (!(n > 1.0) || !std::isfinite(n)) throw InvalidInput("analytic_no_cavity_efficiency: index must be > 1");
    if (!(numerical_aperture > 0.0 && numerical_aperture <= 1.0)) {
        throw InvalidInput("analytic_no_cavity_efficiency: numerical aperture must lie in (0, 1]");
    }
    const double fresnel = (n - 1.0) / (n + 1.0);
    const double c = std::cos(std::asin(numerical_aperture / n));
    return (1.0 - fresnel * fresnel) * (0.5 - 0.375 * c - 0.125 * c * c * c);
}

void write_csv(std::ostream& os, const AngularPowerSpectrum& spectrum) {
    os << std::setprecision(12);
    os << "# guided_power=" << spectrum.guided_power << '\n';
    os << "# total_power=" << spectrum.total_power << '\n';
    os << "theta_deg,power_density\n";
    for (std::size_t i = 0; i < spectrum.theta_deg.size(); ++i) {
        os << spectrum.theta_deg[i] << ',' << spectrum.power_density[i] << '\n';
    }
}

}  // namespace speds::dipole
