#include "speds/multilayer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "speds/error.hpp"

namespace speds::optics {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

void require_medium(Complex n, const char* what) {
    if (!finite(n)) {
        throw InvalidInput(std::string(what) + ": refractive index is not finite");
    }
    if (n.real() <= 0.0) {
        throw InvalidInput(std::string(what) + ": refractive index must have Re(n) > 0");
    }
    if (n.imag() < 0.0) {
        throw InvalidInput(std::string(what) + ": active medium (Im(n) < 0) is not allowed");
    }
}

void require_query(const PlaneWaveQuery& q) {
    if (!std::isfinite(q.vacuum_wavelength_nm) || q.vacuum_wavelength_nm <= 0.0) {
        throw InvalidInput("query: vacuum wavelength must be finite and > 0");
    }
    if (!std::isfinite(q.in_plane_wavevector) || q.in_plane_wavevector < 0.0) {
        throw InvalidInput("query: in-plane wavevector must be finite and >= 0");
    }
}

}  // namespace

LayerStack LayerStack::reversed() const {
    LayerStack out;
    out.entry_index = exit_index;
    out.exit_index = entry_index;
    out.layers.assign(layers.rbegin(), layers.rend());
    return out;
}

double LayerStack::total_thickness_nm() const {
    double sum = 0.0;
    for (const auto& l : layers) sum += l.thickness_nm;
    return sum;
}

PlaneWaveQuery PlaneWaveQuery::at_angle(double vacuum_wavelength_nm, double medium_index, double theta,
                                        Polarization pol) {
    PlaneWaveQuery q;
    q.vacuum_wavelength_nm = vacuum_wavelength_nm;
    q.in_plane_wavevector = medium_index * vacuum_wavenumber(vacuum_wavelength_nm) * std::sin(theta);
    q.polarization = pol;
    return q;
}

double vacuum_wavenumber(double vacuum_wavelength_nm) {
    return 2.0 * std::numbers::pi / vacuum_wavelength_nm;
}

Complex normal_wavevector(Complex index, double k0, double in_plane_wavevector) {
    const Complex nk = index * k0;
    Complex kz = std::sqrt(nk * nk - Complex(in_plane_wavevector * in_plane_wavevector, 0.0));
    // std::sqrt may land on Im < 0 for a negative real argument carrying -0.0.
    if (kz.imag() < 0.0 || (kz.imag() == 0.0 && kz.real() < 0.0)) kz = -kz;
    return kz;
}

Complex admittance(Complex index, Complex kz, Polarization pol) {
    return pol == Polarization::TE ? kz : kz / (index * index);
}

Amplitudes fresnel_interface(Complex n1, Complex n2, const PlaneWaveQuery& query) {
    if (!finite(n1) || !finite(n2)) throw InvalidInput("fresnel_interface: non-finite refractive index");
    require_query(query);
    const double k0 = vacuum_wavenumber(query.vacuum_wavelength_nm);
    const Complex y1 = admittance(n1, normal_wavevector(n1, k0, query.in_plane_wavevector), query.polarization);
    const Complex y2 = admittance(n2, normal_wavevector(n2, k0, query.in_plane_wavevector), query.polarization);
    const Complex sum = y1 + y2;
    if (std::abs(sum) == 0.0) {
        throw InvalidInput("fresnel_interface: degenerate interface (both media at grazing cutoff)");
    }
    return {(y1 - y2) / sum, 2.0 * y1 / sum};
}

void validate(const LayerStack& stack) {
    require_medium(stack.entry_index, "entry medium");
    require_medium(stack.exit_index, "exit medium");
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        const auto& l = stack.layers[i];
        if (!std::isfinite(l.thickness_nm) || l.thickness_nm <= 0.0) {
            std::ostringstream msg;
            msg << "layer " << i << ": thickness must be finite and > 0 (got " << l.thickness_nm << " nm)";
            throw InvalidInput(msg.str());
        }
        require_medium(l.refractive_index, ("layer " + std::to_string(i)).c_str());
    }
}

Amplitudes stack_response(const LayerStack& stack, const PlaneWaveQuery& query) {
    validate(stack);
    require_query(query);

    const double k0 = vacuum_wavenumber(query.vacuum_wavelength_nm);
    const double kp = query.in_plane_wavevector;
    const auto pol = query.polarization;
    const std::size_t n_layers = stack.layers.size();

    auto index_of = [&](std::size_t m) -> Complex {
        if (m == 0) return stack.entry_index;
        if (m == n_layers + 1) return stack.exit_index;
        return stack.layers[m - 1].refractive_index;
    };

    // Medium m runs over entry (0), layers (1..L), exit (L+1).
    Complex kz_next = normal_wavevector(index_of(n_layers + 1), k0, kp);
    Complex y_next = admittance(index_of(n_layers + 1), kz_next, pol);

    Complex r{0.0, 0.0};
    Complex t{1.0, 0.0};
    // Fold interfaces in from the exit side; r, t describe everything below medium m.
    for (std::size_t m = n_layers + 1; m-- > 0;) {
        const Complex n_m = index_of(m);
        const Complex kz_m = normal_wavevector(n_m, k0, kp);
        const Complex y_m = admittance(n_m, kz_m, pol);
        const Complex sum = y_m + y_next;
        if (std::abs(sum) == 0.0) throw InvalidInput("stack_response: degenerate interface");
        const Complex r_if = (y_m - y_next) / sum;
        const Complex t_if = 2.0 * y_m / sum;

        if (m == n_layers) {
            r = r_if;
            t = t_if;
        } else {
            const Complex phase = std::exp(Complex(0.0, 1.0) * kz_next * stack.layers[m].thickness_nm);
            const Complex round_trip = r * phase * phase;
            const Complex denom = 1.0 + r_if * round_trip;
            r = (r_if + round_trip) / denom;
            t = t_if * t * phase / denom;
        }
        kz_next = kz_m;
        y_next = y_m;
    }
    return {r, t};
}

PowerCoefficients power_coefficients(const LayerStack& stack, const PlaneWaveQuery& query) {
    const Amplitudes amp = stack_response(stack, query);
    const double k0 = vacuum_wavenumber(query.vacuum_wavelength_nm);
    const Complex y_in = admittance(stack.entry_index,
                                    normal_wavevector(stack.entry_index, k0, query.in_plane_wavevector),
                                    query.polarization);
    const Complex y_out = admittance(stack.exit_index,
                                     normal_wavevector(stack.exit_index, k0, query.in_plane_wavevector),
                                     query.polarization);
    PowerCoefficients p;
    p.reflectance = std::norm(amp.r);
    p.transmittance = y_in.real() > 0.0 ? y_out.real() / y_in.real() * std::norm(amp.t) : 0.0;
    return p;
}

LayerStack build_bragg(Complex n_high, Complex n_low, double design_wavelength_nm, int periods) {
    if (periods < 0) throw InvalidInput("build_bragg: period count must be >= 0");
    if (!finite(n_high) || !finite(n_low) || n_high.real() <= 0.0 || n_low.real() <= 0.0) {
        throw InvalidInput("build_bragg: indices must be finite with Re(n) > 0");
    }
    if (!std::isfinite(design_wavelength_nm) || design_wavelength_nm <= 0.0) {
        throw InvalidInput("build_bragg: design wavelength must be finite and > 0");
    }
    LayerStack stack;
    stack.entry_index = n_high;
    stack.exit_index = n_high;
    stack.layers.reserve(2 * static_cast<std::size_t>(periods));
    const Layer low{design_wavelength_nm / (4.0 * n_low.real()), n_low};
    const Layer high{design_wavelength_nm / (4.0 * n_high.real()), n_high};
    for (int p = 0; p < periods; ++p) {
        stack.layers.push_back(low);
        stack.layers.push_back(high);
    }
    return stack;
}

LayerStack with_added_extinction(const LayerStack& stack, double extinction) {
    LayerStack out = stack;
    for (auto& l : out.layers) l.refractive_index += Complex(0.0, extinction);
    return out;
}

}  // namespace speds::optics
