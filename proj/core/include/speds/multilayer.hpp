#pragma once

// Plane-wave optics of planar layer stacks.
//
// Conventions used throughout the library:
//   * time dependence exp(-i*omega*t); a wave travelling through a layer of
//     thickness d picks up the phase exp(+i*kz*d);
//   * lengths in nm, wavevectors in rad/nm;
//   * the layer-normal wavevector kz = sqrt((n*k0)^2 - k_par^2) is taken on
//     the branch Im(kz) >= 0, and Re(kz) >= 0 when Im(kz) == 0;
//   * TE amplitudes refer to the tangential electric field, TM amplitudes to
//     the tangential magnetic field. With this choice both polarizations share
//     r = (Y1 - Y2)/(Y1 + Y2), t = 2*Y1/(Y1 + Y2) with admittance Y = kz (TE)
//     or Y = kz/n^2 (TM). At normal incidence r_TM = -r_TE.

#include <complex>
#include <cstddef>
#include <vector>

namespace speds::optics {

using Complex = std::complex<double>;

enum class Polarization { TE, TM };

struct Layer {
    double thickness_nm = 0.0;
    Complex refractive_index{1.0, 0.0};
};

// Layers are ordered from the entry half-space to the exit half-space. For a
// free-standing structure that means top to bottom along the growth axis.
struct LayerStack {
    Complex entry_index{1.0, 0.0};
    std::vector<Layer> layers;
    Complex exit_index{1.0, 0.0};

    // The same structure seen from the exit side.
    [[nodiscard]] LayerStack reversed() const;
    [[nodiscard]] double total_thickness_nm() const;
};

struct PlaneWaveQuery {
    double vacuum_wavelength_nm = 900.0;
    double in_plane_wavevector = 0.0;  // rad/nm, may exceed the entry light line
    Polarization polarization = Polarization::TE;

    // Query for a propagating wave at angle theta (radians) in a medium of real index n.
    static PlaneWaveQuery at_angle(double vacuum_wavelength_nm, double medium_index, double theta,
                                   Polarization pol);
};

struct Amplitudes {
    Complex r;
    Complex t;
};

// Reference materials, 900 nm, dispersionless.
namespace materials {
inline constexpr double kGaAs = 3.5;
inline constexpr double kAlAs = 2.95;
inline constexpr double kAir = 1.0;
inline constexpr double kDesignWavelengthNm = 900.0;
}  // namespace materials

[[nodiscard]] double vacuum_wavenumber(double vacuum_wavelength_nm);

// Layer-normal wavevector on the Im >= 0 branch.
[[nodiscard]] Complex normal_wavevector(Complex index, double k0, double in_plane_wavevector);

// Characteristic admittance entering the Fresnel formulas (see header comment).
[[nodiscard]] Complex admittance(Complex index, Complex kz, Polarization pol);

[[nodiscard]] Amplitudes fresnel_interface(Complex n1, Complex n2, const PlaneWaveQuery& query);

// Total reflection/transmission of the stack. r is referenced to the entry-side
// boundary; t is the exit-side field at the exit boundary per unit incident field
// at the entry boundary.
[[nodiscard]] Amplitudes stack_response(const LayerStack& stack, const PlaneWaveQuery& query);

// Power coefficients derived from stack_response. Transmittance uses the
// admittance weight Re(Y_exit)/Re(Y_entry); it is meaningful for a lossless
// entry medium and propagating incidence.
struct PowerCoefficients {
    double reflectance = 0.0;
    double transmittance = 0.0;
};
[[nodiscard]] PowerCoefficients power_coefficients(const LayerStack& stack, const PlaneWaveQuery& query);

// Quarter-wave Bragg mirror: `periods` pairs of (low, high) index layers, the
// low-index layer of each pair facing the entry side, each layer
// design_wavelength/(4*Re(n)) thick. Entry and exit media default to the high
// index; callers set them to match the surrounding structure.
[[nodiscard]] LayerStack build_bragg(Complex n_high, Complex n_low, double design_wavelength_nm,
                                     int periods);

// Throws InvalidInput when the stack has non-finite or active (Im n < 0)
// media, or a layer whose thickness is not finite and positive.
void validate(const LayerStack& stack);

// Copy of the stack with `extinction` added to the imaginary part of every
// layer index (half-spaces untouched).
[[nodiscard]] LayerStack with_added_extinction(const LayerStack& stack, double extinction);

}  // namespace speds::optics
