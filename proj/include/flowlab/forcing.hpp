#pragma once

#include "flowlab/fft.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

/// Gaussian random forcing supported on a wavenumber annulus around k_center.
/// Redrawn independently every solver step with fixed per-draw rms; the
/// amplitude is a free knob recorded in run headers.
struct ForcingSpec {
    double k_center = 20.0;   // forcing wavenumber, units 2π/length
    double half_width = 1.5;  // annulus half-width, same units
    double amplitude = 1.0;   // real-space rms of the sampled scalar
    std::uint64_t seed_stream = 0;

    void validate(const Grid2D& grid) const;
};

/// Scalar Gaussian field with support on |k| in [k_center−hw, k_center+hw]:
/// iid complex Gaussian coefficients inside the annulus, Hermitian-symmetrized,
/// zero mean mode, rescaled so the real-space rms equals spec.amplitude.
SpectralField sample_annulus_scalar(const ForcingSpec& spec, const Grid2D& grid, Rng& rng);

struct ForcingFields {
    RealField fx, fy;  // divergence-free Cartesian force f = (−∂yφ, ∂xφ)
    RealField f_omega; // curl of f, equal to ∇²φ
};

/// Draws one forcing realization. Both representations derive from the same
/// potential φ so the incompressible and compressible solvers can be driven
/// by statistically identical forcing.
ForcingFields make_forcing(const ForcingSpec& spec, const Grid2D& grid, Rng& rng);

/// Same draw in spectral form: (f̂x, f̂y, f̂_ω). Used by the vorticity solver.
struct ForcingSpectral {
    SpectralField fx_hat, fy_hat, f_omega_hat;
};
ForcingSpectral make_forcing_spectral(const ForcingSpec& spec, const Grid2D& grid, Rng& rng);

} // namespace flowlab
