#include "flowlab/forcing.hpp"

#include <cmath>

namespace flowlab {

void ForcingSpec::validate(const Grid2D& grid) const {
    if (amplitude <= 0.0) throw std::invalid_argument("ForcingSpec: amplitude must be positive");
    if (half_width < 0.0) throw std::invalid_argument("ForcingSpec: half_width must be >= 0");
    if (k_center - half_width <= 0.0)
        throw std::invalid_argument("ForcingSpec: annulus must exclude k=0");
    const WaveNumbers wn(grid);
    const double cutoff = (2.0 / 3.0) * (grid.n / 2) * wn.unit();
    if ((k_center + half_width) * wn.unit() >= cutoff)
        throw std::invalid_argument("ForcingSpec: annulus crosses the dealias cutoff");
}

SpectralField sample_annulus_scalar(const ForcingSpec& spec, const Grid2D& grid, Rng& rng) {
    spec.validate(grid);
    const int n = grid.n;
    const int half = grid.half();
    const WaveNumbers wn(grid);
    const double lo = (spec.k_center - spec.half_width) * wn.unit();
    const double hi = (spec.k_center + spec.half_width) * wn.unit();

    SpectralField F(grid);
    std::size_t hit = 0;
    // Draw in fixed (iky, ikx) order so a given seed yields a fixed field.
    for (int iky = 0; iky < n; ++iky) {
        for (int ikx = 0; ikx < half; ++ikx) {
            const double kmag = std::sqrt(wn.k2(iky, ikx));
            if (kmag < lo || kmag > hi) continue;
            F.at(iky, ikx) = std::complex<double>(rng.normal(), rng.normal());
            ++hit;
        }
    }
    if (hit == 0) throw std::invalid_argument("sample_annulus_scalar: annulus contains no modes");

    hermitian_enforce(F);
    RealField f = transform_inverse(F);
    const double rms = f.rms();
    if (rms <= 0.0) throw std::runtime_error("sample_annulus_scalar: degenerate draw");
    const double scale = spec.amplitude / rms;
    for (auto& c : F.coeffs) c *= scale;
    return F;
}

ForcingSpectral make_forcing_spectral(const ForcingSpec& spec, const Grid2D& grid, Rng& rng) {
    SpectralField phi = sample_annulus_scalar(spec, grid, rng);
    ForcingSpectral out;
    out.fx_hat = spectral_derivative(phi, Axis::Y, 1);
    for (auto& c : out.fx_hat.coeffs) c = -c; // f_x = −∂yφ
    out.fy_hat = spectral_derivative(phi, Axis::X, 1);
    out.f_omega_hat = spectral_laplacian(phi); // ε_ij ∂i f_j = ∇²φ
    return out;
}

ForcingFields make_forcing(const ForcingSpec& spec, const Grid2D& grid, Rng& rng) {
    ForcingSpectral s = make_forcing_spectral(spec, grid, rng);
    return ForcingFields{transform_inverse(s.fx_hat), transform_inverse(s.fy_hat),
                         transform_inverse(s.f_omega_hat)};
}

} // namespace flowlab
