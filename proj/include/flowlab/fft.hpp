#pragma once

#include "flowlab/grid.hpp"

namespace flowlab {

enum class Axis { X = 0, Y = 1 };

/// Unnormalized forward transform of a real field (DC coefficient of a
/// constant field c is c·n²). Rejects non-finite input.
SpectralField transform_forward(const RealField& f);

/// Inverse transform, dividing by n² so that inverse(forward(f)) == f.
/// Rejects coefficient sets that violate Hermitian symmetry beyond a
/// 1e-8 relative tolerance on the self-conjugate columns.
RealField transform_inverse(const SpectralField& F);

/// Coefficient-wise multiplication by (i·k_axis)^order, order in {1, 2}.
/// Odd orders zero the Nyquist mode of the derivative axis so the result
/// stays the transform of a real field.
SpectralField spectral_derivative(const SpectralField& F, Axis axis, int order);

/// Multiplication by -|k|²  (the Laplacian symbol).
SpectralField spectral_laplacian(const SpectralField& F);

/// Multiplication by |k|⁴  (the biharmonic symbol, (∇²)²).
SpectralField spectral_biharmonic(const SpectralField& F);

/// Two-thirds rule: zero every coefficient with max(|kx|,|ky|) above
/// (2/3)·(n/2)·(2π/length). Orthogonal projection, hence idempotent.
SpectralField dealias(const SpectralField& F);
void dealias_inplace(SpectralField& F);

/// True iff the mode survives the two-thirds cut.
bool mode_kept_by_dealias(const Grid2D& grid, int iky, int ikx);

/// Sum of |F|² over the full plane (unfolding the half-plane storage).
/// Under the project normalization, Σₓ f² = spectral_sum_sq(F) / n².
double spectral_sum_sq(const SpectralField& F);

/// Multiplicity of a stored mode when unfolding to the full plane
/// (2 for interior kx columns, 1 for kx in {0, n/2}).
inline int mode_multiplicity(const Grid2D& grid, int ikx) {
    return (ikx == 0 || ikx == grid.n / 2) ? 1 : 2;
}

/// Makes the half-plane coefficients exactly Hermitian-consistent: the four
/// self-conjugate corners become real and the kx in {0, n/2} columns get
/// their iky > n/2 halves overwritten with the conjugate of the lower half.
void hermitian_enforce(SpectralField& F);

/// Max relative Hermitian violation on the checkable columns (0 when exact).
double hermitian_violation(const SpectralField& F);

} // namespace flowlab
