#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowlab {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Square periodic grid: n samples per side spanning [0, length) in x and y.
struct Grid2D {
    int n = 0;
    double length = kTwoPi;

    Grid2D() = default;
    Grid2D(int n_, double length_ = kTwoPi) : n(n_), length(length_) {
        if (n < 8) throw std::invalid_argument("Grid2D: n must be >= 8, got " + std::to_string(n));
        if (length <= 0.0) throw std::invalid_argument("Grid2D: length must be positive");
    }

    double dx() const { return length / n; }
    std::size_t size() const { return static_cast<std::size_t>(n) * n; }
    /// Number of stored kx modes in the half-plane layout of a real transform.
    int half() const { return n / 2 + 1; }

    bool operator==(const Grid2D&) const = default;
};

/// Real scalar samples, row-major: data[iy*n + ix] with x = ix*dx, y = iy*dx.
struct RealField {
    Grid2D grid;
    std::vector<double> data;

    RealField() = default;
    explicit RealField(const Grid2D& g, double fill = 0.0) : grid(g), data(g.size(), fill) {}

    double& at(int iy, int ix) { return data[static_cast<std::size_t>(iy) * grid.n + ix]; }
    double at(int iy, int ix) const { return data[static_cast<std::size_t>(iy) * grid.n + ix]; }

    bool finite() const;
    double max_abs() const;
    double rms() const;
    double mean() const;
};

/// Complex Fourier coefficients of a real field on the r2c half-plane.
/// Layout: coeffs[iky * (n/2+1) + ikx] with ikx in [0, n/2], iky in [0, n).
/// Modes with ikx in {0, n/2} carry their own conjugate partners at
/// iky <-> n-iky; the four corners (ikx, iky both in {0, n/2}) are
/// self-conjugate and must be real.
struct SpectralField {
    Grid2D grid;
    std::vector<std::complex<double>> coeffs;

    SpectralField() = default;
    explicit SpectralField(const Grid2D& g)
        : grid(g), coeffs(static_cast<std::size_t>(g.n) * g.half(), std::complex<double>(0.0, 0.0)) {}

    std::complex<double>& at(int iky, int ikx) {
        return coeffs[static_cast<std::size_t>(iky) * grid.half() + ikx];
    }
    std::complex<double> at(int iky, int ikx) const {
        return coeffs[static_cast<std::size_t>(iky) * grid.half() + ikx];
    }
};

/// Wavenumbers per mode index, in physical units 2π/length.
class WaveNumbers {
public:
    explicit WaveNumbers(const Grid2D& g) : n_(g.n), k0_(kTwoPi / g.length) {}

    /// kx for stored index ikx in [0, n/2]; the Nyquist column maps to -n/2·k0
    /// so that all wavenumbers lie in [-n/2, n/2)·(2π/length).
    double kx(int ikx) const { return (ikx == n_ / 2 ? -ikx : ikx) * k0_; }
    double ky(int iky) const { return (iky <= n_ / 2 - 1 ? iky : iky - n_) * k0_; }

    double k2(int iky, int ikx) const {
        const double a = kx(ikx), b = ky(iky);
        return a * a + b * b;
    }
    double k4(int iky, int ikx) const {
        const double s = k2(iky, ikx);
        return s * s;
    }
    /// Magnitude |k| in units of 2π/length.
    double k_mag(int iky, int ikx) const;

    double unit() const { return k0_; }

private:
    int n_;
    double k0_;
};

inline double WaveNumbers::k_mag(int iky, int ikx) const {
    return std::sqrt(k2(iky, ikx));
}

} // namespace flowlab
