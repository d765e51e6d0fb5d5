#pragma once

#include "flowlab/fft.hpp"

#include <string>
#include <vector>

namespace flowlab {

/// Shell-averaged spectrum over integer |k| bins [k−½, k+½), k in units
/// of 2π/length. E[k] is the energy (or squared magnitude) summed or
/// averaged per shell depending on the producing routine.
struct EnergySpectrum {
    std::vector<double> energy;     // indexed by shell number
    std::vector<std::size_t> modes; // modes per shell (full plane)

    std::size_t shells() const { return energy.size(); }
};

/// Kinetic energy per shell: E(k) = ½ Σ_{|k'| in shell} (|v̂x|²+|v̂y|²)/n⁴.
/// The shell sum equals the mean kinetic energy ½⟨|v|²⟩.
EnergySpectrum energy_spectrum(const RealField& vx, const RealField& vy);
EnergySpectrum energy_spectrum_spectral(const SpectralField& vx_hat, const SpectralField& vy_hat);

/// Shell-averaged squared Fourier magnitude ⟨|ω(k)|²⟩ of a normalized image
/// (zero mean, unit std — matching the classifier input normalization).
/// Rejects degenerate (zero-std) images.
EnergySpectrum image_power_spectrum(const RealField& img);

/// Least-squares line in (log k, log E) over shells inside [k_lo, k_hi].
struct PowerLawFit {
    double slope = 0.0;
    double intercept = 0.0; // log-space intercept
    double r2 = 0.0;
    double k_lo = 0.0, k_hi = 0.0;
    int shells_used = 0;
};

PowerLawFit fit_power_law(const EnergySpectrum& spec, double k_lo, double k_hi);

/// Longitudinal structure functions S_n(r) over both axis directions with
/// periodic wrap; separations are integer multiples of dx.
struct StructureFunctions {
    std::vector<int> orders;
    std::vector<int> separations; // in grid cells
    // values[oi][ri] = S_{orders[oi]}(separations[ri] * dx)
    std::vector<std::vector<double>> values;
};

StructureFunctions structure_function(const RealField& vx, const RealField& vy,
                                      const std::vector<int>& orders,
                                      const std::vector<int>& separations);

/// Normalized histogram (density integrates to 1) plus a moment-fit Gaussian.
struct Pdf {
    std::vector<double> edges;   // bins+1 entries
    std::vector<double> density; // bins entries
    double fit_mean = 0.0;
    double fit_std = 0.0;
};

Pdf histogram_pdf(const RealField& field, int bins);
Pdf histogram_pdf(const std::vector<double>& samples, int bins);

/// Per-snapshot regime labels derived from the spectrum time series.
enum class Regime { Chaotic, Turbulent, Discard };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& name);

struct RegimeConfig {
    double k_forcing = 20.0;
    double slope_target = -5.0 / 3.0;
    double slope_tol = 0.35;
    double r2_min = 0.95;
    double band_lo = 0.0;  // 0: use max(4, k_forcing/4)
    double band_hi = 0.0;  // 0: use 0.8·k_forcing
    double t_spinup = 5.0; // snapshots at t <= t_spinup are discarded

    double effective_band_lo() const { return band_lo > 0 ? band_lo : std::max(4.0, k_forcing / 4.0); }
    double effective_band_hi() const { return band_hi > 0 ? band_hi : 0.8 * k_forcing; }
};

struct LabeledSnapshot {
    double t = 0.0;
    Regime regime = Regime::Discard;
    double slope = 0.0;
    double r2 = 0.0;
};

/// Turbulent ⇔ inverse-cascade band slope within slope_tol of −5/3 with
/// r² ≥ r2_min; chaotic ⇔ past spin-up but before the first turbulent
/// snapshot; everything else discarded. Returns labels in input order.
/// `warned` (optional) is set when the series never reaches turbulence.
std::vector<LabeledSnapshot> classify_regime(const std::vector<double>& times,
                                             const std::vector<EnergySpectrum>& spectra,
                                             const RegimeConfig& config,
                                             bool* never_turbulent = nullptr);

} // namespace flowlab
