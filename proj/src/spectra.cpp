#include "flowlab/spectra.hpp"

#include <algorithm>
#include <cmath>

namespace flowlab {

namespace {

int shell_count(const Grid2D& grid) {
    // Largest |k| on the grid is n/2·√2 (rounding to the nearest shell);
    // the partial shells above n/2 are kept so the shell sum matches the
    // total energy exactly.
    return static_cast<int>(std::floor(grid.n / 2 * std::sqrt(2.0) + 0.5)) + 1;
}

EnergySpectrum shell_reduce(const SpectralField& a, const SpectralField& b, double scale,
                            bool average) {
    const Grid2D& grid = a.grid;
    const int n = grid.n;
    const int half = grid.half();
    const WaveNumbers wn(grid);
    EnergySpectrum spec;
    spec.energy.assign(shell_count(grid), 0.0);
    spec.modes.assign(shell_count(grid), 0);

    for (int iky = 0; iky < n; ++iky) {
        for (int ikx = 0; ikx < half; ++ikx) {
            const double kmag = wn.k_mag(iky, ikx) / wn.unit();
            const int shell = static_cast<int>(std::floor(kmag + 0.5));
            if (shell >= static_cast<int>(spec.energy.size())) continue;
            const int mult = mode_multiplicity(grid, ikx);
            double e = std::norm(a.at(iky, ikx));
            if (!b.coeffs.empty()) e += std::norm(b.at(iky, ikx));
            spec.energy[shell] += mult * scale * e;
            spec.modes[shell] += mult;
        }
    }
    if (average) {
        for (std::size_t s = 0; s < spec.energy.size(); ++s)
            if (spec.modes[s] > 0) spec.energy[s] /= static_cast<double>(spec.modes[s]);
    }
    return spec;
}

} // namespace

EnergySpectrum energy_spectrum_spectral(const SpectralField& vx_hat, const SpectralField& vy_hat) {
    if (!(vx_hat.grid == vy_hat.grid))
        throw std::invalid_argument("energy_spectrum: grid mismatch");
    const double n2 = static_cast<double>(vx_hat.grid.size());
    return shell_reduce(vx_hat, vy_hat, 0.5 / (n2 * n2), /*average=*/false);
}

EnergySpectrum energy_spectrum(const RealField& vx, const RealField& vy) {
    if (!(vx.grid == vy.grid)) throw std::invalid_argument("energy_spectrum: grid mismatch");
    return energy_spectrum_spectral(transform_forward(vx), transform_forward(vy));
}

EnergySpectrum image_power_spectrum(const RealField& img) {
    const double mean = img.mean();
    double var = 0.0;
    for (double v : img.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(img.data.size());
    if (var <= 0.0)
        throw std::invalid_argument("image_power_spectrum: degenerate image (zero variance)");
    const double inv_std = 1.0 / std::sqrt(var);

    RealField norm(img.grid);
    for (std::size_t i = 0; i < img.data.size(); ++i) norm.data[i] = (img.data[i] - mean) * inv_std;

    const double n2 = static_cast<double>(img.grid.size());
    SpectralField F = transform_forward(norm);
    SpectralField none;
    return shell_reduce(F, none, 1.0 / (n2 * n2), /*average=*/true);
}

PowerLawFit fit_power_law(const EnergySpectrum& spec, double k_lo, double k_hi) {
    PowerLawFit fit;
    fit.k_lo = k_lo;
    fit.k_hi = k_hi;

    std::vector<double> lx, ly;
    for (std::size_t s = 0; s < spec.energy.size(); ++s) {
        const double k = static_cast<double>(s);
        if (k < k_lo || k > k_hi) continue;
        if (spec.energy[s] <= 0.0) continue;
        lx.push_back(std::log(k));
        ly.push_back(std::log(spec.energy[s]));
    }
    fit.shells_used = static_cast<int>(lx.size());
    if (fit.shells_used < 4)
        throw std::invalid_argument("fit_power_law: fewer than 4 usable shells in band");

    const double m = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
        syy += ly[i] * ly[i];
    }
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_power_law: degenerate abscissa");
    fit.slope = (m * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / m;

    const double ss_tot = syy - sy * sy / m;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += r * r;
    }
    fit.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

StructureFunctions structure_function(const RealField& vx, const RealField& vy,
                                      const std::vector<int>& orders,
                                      const std::vector<int>& separations) {
    if (!(vx.grid == vy.grid)) throw std::invalid_argument("structure_function: grid mismatch");
    for (int o : orders)
        if (o < 1 || o > 8) throw std::invalid_argument("structure_function: orders must be in [1,8]");

    const int n = vx.grid.n;
    StructureFunctions out;
    out.orders = orders;
    out.separations = separations;
    out.values.assign(orders.size(), std::vector<double>(separations.size(), 0.0));

    for (std::size_t ri = 0; ri < separations.size(); ++ri) {
        const int r = separations[ri];
        std::vector<double> acc(orders.size(), 0.0);
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                // longitudinal increments along +x and +y with periodic wrap
                const double dvx = vx.at(iy, (ix + r) % n) - vx.at(iy, ix);
                const double dvy = vy.at((iy + r) % n, ix) - vy.at(iy, ix);
                for (std::size_t oi = 0; oi < orders.size(); ++oi) {
                    double px = dvx, py = dvy;
                    for (int p = 1; p < orders[oi]; ++p) {
                        px *= dvx;
                        py *= dvy;
                    }
                    acc[oi] += px + py;
                }
            }
        }
        const double denom = 2.0 * static_cast<double>(n) * n;
        for (std::size_t oi = 0; oi < orders.size(); ++oi) out.values[oi][ri] = acc[oi] / denom;
    }
    return out;
}

Pdf histogram_pdf(const std::vector<double>& samples, int bins) {
    if (bins < 10) throw std::invalid_argument("histogram_pdf: bins must be >= 10");
    if (samples.empty()) throw std::invalid_argument("histogram_pdf: no samples");

    double lo = samples[0], hi = samples[0], sum = 0.0;
    for (double v : samples) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    const double mean = sum / static_cast<double>(samples.size());
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(samples.size());

    if (hi == lo) { // degenerate: single occupied bin around the value
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / bins;

    Pdf pdf;
    pdf.fit_mean = mean;
    pdf.fit_std = std::sqrt(var);
    pdf.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) pdf.edges[b] = lo + b * width;
    pdf.density.assign(bins, 0.0);
    for (double v : samples) {
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        pdf.density[b] += 1.0;
    }
    const double norm = 1.0 / (static_cast<double>(samples.size()) * width);
    for (double& d : pdf.density) d *= norm;
    return pdf;
}

Pdf histogram_pdf(const RealField& field, int bins) { return histogram_pdf(field.data, bins); }

std::string regime_name(Regime r) {
    switch (r) {
    case Regime::Chaotic: return "chaotic";
    case Regime::Turbulent: return "turbulent";
    case Regime::Discard: return "discard";
    }
    return "discard";
}

Regime regime_from_name(const std::string& name) {
    if (name == "chaotic") return Regime::Chaotic;
    if (name == "turbulent") return Regime::Turbulent;
    return Regime::Discard;
}

std::vector<LabeledSnapshot> classify_regime(const std::vector<double>& times,
                                             const std::vector<EnergySpectrum>& spectra,
                                             const RegimeConfig& config, bool* never_turbulent) {
    if (times.size() != spectra.size())
        throw std::invalid_argument("classify_regime: times/spectra length mismatch");

    const double lo = config.effective_band_lo();
    const double hi = config.effective_band_hi();

    std::vector<LabeledSnapshot> labels(times.size());
    double first_turbulent_t = -1.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        labels[i].t = times[i];
        bool turbulent = false;
        try {
            const PowerLawFit fit = fit_power_law(spectra[i], lo, hi);
            labels[i].slope = fit.slope;
            labels[i].r2 = fit.r2;
            turbulent = std::abs(fit.slope - config.slope_target) <= config.slope_tol &&
                        fit.r2 >= config.r2_min;
        } catch (const std::invalid_argument&) {
            // too few populated shells yet: not turbulent
        }
        if (turbulent) {
            labels[i].regime = Regime::Turbulent;
            if (first_turbulent_t < 0.0) first_turbulent_t = times[i];
        }
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (labels[i].regime == Regime::Turbulent) continue;
        const bool past_spinup = times[i] > config.t_spinup;
        const bool before_cascade = first_turbulent_t < 0.0 || times[i] < first_turbulent_t;
        labels[i].regime = (past_spinup && before_cascade) ? Regime::Chaotic : Regime::Discard;
    }
    if (never_turbulent) *never_turbulent = first_turbulent_t < 0.0;
    return labels;
}

} // namespace flowlab
