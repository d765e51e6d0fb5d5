// Scratch calibration driver for the desk profiles: runs a forced simulation
// (incompressible or compressible), prints per-snapshot spectrum fits, and
// summarizes regime label counts at the end.
#include "flowlab/compressible.hpp"
#include "flowlab/incompressible.hpp"
#include "flowlab/spectra.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

using namespace flowlab;

namespace {

void report(double t, const EnergySpectrum& spec, double extra, const char* extra_name) {
    double etot = 0.0;
    for (double e : spec.energy) etot += e;
    double s_mid = 0.0, r2_mid = 0.0, s_low = 0.0, s_lower = 0.0;
    try {
        PowerLawFit f = fit_power_law(spec, 6.0, 14.0);
        s_mid = f.slope;
        r2_mid = f.r2;
    } catch (...) {}
    try {
        s_low = fit_power_law(spec, 2.0, 6.0).slope;
    } catch (...) {}
    try {
        s_lower = fit_power_law(spec, 1.0, 5.0).slope;
    } catch (...) {}
    std::printf("%7.2f  %.4e  %+.3f  %.4f  %+.3f  %+.3f  %s=%.4f\n", t, etot, s_mid, r2_mid,
                s_low, s_lower, extra_name, extra);
    std::fflush(stdout);
}

void summarize(const std::vector<double>& times, const std::vector<EnergySpectrum>& spectra,
               double k_forcing) {
    RegimeConfig rc;
    rc.k_forcing = k_forcing;
    bool never = false;
    auto labels = classify_regime(times, spectra, rc, &never);
    int chaos = 0, turb = 0, disc = 0;
    double first_turb = -1.0;
    for (const auto& l : labels) {
        if (l.regime == Regime::Chaotic) ++chaos;
        else if (l.regime == Regime::Turbulent) {
            ++turb;
            if (first_turb < 0) first_turb = l.t;
        } else ++disc;
    }
    std::printf("# labels: chaotic=%d turbulent=%d discard=%d first_turb_t=%.2f never=%d\n",
                chaos, turb, disc, first_turb, never ? 1 : 0);
}

} // namespace

int main(int argc, char** argv) {
    bool compressible = false;
    int n = 128;
    double nu = 2e-6, dt = 2e-3, t_end = 100.0, stride = 0.5, kf = 20.0, amp = 0.1;
    std::uint64_t seed = 7;

    for (int a = 1; a < argc; ++a) {
        const std::string key = argv[a];
        if (key == "--comp") { compressible = true; continue; }
        if (a + 1 >= argc) break;
        const double v = std::atof(argv[++a]);
        if (key == "--n") n = static_cast<int>(v);
        else if (key == "--nu") nu = v;
        else if (key == "--dt") dt = v;
        else if (key == "--tend") t_end = v;
        else if (key == "--kf") kf = v;
        else if (key == "--amp") amp = v;
        else if (key == "--stride") stride = v;
        else if (key == "--seed") seed = static_cast<std::uint64_t>(v);
    }

    std::printf("# %s n=%d nu=%g dt=%g kf=%g amp=%g tend=%g\n",
                compressible ? "compressible" : "incompressible", n, nu, dt, kf, amp, t_end);
    std::printf("# t  E_total  slope[6,14]  r2  slope[2,6]  slope[1,5]  extra\n");

    std::vector<double> times;
    std::vector<EnergySpectrum> spectra;

    if (!compressible) {
        IncompressibleConfig cfg;
        cfg.n = n;
        cfg.nu = nu;
        cfg.dt = dt;
        cfg.t_end = t_end;
        cfg.snapshot_stride = stride;
        cfg.forcing = ForcingSpec{kf, 1.5, amp, 0};

        IncompressibleState state;
        state.omega_hat = SpectralField(Grid2D(cfg.n, cfg.length));
        Rng rng(derive_seed(seed, "sim:cal"));
        const long long total = static_cast<long long>(t_end / dt);
        const long long stride_steps = std::max(1LL, static_cast<long long>(stride / dt));
        for (long long s = 1; s <= total; ++s) {
            step(state, cfg, rng);
            if (s % stride_steps == 0) {
                SpectralField vxh, vyh;
                velocity_from_vorticity_spectral(state.omega_hat, vxh, vyh);
                EnergySpectrum spec = energy_spectrum_spectral(vxh, vyh);
                report(state.t, spec, state.last_cfl, "cfl");
                times.push_back(state.t);
                spectra.push_back(std::move(spec));
            }
        }
    } else {
        CompressibleConfig cfg;
        cfg.n = n;
        cfg.nu = nu;
        cfg.t_end = t_end;
        cfg.snapshot_stride = stride;
        cfg.forcing = ForcingSpec{kf, 1.5, amp, 0};
        if (dt > 0 && dt < 1.0) cfg.dt = 0.0; // always adaptive here

        CompressibleRunOptions opts;
        opts.on_snapshot = [&](const ConservedState& c, const PrimitiveState& p) {
            EnergySpectrum spec = energy_spectrum(p.vx, p.vy);
            double mean = p.rho.mean();
            double var = 0.0;
            for (double r : p.rho.data) var += (r - mean) * (r - mean);
            const double rho_std = std::sqrt(var / static_cast<double>(p.rho.data.size()));
            report(c.t, spec, rho_std / mean, "rho_cv");
            times.push_back(c.t);
            spectra.push_back(std::move(spec));
        };
        run_compressible(cfg, seed, "cal", opts);
    }

    summarize(times, spectra, kf);
    return 0;
}
