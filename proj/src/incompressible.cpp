#include "flowlab/incompressible.hpp"

#include "flowlab/spectra.hpp"

#include <cmath>
#include <filesystem>

namespace flowlab {

void IncompressibleConfig::validate() const {
    if (nu < 0.0) throw std::invalid_argument("IncompressibleConfig: nu must be non-negative");
    if (dt <= 0.0) throw std::invalid_argument("IncompressibleConfig: dt must be positive");
    if (p != 2) throw std::invalid_argument("IncompressibleConfig: hyperviscosity order is fixed at p=2");
    if (alpha != 0.0) throw std::invalid_argument("IncompressibleConfig: friction is fixed at alpha=0");
    if (forced) forcing.validate(Grid2D(n, length));
}

void velocity_from_vorticity_spectral(const SpectralField& omega_hat, SpectralField& vx_hat,
                                      SpectralField& vy_hat) {
    const Grid2D& grid = omega_hat.grid;
    const int n = grid.n;
    const int half = grid.half();
    const WaveNumbers wn(grid);

    double max_coeff = 0.0;
    for (const auto& c : omega_hat.coeffs) max_coeff = std::max(max_coeff, std::abs(c));
    if (std::abs(omega_hat.at(0, 0)) > 1e-12 * std::max(1.0, max_coeff))
        throw std::invalid_argument(
            "velocity_from_vorticity: nonzero mean vorticity is incompatible with periodic inversion");

    // ψ̂ = −ω̂/|k|² ;  v = (−∂y ψ, ∂x ψ)  ⇒  v̂x = i·ky·ω̂/|k|², v̂y = −i·kx·ω̂/|k|²
    vx_hat = SpectralField(grid);
    vy_hat = SpectralField(grid);
    for (int iky = 0; iky < n; ++iky) {
        for (int ikx = 0; ikx < half; ++ikx) {
            const double k2 = wn.k2(iky, ikx);
            if (k2 == 0.0) continue;
            const std::complex<double> psi = -omega_hat.at(iky, ikx) / k2;
            const double kx = (ikx == n / 2) ? 0.0 : wn.kx(ikx); // Nyquist-safe first derivative
            const double ky = (iky == n / 2) ? 0.0 : wn.ky(iky);
            vx_hat.at(iky, ikx) = -std::complex<double>(0.0, ky) * psi;
            vy_hat.at(iky, ikx) = std::complex<double>(0.0, kx) * psi;
        }
    }
}

void velocity_from_vorticity(const SpectralField& omega_hat, RealField& vx, RealField& vy) {
    SpectralField vx_hat, vy_hat;
    velocity_from_vorticity_spectral(omega_hat, vx_hat, vy_hat);
    vx = transform_inverse(vx_hat);
    vy = transform_inverse(vy_hat);
}

namespace {

SpectralField nonlinear_term_impl(const SpectralField& omega_hat, double* vmax_out) {
    SpectralField vx_hat, vy_hat;
    velocity_from_vorticity_spectral(omega_hat, vx_hat, vy_hat);

    const RealField vx = transform_inverse(vx_hat);
    const RealField vy = transform_inverse(vy_hat);
    const RealField wx = transform_inverse(spectral_derivative(omega_hat, Axis::X, 1));
    const RealField wy = transform_inverse(spectral_derivative(omega_hat, Axis::Y, 1));

    if (vmax_out) {
        double vmax = 0.0;
        for (std::size_t i = 0; i < vx.data.size(); ++i) {
            const double v2 = vx.data[i] * vx.data[i] + vy.data[i] * vy.data[i];
            vmax = std::max(vmax, v2);
        }
        *vmax_out = std::sqrt(vmax);
    }

    RealField prod(omega_hat.grid);
    for (std::size_t i = 0; i < prod.data.size(); ++i)
        prod.data[i] = vx.data[i] * wx.data[i] + vy.data[i] * wy.data[i];

    SpectralField out = transform_forward(prod);
    dealias_inplace(out);
    return out;
}

} // namespace

SpectralField nonlinear_term(const SpectralField& omega_hat) {
    return nonlinear_term_impl(omega_hat, nullptr);
}

void step(IncompressibleState& state, const IncompressibleConfig& config, Rng& rng) {
    const Grid2D& grid = state.omega_hat.grid;
    const int n = grid.n;
    const int half = grid.half();
    const WaveNumbers wn(grid);
    const double dt = config.dt;

    // Explicit tendency: advection (AB2) plus per-step forcing (Euler).
    double vmax = 0.0;
    SpectralField nonlin = nonlinear_term_impl(state.omega_hat, &vmax);
    state.last_cfl = dt * vmax / grid.dx();

    SpectralField explicit_part(grid);
    if (state.prev_nonlinear) {
        for (std::size_t i = 0; i < explicit_part.coeffs.size(); ++i)
            explicit_part.coeffs[i] =
                -1.5 * nonlin.coeffs[i] + 0.5 * state.prev_nonlinear->coeffs[i];
    } else {
        for (std::size_t i = 0; i < explicit_part.coeffs.size(); ++i)
            explicit_part.coeffs[i] = -nonlin.coeffs[i];
    }
    if (config.forced) {
        ForcingSpectral f = make_forcing_spectral(config.forcing, grid, rng);
        for (std::size_t i = 0; i < explicit_part.coeffs.size(); ++i)
            explicit_part.coeffs[i] += f.f_omega_hat.coeffs[i];
    }

    // Crank–Nicolson on −ν|k|⁴ω̂.
    for (int iky = 0; iky < n; ++iky) {
        for (int ikx = 0; ikx < half; ++ikx) {
            const double z = config.nu * wn.k4(iky, ikx) * dt;
            auto& w = state.omega_hat.at(iky, ikx);
            w = ((1.0 - 0.5 * z) * w + dt * explicit_part.at(iky, ikx)) / (1.0 + 0.5 * z);
        }
    }
    dealias_inplace(state.omega_hat);
    state.omega_hat.at(0, 0) = 0.0; // mean vorticity is exactly conserved at 0
    state.prev_nonlinear = std::move(nonlin);
    state.t += dt;

    for (const auto& c : state.omega_hat.coeffs)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw std::runtime_error("incompressible step: NaN/Inf at t=" + std::to_string(state.t));
}

RunResult run_simulation(const IncompressibleConfig& config, std::uint64_t master_seed,
                         const std::string& sim_id, const RunOutputOptions& output) {
    config.validate();
    const Grid2D grid(config.n, config.length);
    Rng rng(derive_seed(master_seed, "sim:" + sim_id));

    IncompressibleState state;
    state.omega_hat = SpectralField(grid); // v = (0,0) initial condition

    if (!output.out_dir.empty()) std::filesystem::create_directories(output.out_dir);

    RunResult result;
    const long long total_steps = static_cast<long long>(std::ceil(config.t_end / config.dt - 1e-9));
    const long long stride_steps =
        std::max<long long>(1, static_cast<long long>(std::llround(config.snapshot_stride / config.dt)));

    auto emit_snapshot = [&](long long step_index) {
        SpectralField vx_hat, vy_hat;
        velocity_from_vorticity_spectral(state.omega_hat, vx_hat, vy_hat);
        RealField omega = transform_inverse(state.omega_hat);

        SnapshotRecord rec;
        rec.t = state.t;
        rec.spectrum = energy_spectrum_spectral(vx_hat, vy_hat).energy;

        if (!output.out_dir.empty()) {
            nlohmann::json meta;
            meta["t"] = state.t;
            meta["sim_id"] = sim_id;
            meta["dynamics"] = "incompressible";
            meta["nu"] = config.nu;
            meta["k_forcing"] = config.forcing.k_center;
            meta["forcing_amplitude"] = config.forcing.amplitude;
            meta["dt"] = config.dt;
            meta["step"] = step_index;
            char name[64];
            std::snprintf(name, sizeof(name), "omega_%06lld.f1", step_index);
            rec.omega_path = output.out_dir + "/" + name;
            write_field(rec.omega_path, omega, meta);
            if (output.write_velocity) {
                std::snprintf(name, sizeof(name), "vx_%06lld.f1", step_index);
                write_field(output.out_dir + "/" + name, transform_inverse(vx_hat), meta);
                std::snprintf(name, sizeof(name), "vy_%06lld.f1", step_index);
                write_field(output.out_dir + "/" + name, transform_inverse(vy_hat), meta);
            }
        }
        if (output.on_snapshot) output.on_snapshot(state, omega);
        result.snapshots.push_back(std::move(rec));
    };

    emit_snapshot(0);
    for (long long s = 1; s <= total_steps; ++s) {
        step(state, config, rng);

        result.max_cfl = std::max(result.max_cfl, state.last_cfl);
        if (state.last_cfl > config.cfl_limit) {
            if (!output.out_dir.empty()) {
                nlohmann::json meta{
                    {"t", state.t}, {"cfl", state.last_cfl}, {"diagnostic", "cfl_violation"}};
                write_field(output.out_dir + "/diagnostic_cfl.f1",
                            transform_inverse(state.omega_hat), meta);
            }
            throw std::runtime_error("incompressible run " + sim_id + ": CFL " +
                                     std::to_string(state.last_cfl) + " exceeds limit at t=" +
                                     std::to_string(state.t));
        }
        if (s % stride_steps == 0 || s == total_steps) emit_snapshot(s);
    }
    return result;
}

} // namespace flowlab
