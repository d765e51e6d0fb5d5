#include "flowlab/compressible.hpp"

#include "flowlab/spectra.hpp"

#include <cmath>
#include <filesystem>

namespace flowlab {

void CompressibleConfig::validate() const {
    if (nu < 0.0) throw std::invalid_argument("CompressibleConfig: nu must be non-negative");
    if (cfl <= 0.0 || cfl > 0.5)
        throw std::invalid_argument("CompressibleConfig: cfl must be in (0, 0.5]");
    if (forced) forcing.validate(Grid2D(n, length));
}

double CompressibleConfig::effective_nu(const Grid2D& grid, double dt) const {
    if (!grid_scaled_hyperviscosity) return nu;
    const double dx = grid.dx();
    return nu * dx * dx * dx * dx / dt;
}

RealField deriv4_x(const RealField& f) {
    const int n = f.grid.n;
    const double c = 1.0 / (12.0 * f.grid.dx());
    RealField out(f.grid);
    for (int iy = 0; iy < n; ++iy) {
        const int row = iy * n;
        for (int ix = 0; ix < n; ++ix) {
            const int xm2 = (ix + n - 2) % n, xm1 = (ix + n - 1) % n;
            const int xp1 = (ix + 1) % n, xp2 = (ix + 2) % n;
            out.data[row + ix] = c * (8.0 * (f.data[row + xp1] - f.data[row + xm1]) -
                                      (f.data[row + xp2] - f.data[row + xm2]));
        }
    }
    return out;
}

RealField deriv4_y(const RealField& f) {
    const int n = f.grid.n;
    const double c = 1.0 / (12.0 * f.grid.dx());
    RealField out(f.grid);
    for (int iy = 0; iy < n; ++iy) {
        const int ym2 = ((iy + n - 2) % n) * n, ym1 = ((iy + n - 1) % n) * n;
        const int yp1 = ((iy + 1) % n) * n, yp2 = ((iy + 2) % n) * n;
        const int row = iy * n;
        for (int ix = 0; ix < n; ++ix)
            out.data[row + ix] = c * (8.0 * (f.data[yp1 + ix] - f.data[ym1 + ix]) -
                                      (f.data[yp2 + ix] - f.data[ym2 + ix]));
    }
    return out;
}

RealField laplace5(const RealField& f) {
    const int n = f.grid.n;
    const double c = 1.0 / (f.grid.dx() * f.grid.dx());
    RealField out(f.grid);
    for (int iy = 0; iy < n; ++iy) {
        const int ym1 = ((iy + n - 1) % n) * n, yp1 = ((iy + 1) % n) * n;
        const int row = iy * n;
        for (int ix = 0; ix < n; ++ix) {
            const int xm1 = (ix + n - 1) % n, xp1 = (ix + 1) % n;
            out.data[row + ix] = c * (f.data[row + xm1] + f.data[row + xp1] + f.data[ym1 + ix] +
                                      f.data[yp1 + ix] - 4.0 * f.data[row + ix]);
        }
    }
    return out;
}

void recover_point(double E, double Sx, double Sy, double& rho, double& vx, double& vy) {
    const double s2 = Sx * Sx + Sy * Sy;
    const double disc = 9.0 * E * E - 8.0 * s2;
    if (E <= 0.0 || disc <= 0.0)
        throw std::domain_error("conserved_to_primitives: unphysical state (E=" +
                                std::to_string(E) + ", |S|²=" + std::to_string(s2) + ")");
    const double s = std::sqrt(s2);
    if (s < 1e-14 * E) {
        rho = E;
        vx = 0.0;
        vy = 0.0;
        return;
    }
    const double v = 4.0 * s / (3.0 * E + std::sqrt(disc)); // stable minus branch, v < 1
    rho = 2.0 * E * (1.0 - v * v) / (2.0 + v * v);
    vx = v * Sx / s;
    vy = v * Sy / s;
}

ConservedState primitives_to_conserved(const PrimitiveState& p) {
    const std::size_t m = p.rho.data.size();
    if (p.vx.data.size() != m || p.vy.data.size() != m)
        throw std::invalid_argument("primitives_to_conserved: field size mismatch");

    ConservedState c;
    c.E = RealField(p.rho.grid);
    c.Sx = RealField(p.rho.grid);
    c.Sy = RealField(p.rho.grid);
    for (std::size_t i = 0; i < m; ++i) {
        const double rho = p.rho.data[i];
        const double vx = p.vx.data[i], vy = p.vy.data[i];
        const double v2 = vx * vx + vy * vy;
        if (rho <= 0.0) throw std::domain_error("primitives_to_conserved: rho <= 0");
        if (v2 >= 1.0) throw std::domain_error("primitives_to_conserved: v² >= 1");
        const double g2 = 1.0 / (1.0 - v2);
        c.E.data[i] = 0.5 * rho * (3.0 * g2 - 1.0);
        const double m0 = 1.5 * rho * g2;
        c.Sx.data[i] = m0 * vx;
        c.Sy.data[i] = m0 * vy;
    }
    return c;
}

PrimitiveState conserved_to_primitives(const ConservedState& c) {
    PrimitiveState p;
    p.rho = RealField(c.E.grid);
    p.vx = RealField(c.E.grid);
    p.vy = RealField(c.E.grid);
    const int n = c.E.grid.n;
    for (std::size_t i = 0; i < c.E.data.size(); ++i) {
        try {
            recover_point(c.E.data[i], c.Sx.data[i], c.Sy.data[i], p.rho.data[i], p.vx.data[i],
                          p.vy.data[i]);
        } catch (const std::domain_error& e) {
            const int iy = static_cast<int>(i) / n, ix = static_cast<int>(i) % n;
            throw std::domain_error(std::string(e.what()) + " at cell (" + std::to_string(iy) +
                                    "," + std::to_string(ix) + "), t=" + std::to_string(c.t));
        }
    }
    return p;
}

CompressibleRhs compressible_rhs(const ConservedState& c, double nu_eff, const RealField* fx,
                                 const RealField* fy) {
    const PrimitiveState p = conserved_to_primitives(c);
    const Grid2D& grid = c.E.grid;
    const std::size_t m = grid.size();
    const double nu = nu_eff;

    // momentum fluxes: Fxx = Sx·vx + ρ/2, Fxy = Sx·vy, Fyx = Sy·vx, Fyy = Sy·vy + ρ/2
    RealField fxx(grid), fxy(grid), fyx(grid), fyy(grid);
    for (std::size_t i = 0; i < m; ++i) {
        const double half_rho = 0.5 * p.rho.data[i];
        fxx.data[i] = c.Sx.data[i] * p.vx.data[i] + half_rho;
        fxy.data[i] = c.Sx.data[i] * p.vy.data[i];
        fyx.data[i] = c.Sy.data[i] * p.vx.data[i];
        fyy.data[i] = c.Sy.data[i] * p.vy.data[i] + half_rho;
    }

    const RealField dSx_dx = deriv4_x(c.Sx);
    const RealField dSy_dy = deriv4_y(c.Sy);
    const RealField dfxx_dx = deriv4_x(fxx);
    const RealField dfyx_dy = deriv4_y(fyx);
    const RealField dfxy_dx = deriv4_x(fxy);
    const RealField dfyy_dy = deriv4_y(fyy);

    const RealField hE = laplace5(laplace5(c.E));
    const RealField hSx = laplace5(laplace5(c.Sx));
    const RealField hSy = laplace5(laplace5(c.Sy));

    CompressibleRhs rhs;
    rhs.dE = RealField(grid);
    rhs.dSx = RealField(grid);
    rhs.dSy = RealField(grid);
    for (std::size_t i = 0; i < m; ++i) {
        rhs.dE.data[i] = -(dSx_dx.data[i] + dSy_dy.data[i]) - nu * hE.data[i];
        rhs.dSx.data[i] = -(dfxx_dx.data[i] + dfyx_dy.data[i]) - nu * hSx.data[i];
        rhs.dSy.data[i] = -(dfxy_dx.data[i] + dfyy_dy.data[i]) - nu * hSy.data[i];
        if (fx) rhs.dSx.data[i] += fx->data[i];
        if (fy) rhs.dSy.data[i] += fy->data[i];
    }
    return rhs;
}

double max_speed(const ConservedState& c) {
    double vmax = 0.0;
    for (std::size_t i = 0; i < c.E.data.size(); ++i) {
        double rho, vx, vy;
        recover_point(c.E.data[i], c.Sx.data[i], c.Sy.data[i], rho, vx, vy);
        vmax = std::max(vmax, vx * vx + vy * vy);
    }
    return std::sqrt(vmax);
}

namespace {

void axpy_state(ConservedState& out, double a, const ConservedState& u, double b,
                const ConservedState& v, double c_dt, const CompressibleRhs& rhs) {
    const std::size_t m = u.E.data.size();
    for (std::size_t i = 0; i < m; ++i) {
        out.E.data[i] = a * u.E.data[i] + b * (v.E.data[i] + c_dt * rhs.dE.data[i]);
        out.Sx.data[i] = a * u.Sx.data[i] + b * (v.Sx.data[i] + c_dt * rhs.dSx.data[i]);
        out.Sy.data[i] = a * u.Sy.data[i] + b * (v.Sy.data[i] + c_dt * rhs.dSy.data[i]);
    }
}

} // namespace

void step_rk3(ConservedState& c, const CompressibleConfig& config, Rng& rng, double dt) {
    const Grid2D& grid = c.E.grid;
    const double limit = config.cfl * grid.dx() / (max_speed(c) + 1.0);
    if (dt > limit * (1.0 + 1e-12))
        throw std::runtime_error("step_rk3: dt=" + std::to_string(dt) +
                                 " violates the CFL precondition (limit " + std::to_string(limit) +
                                 ") at t=" + std::to_string(c.t));

    const RealField* fx = nullptr;
    const RealField* fy = nullptr;
    ForcingFields forcing;
    if (config.forced) {
        forcing = make_forcing(config.forcing, grid, rng);
        fx = &forcing.fx;
        fy = &forcing.fy;
    }

    ConservedState u1{RealField(grid), RealField(grid), RealField(grid), c.t};
    ConservedState u2{RealField(grid), RealField(grid), RealField(grid), c.t};

    const double nu_eff = config.effective_nu(grid, dt);
    const CompressibleRhs k1 = compressible_rhs(c, nu_eff, fx, fy);
    axpy_state(u1, 0.0, c, 1.0, c, dt, k1);
    const CompressibleRhs k2 = compressible_rhs(u1, nu_eff, fx, fy);
    axpy_state(u2, 0.75, c, 0.25, u1, dt, k2);
    const CompressibleRhs k3 = compressible_rhs(u2, nu_eff, fx, fy);
    axpy_state(c, 1.0 / 3.0, c, 2.0 / 3.0, u2, dt, k3);
    c.t += dt;

    for (std::size_t i = 0; i < c.E.data.size(); ++i)
        if (!std::isfinite(c.E.data[i]) || !std::isfinite(c.Sx.data[i]) ||
            !std::isfinite(c.Sy.data[i]))
            throw std::runtime_error("step_rk3: NaN/Inf at t=" + std::to_string(c.t));
}

CompressibleRunResult run_compressible(const CompressibleConfig& config, std::uint64_t master_seed,
                                       const std::string& sim_id,
                                       const CompressibleRunOptions& output) {
    config.validate();
    const Grid2D grid(config.n, config.length);
    Rng rng(derive_seed(master_seed, "sim:" + sim_id));

    ConservedState c{RealField(grid, 1.0), RealField(grid), RealField(grid), 0.0};

    if (!output.out_dir.empty()) std::filesystem::create_directories(output.out_dir);

    CompressibleRunResult result;
    long long step_index = 0;
    double next_snapshot = 0.0;

    auto emit_snapshot = [&]() {
        const PrimitiveState p = conserved_to_primitives(c);
        RealField omega(grid);
        {
            const RealField a = deriv4_x(p.vy);
            const RealField b = deriv4_y(p.vx);
            for (std::size_t i = 0; i < omega.data.size(); ++i)
                omega.data[i] = a.data[i] - b.data[i];
        }

        CompressibleSnapshot rec;
        rec.t = c.t;
        rec.spectrum = energy_spectrum(p.vx, p.vy).energy;
        rec.rho_mean = p.rho.mean();
        double var = 0.0;
        for (double v : p.rho.data) var += (v - rec.rho_mean) * (v - rec.rho_mean);
        rec.rho_std = std::sqrt(var / static_cast<double>(p.rho.data.size()));

        if (!output.out_dir.empty()) {
            nlohmann::json meta;
            meta["t"] = c.t;
            meta["sim_id"] = sim_id;
            meta["dynamics"] = "compressible";
            meta["nu"] = config.nu;
            meta["grid_scaled_hyperviscosity"] = config.grid_scaled_hyperviscosity;
            meta["k_forcing"] = config.forcing.k_center;
            meta["forcing_amplitude"] = config.forcing.amplitude;
            meta["step"] = step_index;
            char name[64];
            std::snprintf(name, sizeof(name), "omega_%06lld.f1", step_index);
            rec.omega_path = output.out_dir + "/" + name;
            write_field(rec.omega_path, omega, meta);
            if (output.write_primitives) {
                std::snprintf(name, sizeof(name), "rho_%06lld.f1", step_index);
                write_field(output.out_dir + "/" + name, p.rho, meta);
                std::snprintf(name, sizeof(name), "vx_%06lld.f1", step_index);
                write_field(output.out_dir + "/" + name, p.vx, meta);
                std::snprintf(name, sizeof(name), "vy_%06lld.f1", step_index);
                write_field(output.out_dir + "/" + name, p.vy, meta);
            }
        }
        if (output.on_snapshot) output.on_snapshot(c, p);
        result.snapshots.push_back(std::move(rec));
        next_snapshot += config.snapshot_stride;
    };

    emit_snapshot();
    while (c.t < config.t_end - 1e-12) {
        double dt = config.dt > 0.0 ? config.dt
                                    : config.cfl * grid.dx() / (max_speed(c) + 1.0);
        if (config.dt <= 0.0) {
            dt = std::min(dt, config.t_end - c.t);
            // adaptive runs land exactly on snapshot times
            if (c.t + dt > next_snapshot - 1e-12 && c.t < next_snapshot - 1e-12)
                dt = next_snapshot - c.t;
        }
        step_rk3(c, config, rng, dt);
        ++step_index;
        if (c.t >= next_snapshot - 1e-12 || c.t >= config.t_end - 1e-12) emit_snapshot();
    }
    return result;
}

} // namespace flowlab
