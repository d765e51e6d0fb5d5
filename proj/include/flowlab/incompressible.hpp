#pragma once

#include "flowlab/field_io.hpp"
#include "flowlab/forcing.hpp"

#include <functional>
#include <optional>

namespace flowlab {

/// 2D vorticity equation with order-4 hyperviscosity (p=2) and random
/// forcing:  ∂t ω = −ν ∇⁴ω − (v·∇)ω + f_ω.
/// Linear term advanced by Crank–Nicolson, nonlinear term by AB2
/// (explicit Euler on the first step), forcing added per step.
struct IncompressibleConfig {
    int n = 128;
    double length = kTwoPi;
    double nu = 1e-5;      // hyperviscosity, units length⁴/time
    int p = 2;             // hyperviscosity order, fixed
    double alpha = 0.0;    // linear friction, carried for symbol completeness; fixed 0
    double dt = 2e-3;
    double t_end = 60.0;
    double snapshot_stride = 0.1;
    bool forced = true;
    ForcingSpec forcing;
    double cfl_limit = 0.5;

    void validate() const;
};

struct IncompressibleState {
    SpectralField omega_hat;
    double t = 0.0;
    // AB2 history: advection term of the previous step.
    std::optional<SpectralField> prev_nonlinear;
    // Advective CFL number dt·max|v|/dx observed in the latest step.
    double last_cfl = 0.0;
};

/// Streamfunction inversion: ψ̂ = −ω̂/|k|² (ψ̂₀ = 0), v = (−∂yψ, ∂xψ),
/// so that ε_ij ∂i v_j = ∇²ψ = ω. Rejects fields with nonzero mean vorticity.
void velocity_from_vorticity(const SpectralField& omega_hat, RealField& vx, RealField& vy);

/// Spectral form of the same inversion.
void velocity_from_vorticity_spectral(const SpectralField& omega_hat, SpectralField& vx_hat,
                                      SpectralField& vy_hat);

/// Pseudo-spectral (v·∇)ω: velocities and vorticity gradient to sample space,
/// pointwise product, forward transform, dealias.
SpectralField nonlinear_term(const SpectralField& omega_hat);

/// One time step. Aborts with a diagnostic on NaN/Inf.
void step(IncompressibleState& state, const IncompressibleConfig& config, Rng& rng);

struct SnapshotRecord {
    double t = 0.0;
    std::string omega_path;                 // empty when snapshots are kept in memory only
    std::vector<double> spectrum;           // shell energy spectrum E(k), k = shell index
};

struct RunResult {
    std::vector<SnapshotRecord> snapshots;
    double max_cfl = 0.0;
};

struct RunOutputOptions {
    std::string out_dir;        // empty: snapshots not written to disk
    bool write_velocity = false;
    std::function<void(const IncompressibleState&, const RealField& omega)> on_snapshot;
};

/// Advances from ω=0 (v = (0,0) initial condition) to t_end, writing FLOW1
/// snapshots and per-snapshot shell spectra. CFL is monitored every step;
/// a violation aborts the run with a diagnostic snapshot.
RunResult run_simulation(const IncompressibleConfig& config, std::uint64_t master_seed,
                         const std::string& sim_id, const RunOutputOptions& output);

} // namespace flowlab
