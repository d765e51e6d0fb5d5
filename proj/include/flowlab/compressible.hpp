#pragma once

#include "flowlab/field_io.hpp"
#include "flowlab/forcing.hpp"

#include <functional>

namespace flowlab {

/// Weakly compressible (2+1)-d conformal fluid, evolved in conservative form
///   ∂t E  + ∂i Si                      = −ν ∇⁴E
///   ∂t Si + ∂j (Sj vi + (ρ/2) δij)     = −ν ∇⁴Si + fi
/// with E = T⁰⁰ = (ρ/2)(3γ²−1) and Si = (3/2)ργ²vi (c = 1 units).
/// Space: 4th-order centered differences, ∇⁴ as the squared 5-point
/// Laplacian. Time: SSP-RK3 with forcing frozen across substages.
struct CompressibleConfig {
    int n = 128;
    double length = kTwoPi;
    double nu = 0.03;  // hyperviscosity; see grid_scaled_hyperviscosity
    // When true, nu is a Kreiss-Oliger-style dissipation coefficient: the
    // operator is −(nu·dx⁴/dt)·∇⁴, giving a dt-independent damping factor
    // per step (stable for RK3 when nu < 0.039) and making the 0.01..0.05
    // range usable at any resolution. When false, nu carries units
    // length⁴/time and multiplies ∇⁴ directly.
    bool grid_scaled_hyperviscosity = true;
    double dt = 0.0;  // fixed step when > 0, else adaptive from cfl
    double cfl = 0.4;
    double t_end = 40.0;
    double snapshot_stride = 0.25;
    bool forced = true;
    ForcingSpec forcing;

    void validate() const;
    double effective_nu(const Grid2D& grid, double dt) const;
};

struct PrimitiveState {
    RealField rho, vx, vy;
};

struct ConservedState {
    RealField E, Sx, Sy;
    double t = 0.0;
};

/// E = (ρ/2)(3γ²−1), Si = (3/2)ργ²vi. Rejects v² ≥ 1 or ρ ≤ 0.
ConservedState primitives_to_conserved(const PrimitiveState& p);

/// Exact closed-form inverse. With s = |S|:  |v| = 4s/(3E + √(9E²−8s²))
/// (the stable minus-branch form), direction S/s, ρ = 2E(1−v²)/(2+v²).
/// Aborts with a location diagnostic on unphysical states (9E² ≤ 8s²).
PrimitiveState conserved_to_primitives(const ConservedState& c);

/// Pointwise scalar recovery, shared by the field version and tests.
void recover_point(double E, double Sx, double Sy, double& rho, double& vx, double& vy);

struct CompressibleRhs {
    RealField dE, dSx, dSy;
};

/// Time derivative of the conserved fields with an explicit hyperviscosity
/// coefficient (units length⁴/time). `fx`, `fy` may be null for unforced
/// evaluation.
CompressibleRhs compressible_rhs(const ConservedState& c, double nu_eff, const RealField* fx,
                                 const RealField* fy);

/// One SSP-RK3 step of size dt. Checks the advective CFL precondition
/// dt ≤ cfl·dx/(max|v|+1) and aborts on NaN/Inf or recovery failure.
void step_rk3(ConservedState& c, const CompressibleConfig& config, Rng& rng, double dt);

/// Max |v| over the grid of the recovered primitive state.
double max_speed(const ConservedState& c);

struct CompressibleSnapshot {
    double t = 0.0;
    std::string omega_path; // vorticity of the recovered velocity
    std::vector<double> spectrum;
    double rho_mean = 0.0;
    double rho_std = 0.0;
};

struct CompressibleRunResult {
    std::vector<CompressibleSnapshot> snapshots;
};

struct CompressibleRunOptions {
    std::string out_dir;
    bool write_primitives = false; // also write rho/vx/vy snapshots
    std::function<void(const ConservedState&, const PrimitiveState&)> on_snapshot;
};

/// Runs from the rest state (ρ, v) = (1, 0), writing FLOW1 snapshots of the
/// derived vorticity (and optionally ρ, vx, vy) plus per-snapshot spectra.
CompressibleRunResult run_compressible(const CompressibleConfig& config, std::uint64_t master_seed,
                                       const std::string& sim_id,
                                       const CompressibleRunOptions& output);

/// 4th-order centered first derivatives and 2nd-order 5-point Laplacian on
/// periodic fields; exposed for the stencil oracles in the test suite.
RealField deriv4_x(const RealField& f);
RealField deriv4_y(const RealField& f);
RealField laplace5(const RealField& f);

} // namespace flowlab
