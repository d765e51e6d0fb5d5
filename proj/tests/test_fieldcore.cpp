#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowlab/fft.hpp"
#include "flowlab/field_io.hpp"
#include "flowlab/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace flowlab;

namespace {

RealField random_field(const Grid2D& g, std::uint64_t seed) {
    Rng rng(seed);
    RealField f(g);
    for (double& v : f.data) v = rng.normal();
    return f;
}

// Random field restricted to |k| <= k_cut. The 8th-order stencil truncation
// error scales like k·(k·dx)⁸, so the oracle comparison needs smooth data.
RealField band_limited_field(const Grid2D& g, std::uint64_t seed, double k_cut) {
    RealField f = random_field(g, seed);
    SpectralField F = transform_forward(f);
    const WaveNumbers wn(g);
    for (int iky = 0; iky < g.n; ++iky)
        for (int ikx = 0; ikx < g.half(); ++ikx)
            if (wn.k_mag(iky, ikx) / wn.unit() > k_cut) F.at(iky, ikx) = 0.0;
    return transform_inverse(F);
}

// O(n⁴) direct DFT of a single coefficient, the independent oracle for
// Parseval and coefficient checks.
std::complex<double> direct_dft_coeff(const RealField& f, int kx, int ky) {
    const int n = f.grid.n;
    std::complex<double> acc = 0.0;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            const double phase =
                -kTwoPi * (static_cast<double>(kx) * ix + static_cast<double>(ky) * iy) / n;
            acc += f.at(iy, ix) * std::complex<double>(std::cos(phase), std::sin(phase));
        }
    return acc;
}

} // namespace

TEST_CASE("forward transform: DC mode of constant field") {
    const Grid2D g(32);
    RealField f(g, 2.75);
    SpectralField F = transform_forward(f);
    CHECK(F.at(0, 0).real() == doctest::Approx(2.75 * g.size()).epsilon(1e-14));
    CHECK(std::abs(F.at(0, 0).imag()) < 1e-9);
    double off = 0.0;
    for (int iky = 0; iky < g.n; ++iky)
        for (int ikx = 0; ikx < g.half(); ++ikx)
            if (iky != 0 || ikx != 0) off = std::max(off, std::abs(F.at(iky, ikx)));
    CHECK(off < 1e-9 * g.size());
}

TEST_CASE("forward transform: sin(x) occupies exactly the (±1,0) modes") {
    const Grid2D g(64);
    RealField f(g);
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) f.at(iy, ix) = std::sin(ix * g.dx());
    SpectralField F = transform_forward(f);

    // sin(x) = (e^{ix} − e^{−ix}) / 2i: the stored half-plane holds kx=+1 with
    // coefficient −i·n²/2; the kx=−1 partner is implied by Hermitian symmetry.
    CHECK(std::abs(F.at(0, 1) - std::complex<double>(0.0, -0.5 * g.size())) < 1e-6);
    double rest = 0.0;
    for (int iky = 0; iky < g.n; ++iky)
        for (int ikx = 0; ikx < g.half(); ++ikx)
            if (!(iky == 0 && ikx == 1)) rest = std::max(rest, std::abs(F.at(iky, ikx)));
    CHECK(rest < 1e-7);
}

TEST_CASE("round trip and Parseval on random fields (direct-summation oracle)") {
    const Grid2D g(32);
    const RealField f = random_field(g, 42);
    SpectralField F = transform_forward(f);

    RealField back = transform_inverse(F);
    double err = 0.0;
    const double scale = f.max_abs();
    for (std::size_t i = 0; i < f.data.size(); ++i)
        err = std::max(err, std::abs(back.data[i] - f.data[i]));
    CHECK(err / scale < 1e-12);

    // Parseval under the declared normalization: Σₓ f² = (1/n²) Σ_k |f̂|²
    double sum_x = 0.0;
    for (double v : f.data) sum_x += v * v;
    const double sum_k = spectral_sum_sq(F) / g.size();
    CHECK(std::abs(sum_x - sum_k) / sum_x < 1e-12);

    for (auto [kx, ky] : {std::pair{0, 0}, {1, 0}, {3, 5}, {7, 31}, {16, 16}}) {
        const std::complex<double> want = direct_dft_coeff(f, kx, ky);
        const std::complex<double> got = F.at(ky, kx);
        CHECK(std::abs(want - got) < 1e-9 * g.size());
    }
}

TEST_CASE("inverse transform edge cases") {
    const Grid2D g(16);
    SpectralField F(g);
    RealField zero = transform_inverse(F);
    CHECK(zero.max_abs() == 0.0);

    F.at(0, 0) = 3.25 * g.size();
    RealField c = transform_inverse(F);
    for (double v : c.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-14));

    SUBCASE("forward(inverse(F)) = F") {
        SpectralField H = transform_forward(random_field(g, 7));
        SpectralField H2 = transform_forward(transform_inverse(H));
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < H.coeffs.size(); ++i) {
            err = std::max(err, std::abs(H.coeffs[i] - H2.coeffs[i]));
            scale = std::max(scale, std::abs(H.coeffs[i]));
        }
        CHECK(err / scale < 1e-12);
    }
}

TEST_CASE("transform rejects bad input") {
    const Grid2D g(16);
    RealField f(g);
    f.data[5] = std::nan("");
    CHECK_THROWS_AS(transform_forward(f), std::invalid_argument);

    SpectralField F(g);
    F.at(0, 0) = {1.0, 1.0}; // self-conjugate mode with an imaginary part
    CHECK_THROWS_AS(transform_inverse(F), std::invalid_argument);
}

TEST_CASE("spectral derivative: trivial single modes") {
    const Grid2D g(64);
    RealField f(g);
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) f.at(iy, ix) = std::sin(ix * g.dx());

    RealField dfdx = transform_inverse(spectral_derivative(transform_forward(f), Axis::X, 1));
    double err = 0.0;
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
            err = std::max(err, std::abs(dfdx.at(iy, ix) - std::cos(ix * g.dx())));
    CHECK(err < 1e-10);

    RealField ss(g);
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
            ss.at(iy, ix) = std::sin(ix * g.dx()) * std::sin(iy * g.dx());
    // |k|⁴ amplifies the rounding noise of the sampled input by ~4e6, so the
    // bound is looser than for the first derivative
    RealField bih = transform_inverse(spectral_biharmonic(transform_forward(ss)));
    err = 0.0;
    for (std::size_t i = 0; i < ss.data.size(); ++i)
        err = std::max(err, std::abs(bih.data[i] - 4.0 * ss.data[i]));
    CHECK(err < 1e-9);
}

TEST_CASE("spectral derivative matches 8th-order finite differences") {
    const Grid2D g(64);
    const RealField f = band_limited_field(g, 99, 3.5);
    const RealField dfdx = transform_inverse(spectral_derivative(transform_forward(f), Axis::X, 1));
    const RealField dfdy = transform_inverse(spectral_derivative(transform_forward(f), Axis::Y, 1));

    // 8th-order centered stencil coefficients (4/5, −1/5, 4/105, −1/280)
    const double c1 = 4.0 / 5.0, c2 = -1.0 / 5.0, c3 = 4.0 / 105.0, c4 = -1.0 / 280.0;
    const int n = g.n;
    double err = 0.0;
    const double scale = std::max(dfdx.max_abs(), 1.0);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            auto fx = [&](int o) { return f.at(iy, (ix + o + 8 * n) % n); };
            auto fy = [&](int o) { return f.at((iy + o + 8 * n) % n, ix); };
            const double fd_x = (c1 * (fx(1) - fx(-1)) + c2 * (fx(2) - fx(-2)) +
                                 c3 * (fx(3) - fx(-3)) + c4 * (fx(4) - fx(-4))) / g.dx();
            const double fd_y = (c1 * (fy(1) - fy(-1)) + c2 * (fy(2) - fy(-2)) +
                                 c3 * (fy(3) - fy(-3)) + c4 * (fy(4) - fy(-4))) / g.dx();
            err = std::max(err, std::abs(fd_x - dfdx.at(iy, ix)));
            err = std::max(err, std::abs(fd_y - dfdy.at(iy, ix)));
        }
    }
    CHECK(err / scale < 1e-6);
}

TEST_CASE("spectral derivative is linear") {
    const Grid2D g(32);
    SpectralField A = transform_forward(random_field(g, 1));
    SpectralField B = transform_forward(random_field(g, 2));
    SpectralField sum(g);
    for (std::size_t i = 0; i < sum.coeffs.size(); ++i)
        sum.coeffs[i] = 2.0 * A.coeffs[i] - 3.0 * B.coeffs[i];

    SpectralField d_sum = spectral_derivative(sum, Axis::Y, 1);
    SpectralField dA = spectral_derivative(A, Axis::Y, 1);
    SpectralField dB = spectral_derivative(B, Axis::Y, 1);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < sum.coeffs.size(); ++i) {
        err = std::max(err, std::abs(d_sum.coeffs[i] - (2.0 * dA.coeffs[i] - 3.0 * dB.coeffs[i])));
        scale = std::max(scale, std::abs(d_sum.coeffs[i]));
    }
    CHECK(err <= 1e-12 * std::max(scale, 1.0));

    CHECK_THROWS_AS(spectral_derivative(A, Axis::X, 3), std::invalid_argument);
}

TEST_CASE("dealias: projection behaviour") {
    const Grid2D g(96); // cutoff falls exactly on shell 32
    SpectralField F(g);
    const int kmax = g.n / 2;

    const int k_out = static_cast<int>(0.9 * kmax);
    F.at(0, k_out) = {1.0, 0.0};
    F.at(3, 0) = {2.0, -1.0};
    F.at(g.n - 3, 0) = std::conj(F.at(3, 0));

    SpectralField D = dealias(F);
    CHECK(std::abs(D.at(0, k_out)) == 0.0);
    CHECK(D.at(3, 0) == F.at(3, 0));

    CHECK(mode_kept_by_dealias(g, 0, 32));
    CHECK_FALSE(mode_kept_by_dealias(g, 0, 33));

    SUBCASE("idempotence, exact") {
        SpectralField R = transform_forward(random_field(g, 5));
        SpectralField once = dealias(R);
        SpectralField twice = dealias(once);
        for (std::size_t i = 0; i < once.coeffs.size(); ++i)
            CHECK(once.coeffs[i] == twice.coeffs[i]);
    }
    SUBCASE("energy non-increasing") {
        SpectralField R = transform_forward(random_field(g, 6));
        CHECK(spectral_sum_sq(dealias(R)) <= spectral_sum_sq(R));
    }
}

TEST_CASE("FLOW1 file round trip") {
    const Grid2D g(64);
    const RealField f = random_field(g, 1234);
    const std::string path = "test_field_roundtrip.f1";

    nlohmann::json meta;
    meta["time"] = 3.5;
    meta["k_forcing"] = 15;
    meta["regime"] = "turbulent";
    write_field(path, f, meta);

    LoadedField lf = read_field(path);
    CHECK(lf.field.grid.n == g.n);
    CHECK(lf.field.grid.length == g.length);
    bool identical = true;
    for (std::size_t i = 0; i < f.data.size(); ++i)
        if (lf.field.data[i] != f.data[i]) identical = false;
    CHECK(identical); // bit exact
    CHECK(lf.meta["time"] == 3.5);
    CHECK(lf.meta["k_forcing"] == 15);
    CHECK(lf.meta["regime"] == "turbulent");

    SUBCASE("truncated payload is rejected") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 17);
        CHECK_THROWS(read_field(path));
    }
    SUBCASE("bad magic is rejected") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOPE!\n{}\n";
        out.close();
        CHECK_THROWS(read_field(path));
    }
    std::remove(path.c_str());
}

TEST_CASE("hermitian enforcement and violation measure") {
    const Grid2D g(16);
    Rng rng(3);
    SpectralField F(g);
    for (auto& c : F.coeffs) c = {rng.normal(), rng.normal()};
    CHECK(hermitian_violation(F) > 1e-3);
    hermitian_enforce(F);
    CHECK(hermitian_violation(F) < 1e-15);
    CHECK_NOTHROW(transform_inverse(F));
}
