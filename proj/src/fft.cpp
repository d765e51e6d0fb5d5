#include "flowlab/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace flowlab {

namespace {

// FFTW planning is not thread-safe; execution on distinct arrays is.
// Plans are created once per grid size with FFTW_ESTIMATE | FFTW_UNALIGNED:
// ESTIMATE keeps the algorithm choice deterministic across runs, UNALIGNED
// lets us execute on std::vector storage.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan forward(int n) { return entry(n).fwd; }
    fftw_plan inverse(int n) { return entry(n).inv; }

private:
    struct Plans {
        fftw_plan fwd = nullptr;
        fftw_plan inv = nullptr;
    };

    Plans& entry(int n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;

        std::vector<double> real(static_cast<std::size_t>(n) * n);
        std::vector<fftw_complex> cplx(static_cast<std::size_t>(n) * (n / 2 + 1));
        Plans p;
        p.fwd = fftw_plan_dft_r2c_2d(n, n, real.data(), cplx.data(),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
        p.inv = fftw_plan_dft_c2r_2d(n, n, cplx.data(), real.data(),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
        return plans_.emplace(n, p).first->second;
    }

    std::mutex mutex_;
    std::map<int, Plans> plans_;
};

} // namespace

SpectralField transform_forward(const RealField& f) {
    if (!f.finite()) throw std::invalid_argument("transform_forward: non-finite input field");
    if (f.data.size() != f.grid.size())
        throw std::invalid_argument("transform_forward: data length does not match grid");

    SpectralField F(f.grid);
    std::vector<double> scratch(f.data);
    fftw_execute_dft_r2c(PlanCache::instance().forward(f.grid.n), scratch.data(),
                         reinterpret_cast<fftw_complex*>(F.coeffs.data()));
    return F;
}

RealField transform_inverse(const SpectralField& F) {
    const double viol = hermitian_violation(F);
    if (viol > 1e-8)
        throw std::invalid_argument("transform_inverse: Hermitian symmetry violated (relative " +
                                    std::to_string(viol) + ")");

    RealField f(F.grid);
    // c2r destroys its input; transform a copy.
    std::vector<std::complex<double>> scratch(F.coeffs);
    fftw_execute_dft_c2r(PlanCache::instance().inverse(F.grid.n),
                         reinterpret_cast<fftw_complex*>(scratch.data()), f.data.data());
    const double norm = 1.0 / static_cast<double>(F.grid.size());
    for (double& v : f.data) v *= norm;
    return f;
}

SpectralField spectral_derivative(const SpectralField& F, Axis axis, int order) {
    if (order != 1 && order != 2)
        throw std::invalid_argument("spectral_derivative: order must be 1 or 2 (use "
                                    "spectral_laplacian / spectral_biharmonic for isotropic symbols)");

    const int n = F.grid.n;
    const int half = F.grid.half();
    const WaveNumbers wn(F.grid);
    SpectralField out(F.grid);

    for (int iky = 0; iky < n; ++iky) {
        for (int ikx = 0; ikx < half; ++ikx) {
            const double k = (axis == Axis::X) ? wn.kx(ikx) : wn.ky(iky);
            const bool nyquist =
                (axis == Axis::X) ? (ikx == n / 2) : (iky == n / 2);
            std::complex<double> factor;
            if (order == 1) {
                factor = nyquist ? std::complex<double>(0.0, 0.0)
                                 : std::complex<double>(0.0, k);
            } else {
                factor = std::complex<double>(-k * k, 0.0);
            }
            out.at(iky, ikx) = factor * F.at(iky, ikx);
        }
    }
    return out;
}

SpectralField spectral_laplacian(const SpectralField& F) {
    const int n = F.grid.n;
    const int half = F.grid.half();
    const WaveNumbers wn(F.grid);
    SpectralField out(F.grid);
    for (int iky = 0; iky < n; ++iky)
        for (int ikx = 0; ikx < half; ++ikx)
            out.at(iky, ikx) = -wn.k2(iky, ikx) * F.at(iky, ikx);
    return out;
}

SpectralField spectral_biharmonic(const SpectralField& F) {
    const int n = F.grid.n;
    const int half = F.grid.half();
    const WaveNumbers wn(F.grid);
    SpectralField out(F.grid);
    for (int iky = 0; iky < n; ++iky)
        for (int ikx = 0; ikx < half; ++ikx)
            out.at(iky, ikx) = wn.k4(iky, ikx) * F.at(iky, ikx);
    return out;
}

bool mode_kept_by_dealias(const Grid2D& grid, int iky, int ikx) {
    const WaveNumbers wn(grid);
    const double cutoff = (2.0 / 3.0) * (grid.n / 2) * wn.unit();
    const double mx = std::abs(wn.kx(ikx));
    const double my = std::abs(wn.ky(iky));
    return std::max(mx, my) <= cutoff + 1e-12 * wn.unit();
}

void dealias_inplace(SpectralField& F) {
    const int n = F.grid.n;
    const int half = F.grid.half();
    for (int iky = 0; iky < n; ++iky)
        for (int ikx = 0; ikx < half; ++ikx)
            if (!mode_kept_by_dealias(F.grid, iky, ikx)) F.at(iky, ikx) = 0.0;
}

SpectralField dealias(const SpectralField& F) {
    SpectralField out = F;
    dealias_inplace(out);
    return out;
}

double spectral_sum_sq(const SpectralField& F) {
    const int n = F.grid.n;
    const int half = F.grid.half();
    double total = 0.0;
    for (int iky = 0; iky < n; ++iky)
        for (int ikx = 0; ikx < half; ++ikx)
            total += mode_multiplicity(F.grid, ikx) * std::norm(F.at(iky, ikx));
    return total;
}

void hermitian_enforce(SpectralField& F) {
    const int n = F.grid.n;
    for (int ikx : {0, n / 2}) {
        F.at(0, ikx) = F.at(0, ikx).real();
        F.at(n / 2, ikx) = F.at(n / 2, ikx).real();
        for (int iky = 1; iky < n / 2; ++iky)
            F.at(n - iky, ikx) = std::conj(F.at(iky, ikx));
    }
}

double hermitian_violation(const SpectralField& F) {
    const int n = F.grid.n;
    double max_coeff = 0.0;
    for (const auto& c : F.coeffs) max_coeff = std::max(max_coeff, std::abs(c));
    if (max_coeff == 0.0) return 0.0;

    double worst = 0.0;
    for (int ikx : {0, n / 2}) {
        worst = std::max(worst, std::abs(F.at(0, ikx).imag()));
        worst = std::max(worst, std::abs(F.at(n / 2, ikx).imag()));
        for (int iky = 1; iky < n / 2; ++iky)
            worst = std::max(worst, std::abs(F.at(n - iky, ikx) - std::conj(F.at(iky, ikx))));
    }
    return worst / max_coeff;
}

} // namespace flowlab
