#include "flowlab/grid.hpp"

#include <cmath>

namespace flowlab {

bool RealField::finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double RealField::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
}

double RealField::rms() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return std::sqrt(s / static_cast<double>(data.size()));
}

double RealField::mean() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s / static_cast<double>(data.size());
}

} // namespace flowlab
