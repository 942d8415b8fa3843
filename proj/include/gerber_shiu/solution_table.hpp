#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gerber_shiu/error.hpp"

namespace gerber_shiu {

/// Values of a function on a grid. True values are phi * exp(log_scale);
/// log_scale is nonzero only for rescaled homogeneous solutions.
struct SolutionTable {
    std::vector<double> u;
    std::vector<double> phi;
    std::vector<double> dphi;       // empty when not computed
    std::vector<double> std_error;  // Monte Carlo only
    double log_scale = 0.0;
    std::vector<std::string> notes;

    std::size_t size() const { return u.size(); }
    bool has_derivative() const { return !dphi.empty(); }

    double max_abs() const {
        double m = 0.0;
        for (double v : phi) m = std::max(m, std::abs(v));
        return m;
    }
};

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t intervals) {
    std::vector<double> g(intervals + 1);
    const double h = (hi - lo) / static_cast<double>(intervals);
    for (std::size_t i = 0; i <= intervals; ++i) g[i] = lo + static_cast<double>(i) * h;
    g[intervals] = hi;
    return g;
}

/// Piecewise-cubic Hermite interpolant through a uniform-grid table with
/// derivatives. Evaluates (value, derivative).
class TableInterpolant {
public:
    explicit TableInterpolant(const SolutionTable& table) : table_(table) {
        if (!table.has_derivative()) fail(ErrorKind::domain, "TableInterpolant needs a table with derivatives");
        if (table.size() < 2) fail(ErrorKind::domain, "TableInterpolant needs at least two grid points");
        h_ = table.u[1] - table.u[0];
        scale_ = std::exp(table.log_scale);
    }

    std::pair<double, double> operator()(double x) const {
        const auto& t = table_;
        const std::size_t last = t.size() - 1;
        const double pos = (x - t.u[0]) / h_;
        std::size_t i = pos <= 0.0 ? 0 : std::min(static_cast<std::size_t>(pos), last - 1);
        const double s = (x - t.u[i]) / h_;
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1;
        const double h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2;
        const double h11 = s3 - s2;
        const double value = h00 * t.phi[i] + h10 * h_ * t.dphi[i] + h01 * t.phi[i + 1] + h11 * h_ * t.dphi[i + 1];
        const double d00 = (6 * s2 - 6 * s) / h_;
        const double d10 = 3 * s2 - 4 * s + 1;
        const double d01 = (-6 * s2 + 6 * s) / h_;
        const double d11 = 3 * s2 - 2 * s;
        const double deriv = d00 * t.phi[i] + d10 * t.dphi[i] + d01 * t.phi[i + 1] + d11 * t.dphi[i + 1];
        return {scale_ * value, scale_ * deriv};
    }

private:
    const SolutionTable& table_;
    double h_ = 0.0;
    double scale_ = 1.0;
};

}  // namespace gerber_shiu
