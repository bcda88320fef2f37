#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "temporal_mesh.hpp"

namespace l2frac {

inline void require_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("fractional order alpha must lie in (0, 1)");
    }
}

namespace detail {

// u_hi^p - u_lo^p for 0 <= u_lo < u_hi, p > 0, with width = u_hi - u_lo
// supplied separately so that nearly equal arguments do not cancel.
inline double power_difference(double u_lo, double width, double p)
{
    if (u_lo == 0.0) {
        return std::pow(width, p);
    }
    return std::pow(u_lo, p) * std::expm1(p * std::log1p(width / u_lo));
}

} // namespace detail

/// Moments of the weakly singular kernel over (a, b):
///   i0 = int (t_m - s)^{-alpha} ds,
///   i1 = int (t_m - s)^{1-alpha} ds,
///   i2 = int (t_m - s)^{2-alpha} ds.
struct KernelMoments {
    double i0 = 0.0;
    double i1 = 0.0;
    double i2 = 0.0;
};

inline KernelMoments kernel_moments(double a, double b, double t_m, double alpha)
{
    require_alpha(alpha);
    if (!(a >= 0.0) || !(a < b) || !(b <= t_m)) {
        throw std::invalid_argument("kernel_moments: need 0 <= a < b <= t_m");
    }
    const double u_lo = t_m - b;
    const double width = b - a;
    const double p = 1.0 - alpha;
    return {detail::power_difference(u_lo, width, p) / p,
            detail::power_difference(u_lo, width, p + 1.0) / (p + 1.0),
            detail::power_difference(u_lo, width, p + 2.0) / (p + 2.0)};
}

/// Kernel moments about the interval midpoint c = (a+b)/2:
///   i0 = int_a^b (t_m - s)^{-alpha} ds,  j1 = int_a^b (t_m - s)^{-alpha} (s - c) ds.
struct CenteredMoments {
    double i0 = 0.0;
    double j1 = 0.0;
};

/// Evaluates centered kernel moments. Intervals far from t_m (relative to
/// their width) use the binomial series of (1 - x/u_c)^{-alpha}, which keeps
/// j1 accurate where the closed form u_c*I0 - I1 would cancel.
class KernelSeries {
public:
    static constexpr int max_terms = 24;
    /// Largest half-width / distance ratio handled by the series.
    static constexpr double series_limit = 0.125;

    explicit KernelSeries(double alpha) : alpha_(alpha)
    {
        require_alpha(alpha);
        // c_n = (alpha)_n / n!
        // folded with the monomial integrals: c_n/(n+1) for even n, c_n/(n+2) for odd n
        double c = 1.0;
        for (int n = 0; n < max_terms; ++n) {
            if (n > 0) {
                c *= (alpha + n - 1) / n;
            }
            moment_coeffs_[static_cast<std::size_t>(n)] = (n % 2 == 0) ? c / (n + 1) : c / (n + 2);
        }
    }

    [[nodiscard]] double alpha() const noexcept { return alpha_; }

    /// Moments over (a, b) with u_lo = t_m - b >= 0 precomputed by the caller.
    [[nodiscard]] CenteredMoments centered(double u_lo, double width) const
    {
        const double half = 0.5 * width;
        const double u_c = u_lo + half;
        const double q = half / u_c;
        if (q <= series_limit) {
            const double q2 = q * q;
            const double scale = std::pow(u_c, -alpha_);
            // even part: sum c_{2k} q^{2k}/(2k+1); odd part: sum c_{2k+1} q^{2k+1}/(2k+3)
            double even = moment_coeffs_[0];
            double odd = moment_coeffs_[1] * q;
            double qp = 1.0;
            for (int k = 1; 2 * k + 1 < max_terms; ++k) {
                qp *= q2;
                const double te = moment_coeffs_[static_cast<std::size_t>(2 * k)] * qp;
                const double to = moment_coeffs_[static_cast<std::size_t>(2 * k + 1)] * qp * q;
                even += te;
                odd += to;
                if (te < 1e-18 * even && to < 1e-18 * odd) {
                    break;
                }
            }
            return {scale * width * even, scale * 0.5 * width * width * odd};
        }
        const double p = 1.0 - alpha_;
        const double i0 = detail::power_difference(u_lo, width, p) / p;
        const double i1 = detail::power_difference(u_lo, width, p + 1.0) / (p + 1.0);
        return {i0, u_c * i0 - i1};
    }

private:
    double alpha_;
    std::array<double, max_terms> moment_coeffs_{};
};

/// Contribution of one mesh interval (t_{k-1}, t_k) to row m of the discrete
/// operator: int (t_m - s)^{-alpha} d/ds L_i(s) ds for each Lagrange basis
/// function L_i of the interpolant used on that interval (without the
/// 1/Gamma(1-alpha) factor). Weights sum to zero.
struct IntervalStencil {
    std::array<int, 3> nodes{};
    std::array<double, 3> weights{};
    int count = 0;
};

enum class InterpolantKind {
    linear,           // Pi_{1,k}: nodes t_{k-1}, t_k
    quadratic_left,   // Pi_{2,k}: nodes t_{k-1}, t_k, t_{k+1}, interval is the left span
    quadratic_right,  // Pi_{2,k-1}: nodes t_{k-2}, t_{k-1}, t_k, interval is the right span
};

inline IntervalStencil interval_stencil(const TemporalMesh& mesh, const KernelSeries& kernel, int m, int k,
                                        InterpolantKind kind)
{
    const double t_m = mesh.t(m);
    const double h = mesh.tau(k);
    const CenteredMoments mom = kernel.centered(t_m - mesh.t(k), h);
    IntervalStencil st;
    switch (kind) {
    case InterpolantKind::linear:
        st.count = 2;
        st.nodes = {k - 1, k, 0};
        st.weights = {-mom.i0 / h, mom.i0 / h, 0.0};
        break;
    case InterpolantKind::quadratic_left: {
        // nodes x0 = t_{k-1}, x1 = t_k, x2 = t_{k+1}; midpoint offsets 2c - (x_a + x_b)
        const double h1 = h;
        const double h2 = mesh.tau(k + 1);
        const double j2 = 2.0 * mom.j1;
        st.count = 3;
        st.nodes = {k - 1, k, k + 1};
        st.weights = {(j2 - (h1 + h2) * mom.i0) / (h1 * (h1 + h2)), (j2 - h2 * mom.i0) / (-h1 * h2),
                      j2 / ((h1 + h2) * h2)};
        break;
    }
    case InterpolantKind::quadratic_right: {
        // nodes x0 = t_{k-2}, x1 = t_{k-1}, x2 = t_k
        const double h1 = mesh.tau(k - 1);
        const double h2 = h;
        const double j2 = 2.0 * mom.j1;
        st.count = 3;
        st.nodes = {k - 2, k - 1, k};
        st.weights = {j2 / (h1 * (h1 + h2)), (j2 + h1 * mom.i0) / (-h1 * h2),
                      (j2 + (h1 + h2) * mom.i0) / ((h1 + h2) * h2)};
        break;
    }
    }
    return st;
}

} // namespace l2frac
