#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "l2_operator.hpp"
#include "temporal_mesh.hpp"

namespace l2frac {

/// Raised when a time step cannot be taken (non-positive diagonal, failed
/// tridiagonal pivot). Distinct from std::invalid_argument so callers can
/// tell numerical failure from bad input.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline void check_final_time(const TemporalMesh& mesh, double T)
{
    if (std::abs(mesh.final_time() - T) > 1e-12 * std::max(1.0, std::abs(T))) {
        throw std::invalid_argument("mesh final time " + std::to_string(mesh.final_time()) +
                                    " does not match problem T = " + std::to_string(T));
    }
}

} // namespace detail

/// D^alpha u = f on (0, T], u(0) = u0.
struct ScalarProblem {
    double alpha = 0.5;
    double T = 1.0;
    std::function<double(double)> f;
    double u0 = 0.0;
    std::function<double(double)> exact;  // optional
};

struct SolveResult {
    std::vector<double> t;         // mesh nodes
    std::vector<double> U;         // U^0..U^M
    std::vector<double> residual;  // |delta U^m - f(t_m)|, entry 0 zero
    std::vector<double> error;     // u(t_m) - U^m when an exact solution is known, else empty

    [[nodiscard]] double max_abs_error() const
    {
        double e = 0.0;
        for (std::size_t m = 1; m < error.size(); ++m) {
            e = std::max(e, std::abs(error[m]));
        }
        return e;
    }
    [[nodiscard]] double final_abs_error() const { return error.empty() ? 0.0 : std::abs(error.back()); }
};

/// Marches delta^alpha U^m = f(t_m), m = 1..M.
///
/// Each step forms the history sum_{j<m} g_{m,j}(U^j - U^{j-1}) from the
/// increment weights of row m, which are assembled on the fly (O(m) work and
/// memory per step).
inline SolveResult solve_scalar(const ScalarProblem& problem, const TemporalMesh& mesh,
                                OperatorVariant variant = OperatorVariant::standard())
{
    require_alpha(problem.alpha);
    detail::check_final_time(mesh, problem.T);
    if (!problem.f) {
        throw std::invalid_argument("solve_scalar: source f is required");
    }
    const int M = mesh.steps();
    const auto n = static_cast<std::size_t>(M) + 1;
    const RowAssembler asmb(mesh, problem.alpha, variant);

    SolveResult res;
    res.t.assign(mesh.nodes().begin(), mesh.nodes().end());
    res.U.assign(n, 0.0);
    res.residual.assign(n, 0.0);
    std::vector<double> incr(n, 0.0);
    std::vector<double> g(n, 0.0);

    res.U[0] = problem.u0;
    for (int m = 1; m <= M; ++m) {
        asmb.increments(m, g);
        const auto mi = static_cast<std::size_t>(m);
        const double diag = g[mi];
        if (!(diag > 0.0)) {
            throw NumericalFailure("solve_scalar: non-positive diagonal coefficient at m = " + std::to_string(m));
        }
        detail::CompensatedSum hist;
        for (std::size_t j = 1; j < mi; ++j) {
            hist.add(g[j] * incr[j]);
        }
        const double fm = problem.f(mesh.t(m));
        const double h = hist.value();
        incr[mi] = (fm - h) / diag;
        res.U[mi] = res.U[mi - 1] + incr[mi];
        res.residual[mi] = std::abs(h + diag * incr[mi] - fm);
    }

    if (problem.exact) {
        res.error.assign(n, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            res.error[m] = problem.exact(res.t[m]) - res.U[m];
        }
    }
    return res;
}

/// D^alpha u - (a(x) u_x)_x + c(x) u = f(x, t) on (0, X) x (0, T],
/// u(0, t) = left(t), u(X, t) = right(t), u(x, 0) = u0(x).
struct Parabolic1DProblem {
    double alpha = 0.5;
    double T = 1.0;
    double X = 1.0;
    int N = 64;  // interior grid nodes
    std::function<double(double)> a;
    std::function<double(double)> c;
    std::function<double(double, double)> f;
    std::function<double(double)> u0;
    std::function<double(double)> left;   // optional, zero when empty
    std::function<double(double)> right;  // optional, zero when empty
    std::function<double(double, double)> exact;  // optional
};

/// Lumped-mass linear elements on a uniform grid x_i = i h, h = X/(N+1),
/// i.e. the 3-point flux form with a sampled at cell midpoints.
class DiscreteElliptic {
public:
    explicit DiscreteElliptic(const Parabolic1DProblem& p) : N_(p.N), h_(p.X / (p.N + 1))
    {
        if (p.N < 3) {
            throw std::invalid_argument("parabolic problem: need N >= 3 interior nodes");
        }
        if (!(p.X > 0.0)) {
            throw std::invalid_argument("parabolic problem: X must be positive");
        }
        if (!p.a || !p.c) {
            throw std::invalid_argument("parabolic problem: coefficients a and c are required");
        }
        const auto n = static_cast<std::size_t>(N_);
        a_half_.resize(n + 1);
        c_.resize(n);
        x_.resize(n + 2);
        for (std::size_t i = 0; i < n + 2; ++i) {
            x_[i] = static_cast<double>(i) * h_;
        }
        x_[n + 1] = p.X;
        for (std::size_t i = 0; i <= n; ++i) {
            a_half_[i] = p.a((static_cast<double>(i) + 0.5) * h_);
            if (!(a_half_[i] > 0.0)) {
                throw std::invalid_argument("parabolic problem: a(x) must be positive on the grid");
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            c_[i] = p.c(x_[i + 1]);
            if (!(c_[i] >= 0.0)) {
                throw std::invalid_argument("parabolic problem: c(x) must be non-negative on the grid");
            }
        }
    }

    [[nodiscard]] int interior() const noexcept { return N_; }
    [[nodiscard]] double h() const noexcept { return h_; }
    /// Grid including both boundary nodes.
    [[nodiscard]] const std::vector<double>& x() const noexcept { return x_; }

    /// out = L_h u for interior values u with boundary values bl, br.
    void apply(std::span<const double> u, double bl, double br, std::span<double> out) const
    {
        const double ih2 = 1.0 / (h_ * h_);
        const auto n = static_cast<std::size_t>(N_);
        for (std::size_t i = 0; i < n; ++i) {
            const double ul = i == 0 ? bl : u[i - 1];
            const double ur = i + 1 == n ? br : u[i + 1];
            const double am = a_half_[i];
            const double ap = a_half_[i + 1];
            out[i] = ih2 * (-am * ul + (am + ap) * u[i] - ap * ur) + c_[i] * u[i];
        }
    }

    /// Solves (shift I + L_h) u = rhs with homogeneous boundary values.
    void solve(double shift, std::span<const double> rhs, std::span<double> u) const
    {
        const double ih2 = 1.0 / (h_ * h_);
        const auto n = static_cast<std::size_t>(N_);
        std::vector<double> cp(n);
        double prev_c = 0.0;
        double prev_d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double lower = i == 0 ? 0.0 : -ih2 * a_half_[i];
            const double diag = shift + c_[i] + ih2 * (a_half_[i] + a_half_[i + 1]);
            const double upper = i + 1 == n ? 0.0 : -ih2 * a_half_[i + 1];
            const double piv = diag - lower * prev_c;
            if (!(piv > 0.0) || !std::isfinite(piv)) {
                throw NumericalFailure("tridiagonal solve: non-positive pivot at row " + std::to_string(i));
            }
            cp[i] = upper / piv;
            prev_d = (rhs[i] - lower * prev_d) / piv;
            u[i] = prev_d;
            prev_c = cp[i];
        }
        for (std::size_t i = n - 1; i-- > 0;) {
            u[i] -= cp[i] * u[i + 1];
        }
    }

    /// Exact L2(0, X) norm of the piecewise-linear function with nodal values e (N+2 entries).
    [[nodiscard]] double l2_norm(std::span<const double> e) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < e.size(); ++i) {
            s += e[i] * e[i] + e[i] * e[i + 1] + e[i + 1] * e[i + 1];
        }
        return std::sqrt(s * h_ / 3.0);
    }

private:
    int N_;
    double h_;
    std::vector<double> a_half_;
    std::vector<double> c_;
    std::vector<double> x_;
};

struct FieldSnapshot {
    int m = 0;
    double t = 0.0;
    std::vector<double> U;  // including boundary nodes
};

struct ParabolicResult {
    std::vector<double> t;
    std::vector<double> x;         // grid including boundary nodes
    std::vector<double> U_final;   // including boundary nodes
    std::vector<double> residual;  // max-norm residual of each step solve, entry 0 zero
    std::vector<double> l2_error;  // L2(0, X) error per step when an exact solution is known
    std::vector<FieldSnapshot> snapshots;

    [[nodiscard]] double max_l2_error() const
    {
        double e = 0.0;
        for (std::size_t m = 1; m < l2_error.size(); ++m) {
            e = std::max(e, l2_error[m]);
        }
        return e;
    }
    [[nodiscard]] double final_l2_error() const { return l2_error.empty() ? 0.0 : l2_error.back(); }
};

/// Marches delta^alpha U^m + L_h U^m = f(., t_m). Unknowns are the increments
/// D^m = U^m - U^{m-1}; each step solves (g_{m,m} I + L_h) D^m = f^m - H^m - L_h U^{m-1}
/// with H^m = sum_{j<m} g_{m,j} D^j. All past increments are kept, so memory
/// is O(M N) and the history costs O(m N) per step.
inline ParabolicResult solve_parabolic_1d(const Parabolic1DProblem& problem, const TemporalMesh& mesh,
                                          OperatorVariant variant = OperatorVariant::standard(),
                                          const std::vector<int>& snapshot_steps = {})
{
    require_alpha(problem.alpha);
    detail::check_final_time(mesh, problem.T);
    if (!problem.f || !problem.u0) {
        throw std::invalid_argument("solve_parabolic_1d: source f and initial value u0 are required");
    }
    const DiscreteElliptic ell(problem);
    const int M = mesh.steps();
    const auto N = static_cast<std::size_t>(problem.N);
    const RowAssembler asmb(mesh, problem.alpha, variant);
    auto left = [&](double t) { return problem.left ? problem.left(t) : 0.0; };
    auto right = [&](double t) { return problem.right ? problem.right(t) : 0.0; };
    const auto& x = ell.x();

    ParabolicResult res;
    res.t.assign(mesh.nodes().begin(), mesh.nodes().end());
    res.x = x;
    res.residual.assign(static_cast<std::size_t>(M) + 1, 0.0);

    std::vector<double> U(N);
    for (std::size_t i = 0; i < N; ++i) {
        U[i] = problem.u0(x[i + 1]);
    }
    auto full_field = [&](double t) {
        std::vector<double> v(N + 2);
        v[0] = left(t);
        std::copy(U.begin(), U.end(), v.begin() + 1);
        v[N + 1] = right(t);
        return v;
    };
    auto record = [&](int m) {
        const double t = mesh.t(m);
        if (problem.exact) {
            std::vector<double> e = full_field(t);
            for (std::size_t i = 0; i < N + 2; ++i) {
                e[i] = problem.exact(x[i], t) - e[i];
            }
            res.l2_error[static_cast<std::size_t>(m)] = ell.l2_norm(e);
        }
        if (std::find(snapshot_steps.begin(), snapshot_steps.end(), m) != snapshot_steps.end()) {
            res.snapshots.push_back({m, t, full_field(t)});
        }
    };
    if (problem.exact) {
        res.l2_error.assign(static_cast<std::size_t>(M) + 1, 0.0);
    }
    // at t_0 the boundary values come from u0 itself
    {
        std::vector<double> v(N + 2);
        v[0] = problem.u0(x[0]);
        std::copy(U.begin(), U.end(), v.begin() + 1);
        v[N + 1] = problem.u0(x[N + 1]);
        if (std::find(snapshot_steps.begin(), snapshot_steps.end(), 0) != snapshot_steps.end()) {
            res.snapshots.push_back({0, 0.0, v});
        }
        if (problem.exact) {
            for (std::size_t i = 0; i < N + 2; ++i) {
                v[i] = problem.exact(x[i], 0.0) - v[i];
            }
            res.l2_error[0] = ell.l2_norm(v);
        }
    }

    std::vector<std::vector<double>> incr(static_cast<std::size_t>(M) + 1);
    std::vector<double> g(static_cast<std::size_t>(M) + 1);
    std::vector<double> hist(N);
    std::vector<double> comp(N);
    std::vector<double> rhs(N);
    std::vector<double> LU(N);

    for (int m = 1; m <= M; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        const double t = mesh.t(m);
        asmb.increments(m, g);
        const double diag = g[mi];
        if (!(diag > 0.0)) {
            throw NumericalFailure("solve_parabolic_1d: non-positive diagonal coefficient at m = " + std::to_string(m));
        }
        std::fill(hist.begin(), hist.end(), 0.0);
        std::fill(comp.begin(), comp.end(), 0.0);
        for (std::size_t j = 1; j < mi; ++j) {
            const double w = g[j];
            const double* d = incr[j].data();
            for (std::size_t i = 0; i < N; ++i) {
                const double term = w * d[i];
                const double s = hist[i] + term;
                comp[i] += std::abs(hist[i]) >= std::abs(term) ? (hist[i] - s) + term : (term - s) + hist[i];
                hist[i] = s;
            }
        }
        const double bl = left(t);
        const double br = right(t);
        ell.apply(U, bl, br, LU);
        for (std::size_t i = 0; i < N; ++i) {
            rhs[i] = problem.f(x[i + 1], t) - (hist[i] + comp[i]) - LU[i];
        }
        auto& D = incr[mi];
        D.assign(N, 0.0);
        ell.solve(diag, rhs, D);

        // residual of the step system: (diag I + L_h) D - rhs
        ell.apply(D, 0.0, 0.0, LU);
        double r = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            r = std::max(r, std::abs(diag * D[i] + LU[i] - rhs[i]));
            U[i] += D[i];
        }
        res.residual[mi] = r;
        record(m);
    }
    res.U_final = full_field(mesh.final_time());
    return res;
}

} // namespace l2frac
