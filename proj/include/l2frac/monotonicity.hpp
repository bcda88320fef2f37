#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "l2_operator.hpp"
#include "temporal_mesh.hpp"

namespace l2frac {

struct UniformConstants {
    double alpha = 0.0;
    double B = 0.0;
    double A_prime = 0.0;
    double nu = 0.0;
};

inline UniformConstants uniform_constants(double alpha)
{
    require_alpha(alpha);
    const double d = (1.0 - alpha) * (2.0 - alpha);
    return {alpha, (alpha + 2.0) / d, 4.0 * alpha / d, 1.0 - (1.0 - alpha) / 48.0};
}

inline void require_theta(double theta)
{
    if (!(theta >= 0.5 && theta <= 1.0)) {
        throw std::invalid_argument("theta must lie in [1/2, 1]");
    }
}

/// eta(sigma) = (1 - sigma^2) [B/A' - sigma / (2 (1 + sigma))], sigma in [0, 1).
inline double eta(double sigma, double alpha)
{
    require_alpha(alpha);
    if (!(sigma >= 0.0 && sigma < 1.0)) {
        throw std::invalid_argument("eta: sigma must lie in [0, 1)");
    }
    return (1.0 - sigma * sigma) * ((alpha + 2.0) / (4.0 * alpha) - sigma / (2.0 * (1.0 + sigma)));
}

/// beta_1..beta_M (index 0 holds zero). Negative skews are clamped to
/// sigma = 0; such meshes are reported as non-admissible by certify().
inline std::vector<double> beta_schedule(const TemporalMesh& mesh, double alpha, double theta, int K = 1)
{
    require_alpha(alpha);
    require_theta(theta);
    const int M = mesh.steps();
    if (K < 1 || K >= M) {
        throw std::invalid_argument("beta_schedule: need 1 <= K < M");
    }
    const double nu = uniform_constants(alpha).nu;
    std::vector<double> beta(static_cast<std::size_t>(M) + 1, 0.0);
    for (int j = 2; j <= M; ++j) {
        const double s = std::clamp(mesh.sigma(j), 0.0, std::nextafter(1.0, 0.0));
        beta[static_cast<std::size_t>(j)] = 0.5 * theta * nu / eta(s, alpha);
    }
    beta[1] = beta[2];
    for (int j = 1; j <= K; ++j) {
        beta[static_cast<std::size_t>(j)] = beta[static_cast<std::size_t>(K) + 1];
    }
    return beta;
}

struct SigmaBarResult {
    double value = 0.0;
    double residual = 0.0;
    std::vector<double> iterates;  // sigma^[0] = 0, sigma^[1], ...
};

namespace detail {

inline double sigma_bar_c(double alpha) { return (2.0 + 5.0 * alpha - alpha * alpha) / (4.0 * alpha); }

} // namespace detail

/// Left side g_L(sigma) = (1 - sigma)[c (1 + sigma) - sigma].
inline double sigma_bar_gL(double sigma, double alpha)
{
    const double c = detail::sigma_bar_c(alpha);
    return (1.0 - sigma) * (c * (1.0 + sigma) - sigma);
}

/// Right side g_R(sigma) = 1 + sqrt((1 + (1 - sigma^2)/A')^2 - nu^2 theta (2 - theta)).
inline double sigma_bar_gR(double sigma, double alpha, double theta)
{
    const UniformConstants u = uniform_constants(alpha);
    const double a = 1.0 + (1.0 - sigma * sigma) / u.A_prime;
    const double b = u.nu * u.nu * theta * (2.0 - theta);
    return 1.0 + std::sqrt(a * a - b);
}

/// Largest admissible skew: the fixed point of g_L(sigma^[q+1]) = g_R(sigma^[q])
/// started from sigma^[0] = 0.
inline SigmaBarResult sigma_bar(double alpha, double theta, double tol = 1e-12)
{
    require_alpha(alpha);
    require_theta(theta);
    constexpr int max_iterations = 200;
    constexpr double step_tol = 1e-13;
    const double c = detail::sigma_bar_c(alpha);

    SigmaBarResult res;
    double s = 0.0;
    res.iterates.push_back(s);
    for (int q = 0; q < max_iterations; ++q) {
        const double y = sigma_bar_gR(s, alpha, theta);
        // root in (0, 1) of (c - 1) s^2 + s + (y - c) = 0
        const double d = c - y;
        const double next = 2.0 * d / (1.0 + std::sqrt(1.0 + 4.0 * (c - 1.0) * d));
        res.iterates.push_back(next);
        const double step = std::abs(next - s);
        s = next;
        res.residual = std::abs(sigma_bar_gL(s, alpha) - sigma_bar_gR(s, alpha, theta));
        if (step <= step_tol && res.residual <= tol) {
            res.value = s;
            return res;
        }
    }
    throw std::runtime_error("sigma_bar: fixed-point iteration did not converge");
}

/// Smallest K >= 1 with ((1+1/K)^r - 1) / (1 - (1-1/K)^r) <= rho_bar,
/// rho_bar = 2/(1 - sigma_bar) - 1.
inline int compute_K(double r, double sigma_bar_value)
{
    if (!(r >= 1.0)) {
        throw std::invalid_argument("compute_K: r must be >= 1");
    }
    if (!(sigma_bar_value > 0.0 && sigma_bar_value < 1.0)) {
        throw std::invalid_argument("compute_K: sigma_bar must lie in (0, 1)");
    }
    const double rho_bar = 2.0 / (1.0 - sigma_bar_value) - 1.0;
    constexpr int max_K = 100000000;
    for (int K = 1; K <= max_K; ++K) {
        const double x = 1.0 / static_cast<double>(K);
        const double num = std::expm1(r * std::log1p(x));
        const double den = -std::expm1(r * std::log1p(-x));
        if (num / den <= rho_bar * (1.0 + 1e-13)) {
            return K;
        }
    }
    throw std::runtime_error("compute_K: no K found");
}

struct ParabolicThreshold {
    double rho_bar_star = 0.0;
    double sigma_bar = 0.0;
    double sigma_star = 0.0;
};

/// rho*_bar = ((2 - theta)/theta)^{2/alpha}; sigma* = min(sigma_bar, 1 - 2/(1 + rho*_bar)).
inline ParabolicThreshold sigma_star(double alpha, double theta)
{
    require_alpha(alpha);
    if (!(theta >= 0.5 && theta < 1.0)) {
        throw std::invalid_argument("sigma_star: theta must lie in [1/2, 1)");
    }
    ParabolicThreshold p;
    p.rho_bar_star = std::pow((2.0 - theta) / theta, 2.0 / alpha);
    p.sigma_bar = sigma_bar(alpha, theta).value;
    p.sigma_star = std::min(p.sigma_bar, 1.0 - 2.0 / (1.0 + p.rho_bar_star));
    return p;
}

/// Dense square matrix, row-major.
class DenseMatrix {
public:
    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

    static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix a(n);
        for (std::size_t i = 0; i < n; ++i) {
            a(i, i) = 1.0;
        }
        return a;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

inline DenseMatrix multiply_lower(const DenseMatrix& a, const DenseMatrix& b)
{
    const std::size_t n = a.size();
    DenseMatrix c(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k <= i; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j <= k; ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

inline double norm_inf(const DenseMatrix& a)
{
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            s += std::abs(a(i, j));
        }
        best = std::max(best, s);
    }
    return best;
}

/// Hat-basis operator matrix with row 0 replaced by the identity row.
inline DenseMatrix augmented_matrix(const OperatorMatrix& op)
{
    const auto n = static_cast<std::size_t>(op.steps()) + 1;
    DenseMatrix h(n);
    h(0, 0) = 1.0;
    for (int m = 1; m <= op.steps(); ++m) {
        const auto& c = op.row(m).coeffs;
        for (std::size_t j = 0; j < c.size(); ++j) {
            h(static_cast<std::size_t>(m), j) = c[j];
        }
    }
    return h;
}

/// Positive diagonal, non-positive off-diagonal entries, with violations
/// measured against 1e-12 times the row's largest magnitude.
inline bool has_m_matrix_sign_pattern(const DenseMatrix& a, double tol = 1e-12)
{
    for (std::size_t i = 0; i < a.size(); ++i) {
        double scale = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            scale = std::max(scale, std::abs(a(i, j)));
        }
        if (!(a(i, i) > 0.0)) {
            return false;
        }
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (j != i && a(i, j) > tol * scale) {
                return false;
            }
        }
    }
    return true;
}

/// A1 A2 = H with V = A2 U, V^j = (U^j - beta_j U^{j-1})/(1 - beta_j).
struct FactorPair {
    DenseMatrix A1;
    DenseMatrix A2;

    [[nodiscard]] double kappa(int m, int j) const
    {
        return A1(static_cast<std::size_t>(m), static_cast<std::size_t>(j));
    }
};

inline FactorPair factorize(const OperatorMatrix& op, const std::vector<double>& betas)
{
    const int M = op.steps();
    if (betas.size() != static_cast<std::size_t>(M) + 1) {
        throw std::invalid_argument("factorize: need beta_0..beta_M");
    }
    for (int j = 1; j <= M; ++j) {
        const double b = betas[static_cast<std::size_t>(j)];
        if (!(b >= 0.0 && b < 1.0)) {
            throw std::invalid_argument("factorize: beta_" + std::to_string(j) + " outside [0, 1)");
        }
    }
    const auto n = static_cast<std::size_t>(M) + 1;
    FactorPair f{DenseMatrix(n), DenseMatrix(n)};
    f.A2(0, 0) = 1.0;
    f.A1(0, 0) = 1.0;
    for (std::size_t j = 1; j < n; ++j) {
        const double b = betas[j];
        f.A2(j, j) = 1.0 / (1.0 - b);
        f.A2(j, j - 1) = -b / (1.0 - b);
    }
    // kappa_{m,j} = (1 - beta_j) S_j with S_j = H_{m,j} + beta_{j+1} S_{j+1}, i.e.
    // delta applied to Phi^j = phi^j + beta_{j+1} Phi^{j+1}; beta_0 = 0.
    for (int m = 1; m <= M; ++m) {
        const auto& h = op.row(m).coeffs;
        const auto mi = static_cast<std::size_t>(m);
        double S = 0.0;
        for (std::size_t jj = mi + 1; jj-- > 0;) {
            const double next_beta = jj < mi ? betas[jj + 1] : 0.0;
            S = h[jj] + next_beta * S;
            const double bj = jj == 0 ? 0.0 : betas[jj];
            f.A1(mi, jj) = (1.0 - bj) * S;
        }
    }
    return f;
}

struct InverseCheck {
    bool nonnegative = false;
    double min_entry = 0.0;
};

/// Minimum entry of the inverse of a lower-triangular matrix, by forward
/// substitution against each unit vector.
inline InverseCheck verify_inverse_nonneg(const DenseMatrix& lower, double tol = 1e-12, std::size_t cap = 513)
{
    const std::size_t n = lower.size();
    if (n > cap) {
        throw std::invalid_argument("verify_inverse_nonneg: matrix size " + std::to_string(n) + " exceeds cap " +
                                    std::to_string(cap));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (lower(i, i) == 0.0 || !std::isfinite(lower(i, i))) {
            throw std::invalid_argument("verify_inverse_nonneg: singular diagonal at row " + std::to_string(i));
        }
    }
    double min_entry = std::numeric_limits<double>::infinity();
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::fill(x.begin(), x.end(), 0.0);
        for (std::size_t i = k; i < n; ++i) {
            double s = i == k ? 1.0 : 0.0;
            for (std::size_t j = k; j < i; ++j) {
                s -= lower(i, j) * x[j];
            }
            x[i] = s / lower(i, i);
        }
        for (std::size_t i = 0; i < n; ++i) {
            min_entry = std::min(min_entry, x[i]);
        }
    }
    return {min_entry >= -tol, min_entry};
}

/// Inverse check for the operator matrix (row 0 augmented); M <= max_steps.
inline InverseCheck verify_inverse_nonneg(const OperatorMatrix& op, double tol = 1e-12, int max_steps = 512)
{
    if (op.steps() > max_steps) {
        throw std::invalid_argument("verify_inverse_nonneg: M = " + std::to_string(op.steps()) + " exceeds cap " +
                                    std::to_string(max_steps));
    }
    return verify_inverse_nonneg(augmented_matrix(op), tol, static_cast<std::size_t>(max_steps) + 1);
}

/// Product inverse A2^{-1} A1^{-1}, formed as the inverse of A1 A2.
inline InverseCheck verify_inverse_nonneg(const FactorPair& f, double tol = 1e-12, int max_steps = 512)
{
    if (f.A1.size() > static_cast<std::size_t>(max_steps) + 1) {
        throw std::invalid_argument("verify_inverse_nonneg: factor size exceeds cap");
    }
    return verify_inverse_nonneg(multiply_lower(f.A1, f.A2), tol, static_cast<std::size_t>(max_steps) + 1);
}

struct ConditionCheck {
    int m = 0;
    double sigma = std::numeric_limits<double>::quiet_NaN();
    bool sigma_admissible = true;
    double key1 = 0.0;  // A_m - beta_m B_m, must be > 0
    bool key1_pass = true;
    bool key2_applies = false;
    double key2 = 0.0;  // (A_m - B_m + F_m) - beta_{m-1}(A_m - beta_m B_m), must be <= 0
    bool key2_pass = true;
    bool ratio_applies = false;
    double ratio = 0.0;  // beta_m B_m / (A_m - beta_m B_m), bounded by theta/(2 - theta)
    bool ratio_pass = true;

    [[nodiscard]] bool passed() const noexcept { return sigma_admissible && key1_pass && key2_pass && ratio_pass; }
};

struct CertificateFailure {
    int m = 0;
    std::string condition;
};

struct MonotoneCertificate {
    double alpha = 0.0;
    double theta = 1.0;
    double sigma_bar = 0.0;
    double rho_bar = 0.0;
    int K = 1;
    OperatorVariant variant;
    std::vector<double> betas;  // index 0 unused
    bool sigma_monotone = true;
    std::vector<ConditionCheck> checks;  // checks[m-1] is row m
    std::optional<CertificateFailure> first_failure;
    bool inverse_checked = false;
    bool verified_inverse_nonneg = false;
    double inverse_min_entry = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] bool passed() const noexcept
    {
        return !first_failure.has_value() && (!inverse_checked || verified_inverse_nonneg);
    }
};

struct CertifyOptions {
    bool verify_inverse = true;
    int inverse_cap = 512;
    double tol = 1e-12;
};

/// Evaluates the sufficient conditions for the inverse-monotone
/// representation row by row. Nothing is thrown for a failing mesh: the
/// first failing row and condition are recorded instead.
inline MonotoneCertificate certify(const TemporalMesh& mesh, double alpha, double theta,
                                   OperatorVariant variant = OperatorVariant::standard(),
                                   const CertifyOptions& options = {})
{
    require_alpha(alpha);
    require_theta(theta);
    const int M = mesh.steps();
    MonotoneCertificate cert;
    cert.alpha = alpha;
    cert.theta = theta;
    cert.variant = variant;
    cert.K = std::max(1, variant.l1_rows);
    if (cert.K >= M) {
        throw std::invalid_argument("certify: L1-start prefix K must be smaller than M");
    }
    cert.sigma_bar = sigma_bar(alpha, theta).value;
    cert.rho_bar = 2.0 / (1.0 - cert.sigma_bar) - 1.0;
    cert.betas = beta_schedule(mesh, alpha, theta, cert.K);

    const StencilDiagnostics d = stencil_diagnostics(mesh, alpha, variant);
    const double bound = theta / (2.0 - theta);
    const double stol = options.tol;
    const int first_sigma = std::max(2, cert.K + 1);

    auto fail = [&cert](int m, const char* what) {
        if (!cert.first_failure) {
            cert.first_failure = CertificateFailure{m, what};
        }
    };

    cert.checks.reserve(static_cast<std::size_t>(M));
    for (int m = 1; m <= M; ++m) {
        const auto i = static_cast<std::size_t>(m);
        ConditionCheck c;
        c.m = m;
        if (m >= first_sigma) {
            c.sigma = mesh.sigma(m);
            const bool in_range = c.sigma >= -stol && c.sigma <= cert.sigma_bar;
            const bool monotone = m == first_sigma || c.sigma <= mesh.sigma(m - 1) + stol;
            c.sigma_admissible = in_range && monotone;
            cert.sigma_monotone = cert.sigma_monotone && monotone;
        }
        if (!c.sigma_admissible) {
            fail(m, "sigma_admissible");
        }

        const double bm = cert.betas[i];
        const double scale = std::abs(d.A[i]) + std::abs(d.B[i]);
        c.key1 = d.A[i] - bm * d.B[i];
        c.key1_pass = c.key1 > stol * scale;
        if (!c.key1_pass) {
            fail(m, "key_AB_1");
        }
        if (m >= 2) {
            c.key2_applies = true;
            c.key2 = (d.A[i] - d.B[i] + d.F[i]) - cert.betas[i - 1] * c.key1;
            c.key2_pass = c.key2 <= stol * scale;
            if (!c.key2_pass) {
                fail(m, "key_AB_2");
            }
        }
        if (m >= std::max(3, cert.K + 2) && c.key1_pass) {
            c.ratio_applies = true;
            c.ratio = bm * d.B[i] / c.key1;
            c.ratio_pass = c.ratio <= bound * (1.0 + stol);
            if (!c.ratio_pass) {
                fail(m, "ratio_bound");
            }
        }
        cert.checks.push_back(c);
    }

    if (options.verify_inverse && M <= options.inverse_cap) {
        const OperatorMatrix op = build_operator(mesh, alpha, variant);
        const InverseCheck inv = verify_inverse_nonneg(op, stol, options.inverse_cap);
        cert.inverse_checked = true;
        cert.verified_inverse_nonneg = inv.nonnegative;
        cert.inverse_min_entry = inv.min_entry;
    }
    return cert;
}

struct EnergyCheck {
    int m = 0;
    double lhs = 0.0;  // (|kappa_{m,m-1}|^{-1} beta_m/(1-beta_m))^2
    double rhs = 0.0;  // (kappa_{m,m}^{-1}/(1-beta_m)) (kappa_{m-1,m-1}^{-1}/(1-beta_{m-1}))
    bool exact_pass = false;
    double step_ratio = 0.0;  // tilde_tau_{m-1}/tilde_tau_m
    double threshold = 0.0;   // (theta/(2-theta))^{2/alpha}
    bool sufficient_pass = false;
};

/// Parabolic stability condition for m >= K+2, both in exact form (from the
/// factored coefficients) and in the sufficient step-ratio form.
inline std::vector<EnergyCheck> check_energy_condition(const TemporalMesh& mesh, double alpha, double theta,
                                                       const std::vector<double>& betas, int K = 1,
                                                       OperatorVariant variant = OperatorVariant::standard())
{
    require_alpha(alpha);
    require_theta(theta);
    const int M = mesh.steps();
    if (betas.size() != static_cast<std::size_t>(M) + 1) {
        throw std::invalid_argument("check_energy_condition: need beta_0..beta_M");
    }
    const RowAssembler asmb(mesh, alpha, variant);
    const double threshold = std::pow(theta / (2.0 - theta), 2.0 / alpha);
    auto beta = [&betas](int j) { return betas[static_cast<std::size_t>(j)]; };
    // kappa_{m,m} = (1 - beta_m) H_{m,m};  kappa_{m,m-1} = (1 - beta_{m-1})(H_{m,m-1} + beta_m H_{m,m})
    auto diag = [&](int m) { return (1.0 - beta(m)) * local_hat(asmb, m).diag * asmb.inv_gamma(); };

    std::vector<EnergyCheck> out;
    for (int m = std::max(2, K + 2); m <= M; ++m) {
        const LocalHat h = local_hat(asmb, m);
        const double k_mm = (1.0 - beta(m)) * h.diag * asmb.inv_gamma();
        const double k_sub = (1.0 - beta(m - 1)) * (h.sub + beta(m) * h.diag) * asmb.inv_gamma();
        const double k_prev = diag(m - 1);
        EnergyCheck e;
        e.m = m;
        const double l = beta(m) / ((1.0 - beta(m)) * std::abs(k_sub));
        e.lhs = l * l;
        e.rhs = 1.0 / (k_mm * (1.0 - beta(m)) * k_prev * (1.0 - beta(m - 1)));
        e.exact_pass = e.lhs <= e.rhs;
        e.step_ratio = mesh.tilde_tau(m - 1) / mesh.tilde_tau(m);
        e.threshold = threshold;
        e.sufficient_pass = threshold <= e.step_ratio;
        out.push_back(e);
    }
    return out;
}

} // namespace l2frac
