#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kernel.hpp"
#include "l2_operator.hpp"
#include "monotonicity.hpp"
#include "solvers.hpp"
#include "temporal_mesh.hpp"

namespace l2frac {

/// Exact solution u(t) with the derivatives needed by the truncation oracle
/// and its closed-form Caputo derivative.
struct TestFunction {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> d1;
    std::function<double(double)> d3;
    std::function<double(double)> caputo;
};

/// u = t^p (p = 0 gives the constant 1).
inline TestFunction power_function(double p, double alpha)
{
    require_alpha(alpha);
    if (p < 0.0) {
        throw std::invalid_argument("power_function: exponent must be non-negative");
    }
    TestFunction u;
    u.name = "t^" + std::to_string(p);
    u.value = [p](double t) { return p == 0.0 ? 1.0 : std::pow(t, p); };
    u.d1 = [p](double t) { return p == 0.0 ? 0.0 : p * std::pow(t, p - 1.0); };
    u.d3 = [p](double t) { return p * (p - 1.0) * (p - 2.0) * std::pow(t, p - 3.0); };
    const double coef = p == 0.0 ? 0.0 : std::tgamma(p + 1.0) / std::tgamma(p + 1.0 - alpha);
    u.caputo = [p, alpha, coef](double t) { return coef * std::pow(t, p - alpha); };
    return u;
}

struct TruncationProfile {
    std::vector<double> r;    // r^m, entry 0 unused
    std::vector<double> psi;  // psi^j, j = 1..M, entry 0 unused
};

/// Maximum of |g| over the closed interval [a, b], sampled at n + 1 points.
inline double sampled_sup(const std::function<double(double)>& g, double a, double b, int n)
{
    double best = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double s = a + (b - a) * static_cast<double>(i) / n;
        best = std::max(best, std::abs(g(s)));
    }
    return best;
}

/// r^m = delta^alpha u(t_m) - D^alpha u(t_m), together with the smoothness
/// weights psi^1 = sup_{(0,t_2)} s^{1-alpha}|u'| + t_2^{-alpha} osc(u, [0, t_2])
/// and psi^j = t_j^{3-alpha} sup_{(t_{j-1}, t_{j+1})} |u'''|.
inline TruncationProfile truncation_error(const TestFunction& u, const TemporalMesh& mesh, double alpha,
                                          OperatorVariant variant = OperatorVariant::standard())
{
    require_alpha(alpha);
    constexpr int osc_samples = 1024;
    constexpr int d3_samples = 16;
    const int M = mesh.steps();
    const auto n = static_cast<std::size_t>(M) + 1;
    const RowAssembler asmb(mesh, alpha, variant);
    std::vector<double> nodal(n);
    for (std::size_t j = 0; j < n; ++j) {
        nodal[j] = u.value(mesh.t(static_cast<int>(j)));
    }

    TruncationProfile p;
    p.r.assign(n, 0.0);
    std::vector<double> g(n);
    for (int m = 1; m <= M; ++m) {
        asmb.increments(m, g);
        double s = 0.0;
        for (int j = 1; j <= m; ++j) {
            const auto k = static_cast<std::size_t>(j);
            s += g[k] * (nodal[k] - nodal[k - 1]);
        }
        p.r[static_cast<std::size_t>(m)] = s - u.caputo(mesh.t(m));
    }

    p.psi.assign(n, 0.0);
    const double t2 = mesh.t(2);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double dsup = 0.0;
    for (int i = 0; i <= osc_samples; ++i) {
        const double s = t2 * static_cast<double>(i) / osc_samples;
        const double v = u.value(s);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        if (i > 0) {
            dsup = std::max(dsup, std::pow(s, 1.0 - alpha) * std::abs(u.d1(s)));
        }
    }
    p.psi[1] = dsup + std::pow(t2, -alpha) * (hi - lo);
    for (int j = 2; j <= M; ++j) {
        const double a = mesh.t(j - 1);
        const double b = mesh.t(std::min(j + 1, M));
        p.psi[static_cast<std::size_t>(j)] = std::pow(mesh.t(j), 3.0 - alpha) * sampled_sup(u.d3, a, b, d3_samples);
    }
    return p;
}

/// sup_m |r^m| (t_m / tau_1)^{min(alpha + 1, (3 - alpha)/r)}.
inline double truncation_weighted_sup(const TruncationProfile& p, const TemporalMesh& mesh, double alpha, double r)
{
    const double expo = std::min(alpha + 1.0, (3.0 - alpha) / r);
    double best = 0.0;
    for (int m = 1; m <= mesh.steps(); ++m) {
        best = std::max(best, std::abs(p.r[static_cast<std::size_t>(m)]) * std::pow(mesh.t(m) / mesh.tau(1), expo));
    }
    return best;
}

struct StabilityEnvelope {
    double gamma = 0.0;
    double tau1 = 0.0;
    std::vector<double> values;  // index j = 0..M, entry 0 unused
};

inline StabilityEnvelope envelope_U(const TemporalMesh& mesh, double alpha, double gamma)
{
    require_alpha(alpha);
    StabilityEnvelope e;
    e.gamma = gamma;
    e.tau1 = mesh.tau(1);
    e.values.assign(static_cast<std::size_t>(mesh.steps()) + 1, std::numeric_limits<double>::quiet_NaN());
    for (int j = 1; j <= mesh.steps(); ++j) {
        const double t = mesh.t(j);
        double f = 1.0;
        if (gamma == 0.0) {
            f = 1.0 + std::log(t / e.tau1);
        } else if (gamma < 0.0) {
            f = std::pow(e.tau1 / t, gamma);
        }
        e.values[static_cast<std::size_t>(j)] = e.tau1 * std::pow(t, alpha - 1.0) * f;
    }
    return e;
}

enum class EnvelopeCase { below, critical, above };

struct ErrorEnvelope {
    double r = 1.0;
    double alpha = 0.5;
    int M = 0;
    EnvelopeCase regime = EnvelopeCase::below;
    std::vector<double> values;  // index m = 0..M, entry 0 unused
};

/// Pointwise error bound E^m, up to a constant, selected by comparing r with 3 - alpha.
inline ErrorEnvelope envelope_E(const TemporalMesh& mesh, double alpha, double r, int M)
{
    require_alpha(alpha);
    if (!(r >= 1.0)) {
        throw std::invalid_argument("envelope_E: r must be >= 1");
    }
    if (M < 1) {
        throw std::invalid_argument("envelope_E: M must be positive");
    }
    ErrorEnvelope e;
    e.r = r;
    e.alpha = alpha;
    e.M = M;
    const double crit = 3.0 - alpha;
    if (std::abs(r - crit) <= 1e-12) {
        e.regime = EnvelopeCase::critical;
    } else if (r < crit) {
        e.regime = EnvelopeCase::below;
    } else {
        e.regime = EnvelopeCase::above;
    }
    const double Md = static_cast<double>(M);
    const double t1 = mesh.t(1);
    e.values.assign(static_cast<std::size_t>(mesh.steps()) + 1, std::numeric_limits<double>::quiet_NaN());
    for (int m = 1; m <= mesh.steps(); ++m) {
        const double t = mesh.t(m);
        double v = 0.0;
        switch (e.regime) {
        case EnvelopeCase::below:
            v = std::pow(Md, -r) * std::pow(t, alpha - 1.0);
            break;
        case EnvelopeCase::critical:
            v = std::pow(Md, alpha - 3.0) * std::pow(t, alpha - 1.0) * (1.0 + std::log(t / t1));
            break;
        case EnvelopeCase::above:
            v = std::pow(Md, alpha - 3.0) * std::pow(t, alpha - crit / r);
            break;
        }
        e.values[static_cast<std::size_t>(m)] = v;
    }
    return e;
}

inline ErrorEnvelope envelope_E(const TemporalMesh& mesh, double alpha, double r)
{
    return envelope_E(mesh, alpha, r, mesh.steps());
}

/// rate_i = log(e_i / e_{i+1}) / log(M_{i+1} / M_i).
inline std::vector<double> observed_rates(const std::vector<double>& errors, const std::vector<int>& Ms)
{
    if (errors.size() != Ms.size()) {
        throw std::invalid_argument("observed_rates: errors and M lists differ in length");
    }
    for (const double e : errors) {
        if (!(e > 0.0)) {
            throw std::invalid_argument("observed_rates: errors must be positive");
        }
    }
    std::vector<double> rates;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        if (Ms[i + 1] <= Ms[i]) {
            throw std::invalid_argument("observed_rates: M values must increase");
        }
        rates.push_back(std::log(errors[i] / errors[i + 1]) /
                        std::log(static_cast<double>(Ms[i + 1]) / static_cast<double>(Ms[i])));
    }
    return rates;
}

struct PointwiseRow {
    int m = 0;
    double t = 0.0;
    double abs_error = 0.0;
    double envelope = 0.0;
    double ratio = 0.0;
};

inline std::vector<PointwiseRow> pointwise_comparison(const SolveResult& result, const ErrorEnvelope& envelope)
{
    if (result.error.empty()) {
        throw std::invalid_argument("pointwise_comparison: the result carries no exact-solution errors");
    }
    if (envelope.values.size() != result.error.size()) {
        throw std::invalid_argument("pointwise_comparison: envelope and result sizes differ");
    }
    std::vector<PointwiseRow> rows;
    for (std::size_t m = 1; m < result.error.size(); ++m) {
        PointwiseRow row;
        row.m = static_cast<int>(m);
        row.t = result.t[m];
        row.abs_error = std::abs(result.error[m]);
        row.envelope = envelope.values[m];
        row.ratio = row.abs_error / row.envelope;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Model problems

/// u = t^alpha, f = Gamma(1 + alpha).
inline ScalarProblem talpha_problem(double alpha, double T = 1.0)
{
    require_alpha(alpha);
    const double g = std::tgamma(1.0 + alpha);
    return {alpha, T, [g](double) { return g; }, 0.0, [alpha](double t) { return std::pow(t, alpha); }};
}

/// u = t^2, f = 2 t^{2-alpha} / Gamma(3 - alpha).
inline ScalarProblem quad_problem(double alpha, double T = 1.0)
{
    require_alpha(alpha);
    const double c = 2.0 / std::tgamma(3.0 - alpha);
    return {alpha, T, [c, alpha](double t) { return c * std::pow(t, 2.0 - alpha); }, 0.0,
            [](double t) { return t * t; }};
}

inline ScalarProblem zero_problem(double alpha, double T = 1.0)
{
    require_alpha(alpha);
    return {alpha, T, [](double) { return 0.0; }, 0.0, [](double) { return 0.0; }};
}

/// u = t^alpha sin(pi x) on (0, 1) with a = 1 and c = 1 + x^2.
inline Parabolic1DProblem sinx_problem(double alpha, int N, double T = 1.0)
{
    require_alpha(alpha);
    constexpr double pi = std::numbers::pi;
    const double g = std::tgamma(1.0 + alpha);
    Parabolic1DProblem p;
    p.alpha = alpha;
    p.T = T;
    p.X = 1.0;
    p.N = N;
    p.a = [](double) { return 1.0; };
    p.c = [](double x) { return 1.0 + x * x; };
    p.f = [g, alpha](double x, double t) {
        return (g + std::pow(t, alpha) * (pi * pi + 1.0 + x * x)) * std::sin(pi * x);
    };
    p.u0 = [](double) { return 0.0; };
    p.exact = [alpha](double x, double t) { return std::pow(t, alpha) * std::sin(pi * x); };
    return p;
}

// ---------------------------------------------------------------------------
// Convergence tables

/// Grading exponent, either fixed or a function of alpha:
/// fixed r, (3 - alpha)/d, or (3 - alpha)/alpha.
struct GradingRule {
    enum class Kind { fixed, over_divisor, over_alpha };
    Kind kind = Kind::fixed;
    double value = 1.0;

    static GradingRule fixed_r(double r) { return {Kind::fixed, r}; }
    static GradingRule three_minus_alpha_over(double d) { return {Kind::over_divisor, d}; }
    static GradingRule optimal() { return {Kind::over_alpha, 0.0}; }

    [[nodiscard]] double evaluate(double alpha) const
    {
        switch (kind) {
        case Kind::fixed:
            return value;
        case Kind::over_divisor:
            return (3.0 - alpha) / value;
        case Kind::over_alpha:
            return (3.0 - alpha) / alpha;
        }
        return value;
    }
};

enum class ErrorMetric { at_final, max_nodal, l2_final, max_l2 };
enum class ProblemKind { talpha, sinx };

struct CampaignSpec {
    ProblemKind problem = ProblemKind::talpha;
    ErrorMetric metric = ErrorMetric::at_final;
    std::vector<double> alphas;
    std::vector<GradingRule> rules;
    std::vector<int> Ms;
    MeshVariant mesh = MeshVariant::graded;
    double theta = 1.0;  // picks K for modified graded meshes
    double T = 1.0;
    int N = 255;  // spatial resolution for the parabolic problem
    unsigned threads = 0;  // 0 = hardware concurrency
};

struct TableCell {
    std::size_t rule = 0;
    std::size_t alpha_index = 0;
    double alpha = 0.0;
    double r = 0.0;
    int M = 0;
    bool ok = false;
    double error = std::numeric_limits<double>::quiet_NaN();
    double rate = std::numeric_limits<double>::quiet_NaN();  // vs the previous M of the same row
    std::string message;
};

struct ConvergenceTable {
    CampaignSpec spec;
    std::vector<TableCell> cells;  // ordered rule, alpha, M

    [[nodiscard]] const TableCell& cell(std::size_t rule, std::size_t alpha_index, std::size_t M_index) const
    {
        return cells.at((rule * spec.alphas.size() + alpha_index) * spec.Ms.size() + M_index);
    }
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn)
{
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
}

inline TemporalMesh campaign_mesh(const CampaignSpec& spec, double alpha, double r, int M)
{
    MeshSpec ms{spec.T, M, r, spec.mesh, 1};
    if (spec.mesh == MeshVariant::modified_graded) {
        ms.K = compute_K(r, sigma_bar(alpha, spec.theta).value);
    }
    return build_graded(ms);
}

inline double run_cell(const CampaignSpec& spec, double alpha, double r, int M)
{
    const TemporalMesh mesh = campaign_mesh(spec, alpha, r, M);
    if (spec.problem == ProblemKind::talpha) {
        const SolveResult res = solve_scalar(talpha_problem(alpha, spec.T), mesh);
        switch (spec.metric) {
        case ErrorMetric::at_final:
        case ErrorMetric::l2_final:
            return res.final_abs_error();
        case ErrorMetric::max_nodal:
        case ErrorMetric::max_l2:
            return res.max_abs_error();
        }
    }
    const ParabolicResult res = solve_parabolic_1d(sinx_problem(alpha, spec.N, spec.T), mesh);
    switch (spec.metric) {
    case ErrorMetric::at_final:
    case ErrorMetric::l2_final:
        return res.final_l2_error();
    case ErrorMetric::max_nodal:
    case ErrorMetric::max_l2:
        return res.max_l2_error();
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Fills every (rule, alpha, M) cell; solver failures are recorded in the
/// cell, never thrown. Output is independent of the thread count.
inline ConvergenceTable build_table(const CampaignSpec& spec)
{
    for (const double a : spec.alphas) {
        require_alpha(a);
    }
    for (std::size_t i = 0; i < spec.Ms.size(); ++i) {
        if (spec.Ms[i] < 2 || (i > 0 && spec.Ms[i] <= spec.Ms[i - 1])) {
            throw std::invalid_argument("build_table: M values must be increasing and at least 2");
        }
    }
    ConvergenceTable table;
    table.spec = spec;
    for (std::size_t ri = 0; ri < spec.rules.size(); ++ri) {
        for (std::size_t ai = 0; ai < spec.alphas.size(); ++ai) {
            for (const int M : spec.Ms) {
                TableCell c;
                c.rule = ri;
                c.alpha_index = ai;
                c.alpha = spec.alphas[ai];
                c.r = spec.rules[ri].evaluate(c.alpha);
                c.M = M;
                table.cells.push_back(c);
            }
        }
    }

    // largest cells first so that the long solves do not end up last in the queue
    std::vector<std::size_t> order(table.cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return table.cells[a].M > table.cells[b].M; });

    parallel_for(order.size(), spec.threads, [&](std::size_t k) {
        TableCell& c = table.cells[order[k]];
        try {
            c.error = run_cell(spec, c.alpha, c.r, c.M);
            c.ok = true;
        } catch (const std::exception& e) {
            c.ok = false;
            c.message = e.what();
        }
    });

    const std::size_t nM = spec.Ms.size();
    for (std::size_t i = 0; i < table.cells.size(); ++i) {
        if (i % nM == 0) {
            continue;
        }
        const TableCell& prev = table.cells[i - 1];
        TableCell& c = table.cells[i];
        if (prev.ok && c.ok && prev.error > 0.0 && c.error > 0.0) {
            c.rate = observed_rates({prev.error, c.error}, {prev.M, c.M}).front();
        }
    }
    return table;
}

} // namespace l2frac
