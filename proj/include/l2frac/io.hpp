#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "l2_operator.hpp"
#include "monotonicity.hpp"
#include "solvers.hpp"
#include "temporal_mesh.hpp"

namespace l2frac {

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

inline std::string format_printf(const char* fmt, double v)
{
    std::array<char, 48> buf{};
    std::snprintf(buf.data(), buf.size(), fmt, v);
    return buf.data();
}

inline std::string format_sci3(double v) { return format_printf("%.3e", v); }
inline std::string format_fixed3(double v) { return format_printf("%.3f", v); }

// --- grading rules and metrics --------------------------------------------

inline std::string grading_label(const GradingRule& g)
{
    switch (g.kind) {
    case GradingRule::Kind::fixed:
        return format_double(g.value);
    case GradingRule::Kind::over_divisor:
        return g.value == 1.0 ? "3-a" : "(3-a)/" + format_double(g.value);
    case GradingRule::Kind::over_alpha:
        return "(3-a)/a";
    }
    return {};
}

/// Accepts a number, "3-a", "(3-a)/a" or "(3-a)/<number>".
inline GradingRule parse_grading_rule(std::string_view text)
{
    std::string s;
    for (const char ch : text) {
        if (ch != ' ') {
            s.push_back(ch);
        }
    }
    auto number = [](const std::string& t) {
        double v = 0.0;
        const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || !(v > 0.0)) {
            throw std::invalid_argument("invalid grading rule '" + t + "'");
        }
        return v;
    };
    if (s == "3-a" || s == "3-alpha") {
        return GradingRule::three_minus_alpha_over(1.0);
    }
    for (const std::string prefix : {"(3-a)/", "(3-alpha)/"}) {
        if (s.rfind(prefix, 0) == 0) {
            const std::string rest = s.substr(prefix.size());
            if (rest == "a" || rest == "alpha") {
                return GradingRule::optimal();
            }
            return GradingRule::three_minus_alpha_over(number(rest));
        }
    }
    const double r = number(s);
    if (r < 1.0) {
        throw std::invalid_argument("grading exponent must be >= 1, got '" + s + "'");
    }
    return GradingRule::fixed_r(r);
}

inline std::string metric_name(ErrorMetric m)
{
    switch (m) {
    case ErrorMetric::at_final:
        return "at_final";
    case ErrorMetric::max_nodal:
        return "max_nodal";
    case ErrorMetric::l2_final:
        return "l2_final";
    case ErrorMetric::max_l2:
        return "max_l2";
    }
    return {};
}

inline ErrorMetric parse_metric(std::string_view s)
{
    if (s == "at_final") {
        return ErrorMetric::at_final;
    }
    if (s == "max_nodal") {
        return ErrorMetric::max_nodal;
    }
    if (s == "l2_final") {
        return ErrorMetric::l2_final;
    }
    if (s == "max_l2") {
        return ErrorMetric::max_l2;
    }
    throw std::invalid_argument("unknown error metric '" + std::string(s) + "'");
}

inline std::string problem_name(ProblemKind p) { return p == ProblemKind::talpha ? "talpha" : "sinx"; }

inline ProblemKind parse_problem(std::string_view s)
{
    if (s == "talpha") {
        return ProblemKind::talpha;
    }
    if (s == "sinx") {
        return ProblemKind::sinx;
    }
    throw std::invalid_argument("unknown table problem '" + std::string(s) + "'");
}

inline std::string mesh_variant_name(MeshVariant v)
{
    switch (v) {
    case MeshVariant::uniform:
        return "uniform";
    case MeshVariant::graded:
        return "graded";
    case MeshVariant::modified_graded:
        return "modified";
    }
    return {};
}

inline MeshVariant parse_mesh_variant(std::string_view s)
{
    if (s == "uniform") {
        return MeshVariant::uniform;
    }
    if (s == "graded") {
        return MeshVariant::graded;
    }
    if (s == "modified") {
        return MeshVariant::modified_graded;
    }
    throw std::invalid_argument("unknown mesh variant '" + std::string(s) + "'");
}

// --- plain data writers ---------------------------------------------------

inline void write_mesh(std::ostream& out, const TemporalMesh& mesh, const std::vector<std::string>& comments = {})
{
    out << "# T=" << format_double(mesh.final_time()) << " M=" << mesh.steps() << '\n';
    for (const auto& c : comments) {
        out << "# " << c << '\n';
    }
    for (const double t : mesh.nodes()) {
        out << format_double(t) << '\n';
    }
}

inline void write_kappa_csv(std::ostream& out, const OperatorMatrix& op)
{
    out << "m,j,kappa\n";
    for (const auto& row : op.rows) {
        for (std::size_t j = 0; j < row.coeffs.size(); ++j) {
            out << row.m << ',' << j << ',' << format_double(row.coeffs[j]) << '\n';
        }
    }
}

/// `m,t_m,U` plus an `error` column when the exact solution was known.
inline void write_solution_csv(std::ostream& out, const SolveResult& res)
{
    const bool with_error = !res.error.empty();
    out << "m,t_m,U" << (with_error ? ",error" : "") << '\n';
    for (std::size_t m = 0; m < res.U.size(); ++m) {
        out << m << ',' << format_double(res.t[m]) << ',' << format_double(res.U[m]);
        if (with_error) {
            out << ',' << format_double(res.error[m]);
        }
        out << '\n';
    }
}

inline void write_snapshots_csv(std::ostream& out, const ParabolicResult& res)
{
    out << "m,t_m,x,U\n";
    for (const auto& s : res.snapshots) {
        for (std::size_t i = 0; i < s.U.size(); ++i) {
            out << s.m << ',' << format_double(s.t) << ',' << format_double(res.x[i]) << ',' << format_double(s.U[i])
                << '\n';
        }
    }
}

inline void write_l2_errors_csv(std::ostream& out, const ParabolicResult& res)
{
    out << "m,t_m,l2_error,residual\n";
    for (std::size_t m = 0; m < res.t.size(); ++m) {
        out << m << ',' << format_double(res.t[m]) << ','
            << (res.l2_error.empty() ? std::string("nan") : format_double(res.l2_error[m])) << ','
            << format_double(res.residual[m]) << '\n';
    }
}

inline void write_pointwise_csv(std::ostream& out, const std::vector<PointwiseRow>& rows)
{
    out << "m,t_m,abs_error,envelope,ratio\n";
    for (const auto& r : rows) {
        out << r.m << ',' << format_double(r.t) << ',' << format_double(r.abs_error) << ','
            << format_double(r.envelope) << ',' << format_double(r.ratio) << '\n';
    }
}

// --- convergence tables ---------------------------------------------------

inline void write_table_csv(std::ostream& out, const ConvergenceTable& t, std::string_view version_line = {})
{
    if (!version_line.empty()) {
        out << "# " << version_line << '\n';
    }
    out << "problem,metric,rule,alpha,r,M,error,rate,status\n";
    for (const auto& c : t.cells) {
        out << problem_name(t.spec.problem) << ',' << metric_name(t.spec.metric) << ','
            << grading_label(t.spec.rules[c.rule]) << ',' << format_double(c.alpha) << ',' << format_double(c.r)
            << ',' << c.M << ',' << format_double(c.error) << ',' << format_double(c.rate) << ','
            << (c.ok ? "ok" : "failed") << '\n';
    }
}

/// Two-row layout: per grading rule and alpha an error row (%.3e)
/// followed by a rate row (%.3f) shifted by one column.
inline void write_table_text(std::ostream& out, const ConvergenceTable& t)
{
    constexpr int label_width = 22;
    constexpr int col = 11;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) {
            s.insert(0, w - s.size(), ' ');
        }
        return s;
    };
    out << problem_name(t.spec.problem) << ", metric " << metric_name(t.spec.metric) << ", "
        << mesh_variant_name(t.spec.mesh) << " mesh\n";
    out << std::string(label_width, ' ');
    for (const int M : t.spec.Ms) {
        out << pad("M=" + std::to_string(M), col);
    }
    out << '\n';
    const std::size_t nM = t.spec.Ms.size();
    for (std::size_t ri = 0; ri < t.spec.rules.size(); ++ri) {
        for (std::size_t ai = 0; ai < t.spec.alphas.size(); ++ai) {
            std::string label = ai == 0 ? "r=" + grading_label(t.spec.rules[ri]) : std::string();
            label.resize(12, ' ');
            label += "alpha=" + format_double(t.spec.alphas[ai]);
            label.resize(label_width, ' ');
            out << label;
            for (std::size_t k = 0; k < nM; ++k) {
                const auto& c = t.cell(ri, ai, k);
                out << pad(c.ok ? format_sci3(c.error) : "failed", col);
            }
            out << '\n' << std::string(label_width, ' ');
            for (std::size_t k = 1; k < nM; ++k) {
                const auto& c = t.cell(ri, ai, k);
                out << pad(std::isnan(c.rate) ? "-" : format_fixed3(c.rate), col);
            }
            out << '\n';
        }
    }
}

inline nlohmann::json campaign_json(const CampaignSpec& s)
{
    nlohmann::json j;
    j["problem"] = problem_name(s.problem);
    j["metric"] = metric_name(s.metric);
    j["alphas"] = s.alphas;
    std::vector<std::string> rules;
    for (const auto& r : s.rules) {
        rules.push_back(grading_label(r));
    }
    j["r"] = rules;
    j["M"] = s.Ms;
    j["mesh"] = mesh_variant_name(s.mesh);
    j["theta"] = s.theta;
    j["T"] = s.T;
    j["N"] = s.N;
    return j;
}

inline nlohmann::json table_json(const ConvergenceTable& t)
{
    nlohmann::json j;
    j["campaign"] = campaign_json(t.spec);
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : t.cells) {
        nlohmann::json cj;
        cj["rule"] = grading_label(t.spec.rules[c.rule]);
        cj["alpha"] = c.alpha;
        cj["r"] = c.r;
        cj["M"] = c.M;
        cj["status"] = c.ok ? "ok" : "failed";
        if (c.ok) {
            cj["error"] = c.error;
        } else {
            cj["message"] = c.message;
        }
        if (!std::isnan(c.rate)) {
            cj["rate"] = c.rate;
        }
        cells.push_back(cj);
    }
    j["cells"] = cells;
    return j;
}

// --- certificates ---------------------------------------------------------

inline nlohmann::json certificate_json(const MonotoneCertificate& c, bool include_rows = true)
{
    nlohmann::json j;
    j["alpha"] = c.alpha;
    j["theta"] = c.theta;
    j["sigma_bar"] = c.sigma_bar;
    j["rho_bar"] = c.rho_bar;
    j["K"] = c.K;
    j["variant"] = c.variant.is_standard() ? "standard" : "l1_start";
    j["passed"] = c.passed();

    double bmin = std::numeric_limits<double>::infinity();
    double bmax = -bmin;
    for (std::size_t i = 1; i < c.betas.size(); ++i) {
        bmin = std::min(bmin, c.betas[i]);
        bmax = std::max(bmax, c.betas[i]);
    }
    j["betas_summary"] = {{"count", c.betas.size() - 1},
                          {"min", bmin},
                          {"max", bmax},
                          {"first", c.betas.size() > 1 ? c.betas[1] : 0.0},
                          {"last", c.betas.back()}};
    if (c.first_failure) {
        j["first_failure"] = {{"m", c.first_failure->m}, {"condition", c.first_failure->condition}};
    } else {
        j["first_failure"] = nullptr;
    }
    if (include_rows) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& k : c.checks) {
            nlohmann::json r;
            r["m"] = k.m;
            r["beta"] = c.betas[static_cast<std::size_t>(k.m)];
            if (!std::isnan(k.sigma)) {
                r["sigma"] = k.sigma;
            }
            r["sigma_admissible"] = k.sigma_admissible;
            r["key_AB_1"] = {{"value", k.key1}, {"pass", k.key1_pass}};
            if (k.key2_applies) {
                r["key_AB_2"] = {{"value", k.key2}, {"pass", k.key2_pass}};
            }
            if (k.ratio_applies) {
                r["ratio_bound"] = {{"value", k.ratio}, {"pass", k.ratio_pass}};
            }
            rows.push_back(r);
        }
        j["conditions"] = rows;
    }
    j["inverse_checked"] = c.inverse_checked;
    if (c.inverse_checked) {
        j["verified_inverse_nonneg"] = c.verified_inverse_nonneg;
        j["inverse_min_entry"] = c.inverse_min_entry;
    } else {
        j["inverse_min_entry"] = nullptr;
    }
    return j;
}

} // namespace l2frac
