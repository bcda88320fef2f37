#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace l2frac {

/// Temporal mesh 0 = t_0 < t_1 < ... < t_M = T.
///
/// Steps, averaged steps, step ratios and skews are derived once at
/// construction. Indexing follows the node index j; quantities that are
/// undefined for a given j (e.g. the ratio at j = 1) hold NaN.
class TemporalMesh {
public:
    explicit TemporalMesh(std::vector<double> nodes) : nodes_(std::move(nodes))
    {
        if (nodes_.size() < 2) {
            throw std::invalid_argument("temporal mesh needs at least two nodes");
        }
        if (nodes_.front() != 0.0) {
            throw std::invalid_argument("temporal mesh must start at t_0 = 0");
        }
        for (std::size_t j = 1; j < nodes_.size(); ++j) {
            if (!(nodes_[j] > nodes_[j - 1]) || !std::isfinite(nodes_[j])) {
                throw std::invalid_argument("temporal mesh nodes must be strictly increasing (violated at j = " +
                                            std::to_string(j) + ")");
            }
        }
        const std::size_t n = nodes_.size();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        tau_.assign(n, nan);
        tilde_tau_.assign(n, nan);
        rho_.assign(n, nan);
        sigma_.assign(n, nan);
        for (std::size_t j = 1; j < n; ++j) {
            tau_[j] = nodes_[j] - nodes_[j - 1];
        }
        tilde_tau_[1] = tau_[1];
        for (std::size_t j = 2; j < n; ++j) {
            tilde_tau_[j] = 0.5 * (tau_[j - 1] + tau_[j]);
            rho_[j] = tau_[j] / tau_[j - 1];
            sigma_[j] = (tau_[j] - tau_[j - 1]) / (tau_[j] + tau_[j - 1]);
        }
    }

    /// Number of steps M.
    [[nodiscard]] int steps() const noexcept { return static_cast<int>(nodes_.size()) - 1; }
    [[nodiscard]] double final_time() const noexcept { return nodes_.back(); }

    [[nodiscard]] double t(int j) const { return nodes_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] double tau(int j) const { return tau_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] double tilde_tau(int j) const { return tilde_tau_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] double rho(int j) const { return rho_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] double sigma(int j) const { return sigma_[static_cast<std::size_t>(j)]; }

    [[nodiscard]] std::span<const double> nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::span<const double> taus() const noexcept { return tau_; }
    [[nodiscard]] std::span<const double> tilde_taus() const noexcept { return tilde_tau_; }
    [[nodiscard]] std::span<const double> rhos() const noexcept { return rho_; }
    [[nodiscard]] std::span<const double> sigmas() const noexcept { return sigma_; }

private:
    std::vector<double> nodes_;
    std::vector<double> tau_;
    std::vector<double> tilde_tau_;
    std::vector<double> rho_;
    std::vector<double> sigma_;
};

enum class MeshVariant { uniform, graded, modified_graded };

struct MeshSpec {
    double T = 1.0;
    int M = 2;
    double r = 1.0;
    MeshVariant variant = MeshVariant::graded;
    /// Shift parameter of the modified graded mesh; K = 1 is the standard graded mesh.
    int K = 1;
};

/// Builds t_j = T (j/M)^r, its uniform special case, or the modified graded
/// mesh t_j = T th_j / th_M with th_j = ((j+K-1)/M)^r - ((K-1)/M)^r.
inline TemporalMesh build_graded(const MeshSpec& spec)
{
    if (!(spec.T > 0.0) || !std::isfinite(spec.T)) {
        throw std::invalid_argument("mesh: T must be positive");
    }
    if (spec.M < 2) {
        throw std::invalid_argument("mesh: M must be at least 2");
    }
    if (!(spec.r >= 1.0) || !std::isfinite(spec.r)) {
        throw std::invalid_argument("mesh: grading exponent r must be >= 1");
    }
    if (spec.variant == MeshVariant::modified_graded && spec.K < 1) {
        throw std::invalid_argument("mesh: modified graded mesh requires K >= 1");
    }

    const int M = spec.M;
    const double Md = static_cast<double>(M);
    std::vector<double> nodes(static_cast<std::size_t>(M) + 1);
    nodes[0] = 0.0;
    switch (spec.variant) {
    case MeshVariant::uniform:
        for (int j = 1; j < M; ++j) {
            nodes[static_cast<std::size_t>(j)] = spec.T * (static_cast<double>(j) / Md);
        }
        break;
    case MeshVariant::graded:
        for (int j = 1; j < M; ++j) {
            nodes[static_cast<std::size_t>(j)] = spec.T * std::pow(static_cast<double>(j) / Md, spec.r);
        }
        break;
    case MeshVariant::modified_graded: {
        const double shift = static_cast<double>(spec.K - 1);
        const double base = std::pow(shift / Md, spec.r);
        const double top = std::pow((Md + shift) / Md, spec.r) - base;
        for (int j = 1; j < M; ++j) {
            const double hat = std::pow((static_cast<double>(j) + shift) / Md, spec.r) - base;
            nodes[static_cast<std::size_t>(j)] = spec.T * hat / top;
        }
        break;
    }
    }
    nodes[static_cast<std::size_t>(M)] = spec.T;
    // The constructor rejects any loss of monotonicity from pow rounding.
    return TemporalMesh(std::move(nodes));
}

/// Value of the unnormalised last node th_M = (1 + (K-1)/M)^r - ((K-1)/M)^r.
inline double modified_graded_scale(int M, double r, int K)
{
    const double shift = static_cast<double>(K - 1) / static_cast<double>(M);
    return std::pow(1.0 + shift, r) - std::pow(shift, r);
}

struct MeshQuantities {
    std::vector<double> tau;
    std::vector<double> tilde_tau;
    std::vector<double> rho;
    std::vector<double> sigma;
};

inline MeshQuantities mesh_quantities(const TemporalMesh& mesh)
{
    auto copy = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
    return {copy(mesh.taus()), copy(mesh.tilde_taus()), copy(mesh.rhos()), copy(mesh.sigmas())};
}

struct RatioRange {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double v) noexcept
    {
        min = std::min(min, v);
        max = std::max(max, v);
    }
};

/// Regularity audit of a mesh against the quasi-graded hypotheses. Purely
/// diagnostic: the similarity ratios are reported, never judged.
struct RegularityReport {
    bool sigma_monotone_nonnegative = true;
    bool rho_monotone_at_least_one = true;
    int first_sigma_violation = -1;
    RatioRange tau1_scaled;      // tau_1 M^r
    RatioRange step_similarity;  // tau_j j / t_j
    RatioRange node_similarity;  // t_j / (tau_1 j^r)
};

inline RegularityReport check_mesh_regularity(const TemporalMesh& mesh, double r)
{
    RegularityReport rep;
    const int M = mesh.steps();
    auto tol = [](double s) { return 1e-14 * std::max(1.0, std::abs(s)); };

    for (int j = 2; j <= M; ++j) {
        const double s = mesh.sigma(j);
        bool ok = s >= -tol(s);
        if (j < M) {
            ok = ok && s >= mesh.sigma(j + 1) - tol(s);
        }
        if (!ok && rep.sigma_monotone_nonnegative) {
            rep.sigma_monotone_nonnegative = false;
            rep.first_sigma_violation = j;
        }
        const double p = mesh.rho(j);
        bool rok = p >= 1.0 - tol(p);
        if (j < M) {
            rok = rok && p >= mesh.rho(j + 1) - tol(p);
        }
        rep.rho_monotone_at_least_one = rep.rho_monotone_at_least_one && rok;
    }

    const double tau1 = mesh.tau(1);
    rep.tau1_scaled.add(tau1 * std::pow(static_cast<double>(M), r));
    for (int j = 1; j <= M; ++j) {
        const double jd = static_cast<double>(j);
        rep.step_similarity.add(mesh.tau(j) * jd / mesh.t(j));
        rep.node_similarity.add(mesh.t(j) / (tau1 * std::pow(jd, r)));
    }
    return rep;
}

// Mesh file: one node per line, ascending, optional header "# T=<val> M=<val>".

inline TemporalMesh parse_mesh(std::istream& in)
{
    std::vector<double> nodes;
    double header_T = std::numeric_limits<double>::quiet_NaN();
    long header_M = -1;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            continue;
        }
        if (line[first] == '#') {
            std::istringstream hs(line.substr(first + 1));
            std::string tok;
            while (hs >> tok) {
                if (tok.rfind("T=", 0) == 0) {
                    header_T = std::stod(tok.substr(2));
                } else if (tok.rfind("M=", 0) == 0) {
                    header_M = std::stol(tok.substr(2));
                }
            }
            continue;
        }
        std::istringstream ls(line);
        double v = 0.0;
        if (!(ls >> v)) {
            throw std::invalid_argument("mesh file: unparsable value on line " + std::to_string(lineno));
        }
        nodes.push_back(v);
    }
    if (header_M >= 0 && static_cast<std::size_t>(header_M) + 1 != nodes.size()) {
        throw std::invalid_argument("mesh file: header M=" + std::to_string(header_M) + " but " +
                                    std::to_string(nodes.size()) + " nodes present");
    }
    if (!std::isnan(header_T) && !nodes.empty() && std::abs(nodes.back() - header_T) > 1e-12 * header_T) {
        throw std::invalid_argument("mesh file: header T does not match the last node");
    }
    TemporalMesh mesh(std::move(nodes));
    if (mesh.steps() < 2) {
        throw std::invalid_argument("mesh file: need at least M = 2 steps");
    }
    return mesh;
}

inline TemporalMesh read_mesh_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open mesh file '" + path + "'");
    }
    return parse_mesh(in);
}

} // namespace l2frac
