#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <l2frac/l2frac.hpp>

namespace fs = std::filesystem;
using namespace l2frac;

namespace {

constexpr const char* version_string = "l2frac 1.0.0";
constexpr const char* output_env = "L2FRAC_OUTPUT_DIR";

enum ExitCode { exit_ok = 0, exit_numerical = 1, exit_config = 2 };

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct MeshOptions {
    std::string file;
    double T = 1.0;
    int M = 0;
    double r = 1.0;
    bool uniform = false;
    bool modified = false;
    int K = 0;  // 0 = automatic for the modified mesh
};

void add_mesh_options(CLI::App* cmd, MeshOptions& o)
{
    cmd->add_option("--file,--mesh-file", o.file, "Read the mesh from a file instead of generating it");
    cmd->add_option("--T", o.T, "Final time")->capture_default_str();
    cmd->add_option("--M", o.M, "Number of time steps");
    cmd->add_option("--r", o.r, "Grading exponent")->capture_default_str();
    cmd->add_flag("--uniform", o.uniform, "Uniform mesh");
    cmd->add_flag("--modified", o.modified, "Modified graded mesh with shift K");
    cmd->add_option("--K", o.K, "Shift of the modified mesh / prefix of the L1-start operator (default: computed)");
}

struct ResolvedMesh {
    TemporalMesh mesh;
    int K = 1;
    bool K_auto = false;
    double sigma_bar = 0.0;
};

int auto_K(double r, double alpha, double theta, double& sbar)
{
    sbar = sigma_bar(alpha, theta).value;
    return compute_K(r, sbar);
}

ResolvedMesh resolve_mesh(const MeshOptions& o, std::optional<double> alpha, double theta)
{
    if (!o.file.empty()) {
        return {read_mesh_file(o.file), std::max(1, o.K), false, 0.0};
    }
    if (o.M == 0) {
        throw ConfigError("a mesh needs --M (or --file)");
    }
    if (o.uniform && o.modified) {
        throw ConfigError("--uniform and --modified are mutually exclusive");
    }
    MeshSpec spec{o.T, o.M, o.r, MeshVariant::graded, 1};
    ResolvedMesh out{TemporalMesh({0.0, 1.0}), 1, false, 0.0};
    if (o.uniform) {
        spec.variant = MeshVariant::uniform;
        spec.r = 1.0;
    } else if (o.modified) {
        spec.variant = MeshVariant::modified_graded;
        if (o.K > 0) {
            spec.K = o.K;
        } else {
            if (!alpha) {
                throw ConfigError("--modified without --K needs --alpha to compute K");
            }
            spec.K = auto_K(o.r, *alpha, theta, out.sigma_bar);
            out.K_auto = true;
        }
    }
    out.mesh = build_graded(spec);
    out.K = spec.K;
    return out;
}

std::ostream& open_output(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-") {
        return std::cout;
    }
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    file.open(path);
    if (!file) {
        throw ConfigError("cannot write '" + path + "'");
    }
    return file;
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
    return buf.data();
}

fs::path output_root(const std::string& flag)
{
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv(output_env); env != nullptr && *env != '\0') {
        return env;
    }
    return "runs";
}

// --- mesh -----------------------------------------------------------------

struct MeshCmd {
    MeshOptions mesh;
    std::optional<double> alpha;
    double theta = 1.0;
    std::string out;
};

int run_mesh(const MeshCmd& c)
{
    const ResolvedMesh rm = resolve_mesh(c.mesh, c.alpha, c.theta);
    const RegularityReport rep = check_mesh_regularity(rm.mesh, c.mesh.uniform ? 1.0 : c.mesh.r);
    std::vector<std::string> notes;
    if (c.mesh.file.empty()) {
        const std::string kind = c.mesh.uniform ? "uniform" : (c.mesh.modified ? "modified" : "graded");
        notes.push_back("variant=" + kind + " r=" + format_double(c.mesh.uniform ? 1.0 : c.mesh.r));
    }
    if (c.mesh.modified) {
        std::string k = "K=" + std::to_string(rm.K);
        if (rm.K_auto) {
            k += " (auto, sigma_bar=" + format_double(rm.sigma_bar) + " theta=" + format_double(c.theta) + ")";
        }
        notes.push_back(k);
    }
    notes.push_back(std::string("sigma_monotone_nonnegative=") + (rep.sigma_monotone_nonnegative ? "true" : "false") +
                    (rep.first_sigma_violation > 0 ? " first_violation=" + std::to_string(rep.first_sigma_violation)
                                                   : std::string()));
    notes.push_back(std::string("rho_monotone_at_least_one=") + (rep.rho_monotone_at_least_one ? "true" : "false"));
    notes.push_back("step_similarity=[" + format_double(rep.step_similarity.min) + ", " +
                    format_double(rep.step_similarity.max) + "]");
    notes.push_back("node_similarity=[" + format_double(rep.node_similarity.min) + ", " +
                    format_double(rep.node_similarity.max) + "]");
    if (rm.K_auto) {
        std::cerr << "K=" << rm.K << '\n';
    }
    std::ofstream f;
    write_mesh(open_output(c.out, f), rm.mesh, notes);
    return exit_ok;
}

// --- certify --------------------------------------------------------------

struct CertifyCmd {
    MeshOptions mesh;
    double alpha = 0.5;
    double theta = 1.0;
    std::string variant = "standard";
    bool verify_inverse = false;
    int inverse_cap = 512;
    bool rows = false;
    bool energy = false;
    bool require_pass = false;
    std::string out;
};

int run_certify(const CertifyCmd& c)
{
    if (c.variant != "standard" && c.variant != "l1_start") {
        throw ConfigError("--variant must be standard or l1_start");
    }
    ResolvedMesh rm = resolve_mesh(c.mesh, c.alpha, c.theta);
    OperatorVariant variant = OperatorVariant::standard();
    if (c.variant == "l1_start") {
        int K = c.mesh.K;
        if (K == 0) {
            if (!c.mesh.file.empty()) {
                throw ConfigError("l1_start with a mesh file needs an explicit --K");
            }
            double sb = 0.0;
            K = auto_K(c.mesh.r, c.alpha, c.theta, sb);
        }
        variant = OperatorVariant::l1_start(K);
    }
    CertifyOptions opts;
    opts.verify_inverse = c.verify_inverse;
    opts.inverse_cap = c.inverse_cap;
    if (c.verify_inverse && rm.mesh.steps() > c.inverse_cap) {
        throw ConfigError("--verify-inverse: M = " + std::to_string(rm.mesh.steps()) + " exceeds --inverse-cap " +
                          std::to_string(c.inverse_cap));
    }
    const MonotoneCertificate cert = certify(rm.mesh, c.alpha, c.theta, variant, opts);
    nlohmann::json j = certificate_json(cert, c.rows);
    j["M"] = rm.mesh.steps();
    if (c.energy) {
        if (c.theta >= 1.0) {
            throw ConfigError("--energy needs theta in [1/2, 1)");
        }
        const ParabolicThreshold pt = sigma_star(c.alpha, c.theta);
        const auto checks = check_energy_condition(rm.mesh, c.alpha, c.theta, cert.betas, cert.K, variant);
        bool exact = true;
        bool sufficient = true;
        for (const auto& e : checks) {
            exact = exact && e.exact_pass;
            sufficient = sufficient && e.sufficient_pass;
        }
        j["energy"] = {{"rho_bar_star", pt.rho_bar_star},
                       {"sigma_star", pt.sigma_star},
                       {"exact_pass", exact},
                       {"sufficient_pass", sufficient}};
    }
    std::ofstream f;
    open_output(c.out, f) << j.dump(2) << '\n';
    if (cert.inverse_checked) {
        std::cerr << "inverse_min_entry=" << format_double(cert.inverse_min_entry) << '\n';
    }
    std::cerr << (cert.passed() ? "certified" : "not certified");
    if (cert.first_failure) {
        std::cerr << ": " << cert.first_failure->condition << " fails at m=" << cert.first_failure->m;
    }
    std::cerr << '\n';
    return (c.require_pass && !cert.passed()) ? exit_numerical : exit_ok;
}

// --- solve ----------------------------------------------------------------

struct SolveCmd {
    MeshOptions mesh;
    std::string preset = "talpha";
    double alpha = 0.5;
    double theta = 1.0;
    std::string variant = "standard";
    int N = 255;
    std::vector<double> snapshot_times;
    std::string snapshots_out;
    std::string out;
};

int nearest_step(const TemporalMesh& mesh, double t)
{
    const auto nodes = mesh.nodes();
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), t);
    if (it == nodes.end()) {
        return mesh.steps();
    }
    auto idx = static_cast<int>(it - nodes.begin());
    if (idx > 0 && std::abs(nodes[static_cast<std::size_t>(idx) - 1] - t) < std::abs(*it - t)) {
        --idx;
    }
    return idx;
}

int run_solve(const SolveCmd& c)
{
    MeshOptions mo = c.mesh;
    if (mo.M == 0 && mo.file.empty()) {
        mo.M = 32;
    }
    const ResolvedMesh rm = resolve_mesh(mo, c.alpha, c.theta);
    OperatorVariant variant = OperatorVariant::standard();
    if (c.variant == "l1_start") {
        variant = OperatorVariant::l1_start(std::max(1, mo.K));
    } else if (c.variant != "standard") {
        throw ConfigError("--variant must be standard or l1_start");
    }
    const double T = rm.mesh.final_time();
    std::ofstream f;
    if (c.preset == "sinx") {
        std::vector<int> steps;
        for (const double t : c.snapshot_times) {
            steps.push_back(nearest_step(rm.mesh, t));
        }
        const ParabolicResult res = solve_parabolic_1d(sinx_problem(c.alpha, c.N, T), rm.mesh, variant, steps);
        write_l2_errors_csv(open_output(c.out, f), res);
        if (!c.snapshots_out.empty()) {
            std::ofstream sf;
            write_snapshots_csv(open_output(c.snapshots_out, sf), res);
        }
        std::cerr << "final_l2_error=" << format_sci3(res.final_l2_error())
                  << " max_l2_error=" << format_sci3(res.max_l2_error()) << '\n';
        return exit_ok;
    }
    ScalarProblem problem;
    if (c.preset == "talpha") {
        problem = talpha_problem(c.alpha, T);
    } else if (c.preset == "quad") {
        problem = quad_problem(c.alpha, T);
    } else if (c.preset == "zero") {
        problem = zero_problem(c.alpha, T);
    } else {
        throw ConfigError("unknown preset '" + c.preset + "' (talpha, quad, zero, sinx)");
    }
    const SolveResult res = solve_scalar(problem, rm.mesh, variant);
    write_solution_csv(open_output(c.out, f), res);
    std::cerr << "final_error=" << format_sci3(res.final_abs_error())
              << " max_error=" << format_sci3(res.max_abs_error())
              << '\n';
    return exit_ok;
}

// --- table ----------------------------------------------------------------

struct TableCmd {
    std::string campaign_preset;
    std::string problem = "talpha";
    std::string metric = "at_final";
    std::string mesh = "graded";
    std::vector<double> alphas;
    std::vector<std::string> rules;
    std::vector<int> Ms;
    int max_M = 0;
    double theta = 1.0;
    double T = 1.0;
    int N = 4095;
    unsigned threads = 0;
    std::string out_dir;
    bool quiet = false;
};

std::vector<int> powers_of_two(int from, int to, int step)
{
    std::vector<int> out;
    for (int e = from; e <= to; e += step) {
        out.push_back(1 << e);
    }
    return out;
}

CampaignSpec campaign_from(const TableCmd& c, const CLI::App& cmd)
{
    CampaignSpec s;
    if (!c.campaign_preset.empty()) {
        s.alphas = {0.3, 0.5, 0.7};
        if (c.campaign_preset == "errors-at-1") {
            s.metric = ErrorMetric::at_final;
            s.rules = {GradingRule::fixed_r(1.0), GradingRule::three_minus_alpha_over(0.95), GradingRule::optimal()};
            s.Ms = powers_of_two(5, 15, 2);
        } else if (c.campaign_preset == "max-nodal") {
            s.metric = ErrorMetric::max_nodal;
            s.rules = {GradingRule::fixed_r(1.0), GradingRule::three_minus_alpha_over(1.0), GradingRule::optimal()};
            s.Ms = powers_of_two(5, 15, 2);
        } else if (c.campaign_preset == "parabolic") {
            s.problem = ProblemKind::sinx;
            s.metric = ErrorMetric::max_l2;
            s.rules = {GradingRule::optimal()};
            s.Ms = powers_of_two(5, 10, 1);
        } else {
            throw ConfigError("unknown --paper preset '" + c.campaign_preset + "' (errors-at-1, max-nodal, parabolic)");
        }
    } else {
        s.problem = parse_problem(c.problem);
        s.metric = parse_metric(c.metric);
    }
    // explicit values override the preset
    if (cmd.count("--alpha") > 0 || c.campaign_preset.empty()) {
        s.alphas = c.alphas;
    }
    if (cmd.count("--r") > 0 || c.campaign_preset.empty()) {
        s.rules.clear();
        for (const auto& r : c.rules) {
            s.rules.push_back(parse_grading_rule(r));
        }
    }
    if (cmd.count("--M") > 0 || c.campaign_preset.empty()) {
        s.Ms = c.Ms;
    }
    if (cmd.count("--metric") > 0) {
        s.metric = parse_metric(c.metric);
    }
    if (c.max_M > 0) {
        std::erase_if(s.Ms, [&](int M) { return M > c.max_M; });
    }
    s.mesh = parse_mesh_variant(c.mesh);
    s.theta = c.theta;
    s.T = c.T;
    s.N = c.N;
    s.threads = c.threads;
    if (s.alphas.empty() || s.rules.empty() || s.Ms.empty()) {
        throw ConfigError("table: nothing to run; give --paper or non-empty --alpha, --r and --M lists");
    }
    return s;
}

int run_table(const TableCmd& c, const CLI::App& cmd)
{
    const CampaignSpec spec = campaign_from(c, cmd);
    const std::string canonical = campaign_json(spec).dump();
    const fs::path dir = output_root(c.out_dir) / ("table-" + hex64(fnv1a(canonical)));
    fs::create_directories(dir);

    const ConvergenceTable table = build_table(spec);

    std::ofstream(dir / "config.json") << campaign_json(spec).dump(2) << '\n';
    {
        std::ofstream f(dir / "table.csv");
        write_table_csv(f, table, version_string);
    }
    {
        std::ofstream f(dir / "table.txt");
        write_table_text(f, table);
    }
    {
        nlohmann::json j = table_json(table);
        j["version"] = version_string;
        std::ofstream(dir / "table.json") << j.dump(2) << '\n';
    }
    if (!c.quiet) {
        write_table_text(std::cout, table);
    }
    std::cerr << "wrote " << dir.string() << '\n';
    bool failed = false;
    for (const auto& cell : table.cells) {
        if (!cell.ok) {
            std::cerr << "cell alpha=" << format_double(cell.alpha) << " r=" << format_double(cell.r) << " M=" << cell.M
                      << " failed: " << cell.message << '\n';
            failed = true;
        }
    }
    return failed ? exit_numerical : exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Discrete Caputo derivative toolkit: meshes, monotonicity certificates, solvers and rate tables"};
    app.set_version_flag("--version", version_string);
    app.set_config("--config", "", "TOML configuration file; command-line flags override its values");
    app.require_subcommand(1);

    MeshCmd mesh_cmd;
    auto* mesh = app.add_subcommand("mesh", "Generate or read a temporal mesh and report its regularity");
    add_mesh_options(mesh, mesh_cmd.mesh);
    mesh->add_option("--alpha", mesh_cmd.alpha, "Fractional order (needed for automatic K)");
    mesh->add_option("--theta", mesh_cmd.theta, "Theta used for automatic K")->capture_default_str();
    mesh->add_option("--out", mesh_cmd.out, "Output file (default stdout)");

    CertifyCmd cert_cmd;
    auto* cert = app.add_subcommand("certify", "Check the inverse-monotonicity conditions on a mesh");
    add_mesh_options(cert, cert_cmd.mesh);
    cert->add_option("--alpha", cert_cmd.alpha, "Fractional order")->capture_default_str();
    cert->add_option("--theta", cert_cmd.theta, "Theta in [1/2, 1]")->capture_default_str();
    cert->add_option("--variant", cert_cmd.variant, "standard or l1_start")->capture_default_str();
    cert->add_flag("--verify-inverse", cert_cmd.verify_inverse, "Brute-force the inverse matrix");
    cert->add_option("--inverse-cap", cert_cmd.inverse_cap, "Largest M for --verify-inverse")->capture_default_str();
    cert->add_flag("--rows", cert_cmd.rows, "Include per-row condition values");
    cert->add_flag("--energy", cert_cmd.energy, "Also check the parabolic step-ratio condition (theta < 1)");
    cert->add_flag("--require-pass", cert_cmd.require_pass, "Exit with status 1 when the mesh is not certified");
    cert->add_option("--out", cert_cmd.out, "Output file (default stdout)");

    SolveCmd solve_cmd;
    auto* solve = app.add_subcommand("solve", "Solve a model problem and write the nodal solution");
    add_mesh_options(solve, solve_cmd.mesh);
    solve->add_option("--preset", solve_cmd.preset, "talpha, quad, zero or sinx")->capture_default_str();
    solve->add_option("--alpha", solve_cmd.alpha, "Fractional order")->capture_default_str();
    solve->add_option("--theta", solve_cmd.theta, "Theta used for automatic K")->capture_default_str();
    solve->add_option("--variant", solve_cmd.variant, "standard or l1_start")->capture_default_str();
    solve->add_option("--N", solve_cmd.N, "Interior grid nodes (sinx)")->capture_default_str();
    solve->add_option("--snapshot-times", solve_cmd.snapshot_times, "Field snapshot times (sinx)")->delimiter(',');
    solve->add_option("--snapshots-out", solve_cmd.snapshots_out, "Snapshot CSV file (sinx)");
    solve->add_option("--out", solve_cmd.out, "Output file (default stdout)");

    TableCmd table_cmd;
    auto* table = app.add_subcommand("table", "Run an (alpha, r, M) convergence campaign");
    table->add_option("--paper", table_cmd.campaign_preset, "Preset: errors-at-1, max-nodal or parabolic");
    table->add_option("--problem", table_cmd.problem, "talpha or sinx")->capture_default_str();
    table->add_option("--metric", table_cmd.metric, "at_final, max_nodal, l2_final or max_l2")->capture_default_str();
    table->add_option("--mesh", table_cmd.mesh, "graded, uniform or modified")->capture_default_str();
    table->add_option("--alpha", table_cmd.alphas, "Fractional orders")->delimiter(',');
    table->add_option("--r", table_cmd.rules, "Grading rules: number, 3-a, (3-a)/a or (3-a)/d")->delimiter(',');
    table->add_option("--M", table_cmd.Ms, "Step counts")->delimiter(',');
    table->add_option("--max-M", table_cmd.max_M, "Drop step counts above this value");
    table->add_option("--theta", table_cmd.theta, "Theta for modified meshes")->capture_default_str();
    table->add_option("--T", table_cmd.T, "Final time")->capture_default_str();
    table->add_option("--N", table_cmd.N, "Interior grid nodes (sinx)")->capture_default_str();
    table->add_option("--threads", table_cmd.threads, "Worker cap (0 = all cores)")->capture_default_str();
    table->add_option("--out-dir", table_cmd.out_dir,
                      std::string("Output root (default $") + output_env + " or ./runs)");
    table->add_flag("--quiet", table_cmd.quiet, "Do not print the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (mesh->parsed()) {
            return run_mesh(mesh_cmd);
        }
        if (cert->parsed()) {
            return run_certify(cert_cmd);
        }
        if (solve->parsed()) {
            return run_solve(solve_cmd);
        }
        return run_table(table_cmd, *table);
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return exit_numerical;
    }
}
