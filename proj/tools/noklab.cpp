// noklab: command-line front end for structured proximal-iteration runs,
// certificate suites, unsupervised fits, kernel construction, and
// generalization-bound calculators.
//
// Exit codes: 0 all checks pass, 1 checks ran and failed, 2 usage/input error.

#include <CLI11.hpp>

#include <chrono>
#include <limits>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nok/nok.hpp"

namespace {

using nok::json;

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void print_check(const nok::CheckResult& c) {
    std::printf("%-28s %s  max_violation=%.6e  tol=%.6e\n", c.name.c_str(),
                c.passed ? "PASS" : "FAIL", c.max_violation, c.tolerance);
}

long resolve_threads(long cli_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("NOKLAB_THREADS")) {
        const long v = std::atol(env);
        if (v > 0) return v;
    }
    return 1;
}

// per-check seeds derived from the master seed by splitmix64
std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Eigen::VectorXd random_unit(Eigen::Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = gauss(rng);
    return v / v.norm();
}

struct CommonFlags {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    long threads = 0;
};

nok::RunConfig load_config(const CommonFlags& flags) {
    nok::RunConfig cfg =
        flags.config_path.empty() ? nok::RunConfig() : nok::RunConfig::load(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.threads > 0) cfg.threads = flags.threads;
    cfg.threads = resolve_threads(cfg.threads);
    return cfg;
}

int finish(const nok::RunConfig& cfg, const std::vector<nok::CheckResult>& checks,
           const json& traces, const json& bounds, const std::string& out_path) {
    for (const auto& c : checks) print_check(c);
    if (!out_path.empty()) {
        nok::write_report(nok::make_report(cfg.to_json(), checks, traces, bounds, utc_timestamp()),
                          out_path);
        std::printf("report written to %s\n", out_path.c_str());
    }
    for (const auto& c : checks)
        if (!c.passed) return 1;
    return 0;
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

int cmd_design(long n, long m, bool randomize, std::optional<std::uint64_t> seed,
               const std::string& out_path, const std::string& design_out) {
    nok::StructuredDesign design = nok::build_design(n, m);
    if (randomize) design = nok::randomize_design(design, seed.value_or(0));

    const double mu = nok::mutual_coherence(design.matrix());
    const double bound = nok::coherence_bound(design);
    std::printf("design n=%ld m=%ld d=%ld N=%ld\n", design.n(), design.m(), design.dim(),
                design.samples());
    std::printf("coherence=%.12f  coherence_bound=%.12f\n", mu, bound);

    std::vector<nok::CheckResult> checks = {
        {"coherence_bound", mu <= bound + 1e-12, mu - bound, 1e-12}};
    json bounds;
    bounds["coherence"] = mu;
    bounds["coherence_bound"] = bound;

    if (!design_out.empty()) {
        std::ofstream out(design_out);
        if (!out) throw nok::IoError("cannot open '" + design_out + "' for writing");
        out << nok::design_to_json(design).dump(2) << '\n';
        std::printf("design written to %s\n", design_out.c_str());
    }

    for (const auto& c : checks) print_check(c);
    if (!out_path.empty()) {
        nok::write_report(
            nok::make_report(nok::design_to_json(design), checks, json::object(), bounds, utc_timestamp()),
            out_path);
        std::printf("report written to %s\n", out_path.c_str());
    }
    return checks.front().passed ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

void run_monotonic_suite(const nok::RunConfig& cfg, std::vector<nok::CheckResult>& checks) {
    const nok::NokConfig ncfg = cfg.make_nok_config();
    double max_viol = -std::numeric_limits<double>::infinity();
    double max_gap = 0.0;
    double tol = 0.0;
    double id_tol = 0.0;
    for (long s = 0; s < cfg.seeds_per_check; ++s) {
        const Eigen::VectorXd x = random_unit(ncfg.design->dim(), child_seed(cfg.seed, s));
        const nok::Trajectory traj = nok::forward(ncfg, x);
        const nok::DescentReport rep =
            nok::verify_monotonic(ncfg, traj, cfg.tolerances.descent, cfg.tolerances.identity);
        max_viol = std::max(max_viol, rep.max_violation);
        max_gap = std::max(max_gap, rep.max_identity_gap);
        tol = std::max(tol, rep.tolerance);
        id_tol = std::max(id_tol, rep.identity_tolerance);
    }
    checks.push_back({"monotonic_descent", max_viol < tol, max_viol, tol});
    checks.push_back({"descent_identity", max_gap < id_tol, max_gap, id_tol});
}

void run_rate_suite(const nok::RunConfig& cfg, std::vector<nok::CheckResult>& checks) {
    if (!cfg.penalty.is_convex())
        throw nok::UnsupportedOperationError("rate check requires convex penalty");
    const nok::NokConfig ncfg = cfg.make_nok_config();
    double max_simple = -std::numeric_limits<double>::infinity();
    double max_tele = -std::numeric_limits<double>::infinity();
    double tol = 0.0;
    for (long s = 0; s < cfg.seeds_per_check; ++s) {
        const Eigen::VectorXd x = random_unit(ncfg.design->dim(), child_seed(cfg.seed, 1000 + s));
        const Eigen::VectorXd y_star = nok::fixed_point(ncfg, x);
        const nok::Trajectory traj = nok::forward(ncfg, x);
        const nok::RateReport rep = nok::verify_convex_rate(ncfg, traj, y_star, cfg.tolerances.rate);
        max_simple = std::max(max_simple, rep.max_violation_simple);
        max_tele = std::max(max_tele, rep.max_violation_telescoped);
        tol = std::max(tol, rep.tolerance);
    }
    checks.push_back({"convex_rate_simple", max_simple < tol, max_simple, tol});
    checks.push_back({"convex_rate_telescoped", max_tele < tol, max_tele, tol});
}

void run_ksparse_suite(const nok::RunConfig& cfg, std::vector<nok::CheckResult>& checks) {
    const auto design = cfg.make_design();
    const nok::RotationState I = nok::RotationState::identity(design->dim());
    const long k = cfg.penalty.family == nok::PenaltyFamily::TopK ? cfg.penalty.k : 1;
    double max_viol = -std::numeric_limits<double>::infinity();
    double tol = 0.0;
    bool ok = true;
    for (long s = 0; s < cfg.seeds_per_check; ++s) {
        const Eigen::VectorXd x = random_unit(design->dim(), child_seed(cfg.seed, 2000 + s));
        const nok::DescentReport rep =
            nok::ksparse_run_and_verify(design, I, x, k, cfg.T, cfg.tolerances.ksparse);
        max_viol = std::max(max_viol, rep.max_violation);
        tol = std::max(tol, rep.tolerance);
        ok = ok && rep.passed;
    }
    checks.push_back({"ksparse_descent", ok && max_viol < tol, max_viol, tol});
}

int cmd_verify(const std::string& suite, const CommonFlags& flags) {
    const nok::RunConfig cfg = load_config(flags);
    std::vector<nok::CheckResult> checks;
    if (suite == "monotonic" || suite == "all") run_monotonic_suite(cfg, checks);
    if (suite == "rate") run_rate_suite(cfg, checks);
    if (suite == "all") {
        if (cfg.penalty.is_convex())
            run_rate_suite(cfg, checks);
        else
            std::printf("convex_rate            skipped (non-convex penalty)\n");
    }
    if (suite == "ksparse" || suite == "all") run_ksparse_suite(cfg, checks);
    return finish(cfg, checks, json::object(), json::object(), flags.out_path);
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

int cmd_run(const CommonFlags& flags, const std::string& data_path, const std::string& iterates_path,
            long sample_index) {
    const nok::RunConfig cfg = load_config(flags);
    const nok::NokConfig ncfg = cfg.make_nok_config();
    const Eigen::MatrixXd X = nok::load_matrix(data_path);
    if (X.rows() != ncfg.design->dim())
        throw nok::InvalidInputError("data has " + std::to_string(X.rows()) +
                                     " features per sample, design needs " +
                                     std::to_string(ncfg.design->dim()));

    json trajectories = json::array();
    double max_viol = -std::numeric_limits<double>::infinity();
    double tol = 0.0;
    bool all_ok = true;
    std::vector<nok::Trajectory> trajs;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const nok::Trajectory traj = nok::forward(ncfg, X.col(j));
        const nok::DescentReport rep =
            nok::verify_monotonic(ncfg, traj, cfg.tolerances.descent, cfg.tolerances.identity);
        json entry;
        entry["Q"] = traj.objectives;
        entry["violations"] = rep.violations;
        entry["passed"] = rep.passed;
        trajectories.push_back(entry);
        max_viol = std::max(max_viol, rep.max_violation);
        tol = std::max(tol, rep.tolerance);
        all_ok = all_ok && rep.passed;
        trajs.push_back(traj);
    }

    if (!iterates_path.empty()) {
        if (sample_index < 0 || sample_index >= X.cols())
            throw nok::InvalidInputError("--sample out of range");
        const auto& iterates = trajs[static_cast<std::size_t>(sample_index)].iterates;
        Eigen::MatrixXd M(ncfg.design->samples(), static_cast<Eigen::Index>(iterates.size()));
        for (std::size_t t = 0; t < iterates.size(); ++t)
            M.col(static_cast<Eigen::Index>(t)) = iterates[t];
        nok::save_matrix(iterates_path, M);
        std::printf("iterates written to %s\n", iterates_path.c_str());
    }

    std::vector<nok::CheckResult> checks = {{"monotonic_descent", all_ok, max_viol, tol}};
    json traces;
    traces["trajectories"] = trajectories;
    return finish(cfg, checks, traces, json::object(), flags.out_path);
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const CommonFlags& flags, const std::string& data_path, const std::string& codes_out) {
    const nok::RunConfig cfg = load_config(flags);
    const auto design = cfg.make_design();
    const Eigen::MatrixXd X = nok::load_matrix(data_path);
    if (X.rows() != design->dim())
        throw nok::InvalidInputError("data has " + std::to_string(X.rows()) +
                                     " features per sample, design needs " +
                                     std::to_string(design->dim()));

    nok::AlternatingConfig acfg;
    acfg.inner_steps = cfg.T1;
    acfg.phases = cfg.T2;
    acfg.penalty = cfg.penalty;
    acfg.threads = cfg.threads;
    const nok::AlternatingResult res = nok::alternating_fit(X, design, acfg);

    const double slack = cfg.tolerances.alternating * (1.0 + res.objective_trace.front());
    double max_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < res.objective_trace.size(); ++i)
        max_increase = std::max(max_increase, res.objective_trace[i + 1] - res.objective_trace[i]);
    std::vector<nok::CheckResult> checks = {
        {"alternating_nonincreasing", max_increase < slack, max_increase, slack}};

    json traces;
    traces["objective"] = res.objective_trace;
    json fit;
    fit["d"] = design->dim();
    std::vector<double> r_flat;
    r_flat.reserve(static_cast<std::size_t>(design->dim() * design->dim()));
    for (Eigen::Index i = 0; i < design->dim(); ++i)
        for (Eigen::Index j = 0; j < design->dim(); ++j) r_flat.push_back(res.rotation.matrix()(i, j));
    fit["R_row_major"] = r_flat;
    fit["procrustes_degenerate"] = res.procrustes_degenerate;
    if (!codes_out.empty()) {
        nok::save_matrix(codes_out, res.codes);
        fit["Y_csv"] = codes_out;
        std::printf("codes written to %s\n", codes_out.c_str());
    }
    traces["fit"] = fit;
    return finish(cfg, checks, traces, json::object(), flags.out_path);
}

// ---------------------------------------------------------------------------
// kernel
// ---------------------------------------------------------------------------

int cmd_kernel(const CommonFlags& flags, const std::string& data_path, const std::string& gram_out) {
    const nok::RunConfig cfg = load_config(flags);
    const nok::NokConfig ncfg = cfg.make_nok_config();
    const Eigen::MatrixXd X = nok::load_matrix(data_path);
    if (X.rows() != ncfg.design->dim())
        throw nok::InvalidInputError("data has " + std::to_string(X.rows()) +
                                     " features per sample, design needs " +
                                     std::to_string(ncfg.design->dim()));

    const nok::GramMatrix g = nok::gram(ncfg, X, cfg.threads);
    const double psd_tol = 1e-8 * std::max(1.0, g.K.diagonal().maxCoeff());
    std::vector<nok::CheckResult> checks = {
        {"gram_psd", g.psd_ok, std::max(0.0, -g.min_eigenvalue), psd_tol}};

    json bounds;
    if (g.features.size() > 0) bounds["embedding_coherence"] = nok::embedding_coherence(g.features);
    bounds["gram_min_eigenvalue"] = g.min_eigenvalue;

    if (!gram_out.empty()) {
        nok::save_matrix(gram_out, g.K);
        std::printf("gram written to %s\n", gram_out.c_str());
    }
    return finish(cfg, checks, json::object(), bounds, flags.out_path);
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

int cmd_bounds(const nok::BoundInputs& inputs, const std::string& out_path) {
    const double rad = nok::rademacher_bound(inputs);
    const double gen = nok::generalization_bound(inputs);
    std::printf("rademacher_bound=%.12f\n", rad);
    std::printf("generalization_bound=%.12f\n", gen);

    json bounds;
    bounds["rademacher_bound"] = rad;
    bounds["generalization_bound"] = gen;
    json config;
    config["L"] = inputs.lipschitz;
    config["Bw"] = inputs.weight_norm;
    config["N"] = inputs.samples;
    config["T"] = inputs.depth;
    config["mu"] = inputs.coherence;
    config["xfrob"] = inputs.input_frobenius;
    config["delta"] = inputs.delta;
    config["risk"] = inputs.empirical_risk;
    if (!out_path.empty()) {
        nok::write_report(nok::make_report(config, {}, json::object(), bounds, utc_timestamp()),
                          out_path);
        std::printf("report written to %s\n", out_path.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& in_path) {
    std::ifstream in(in_path);
    if (!in) throw nok::IoError("cannot open '" + in_path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw nok::ParseError(std::string("report: ") + e.what());
    }
    if (!j.contains("checks")) throw nok::ParseError("report has no 'checks' array");
    bool all_ok = true;
    for (const auto& c : j.at("checks")) {
        nok::CheckResult r;
        r.name = c.value("name", std::string("unnamed"));
        r.passed = c.value("passed", false);
        r.max_violation = c.value("max_violation", 0.0);
        r.tolerance = c.value("tolerance", 0.0);
        print_check(r);
        all_ok = all_ok && r.passed;
    }
    if (j.at("checks").empty()) std::printf("report has no checks\n");
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noklab: structured proximal iterations with machine-checkable certificates"};
    app.require_subcommand(1);

    // design
    auto* design = app.add_subcommand("design", "build a structured design and report its coherence");
    long n = 13, m = 4;
    bool randomize = false;
    std::optional<std::uint64_t> design_seed;
    std::string design_report, design_out;
    design->add_option("--n", n, "half sample count (prime)")->required();
    design->add_option("--m", m, "half input dimension (divides n-1)")->required();
    design->add_flag("--randomize", randomize, "apply the diagonal phase rotation and row permutation");
    design->add_option("--seed", design_seed, "randomization seed");
    design->add_option("--out", design_report, "report JSON path");
    design->add_option("--design-out", design_out, "design JSON path");

    // verify
    auto* verify = app.add_subcommand("verify", "run certificate suites");
    std::string suite = "all";
    CommonFlags vflags;
    verify->add_option("--suite", suite, "monotonic|rate|ksparse|all")
        ->check(CLI::IsMember({"monotonic", "rate", "ksparse", "all"}));
    verify->add_option("--config", vflags.config_path, "run config JSON");
    verify->add_option("--seed", vflags.seed, "master seed override");
    verify->add_option("--out", vflags.out_path, "report JSON path");
    verify->add_option("--threads", vflags.threads, "worker cap");

    // run
    auto* run = app.add_subcommand("run", "run the T-step iteration on data samples");
    CommonFlags rflags;
    std::string run_data, run_iterates;
    long run_sample = 0;
    run->add_option("--data", run_data, "CSV of samples (rows)")->required();
    run->add_option("--config", rflags.config_path, "run config JSON");
    run->add_option("--seed", rflags.seed, "master seed override");
    run->add_option("--out", rflags.out_path, "report JSON path");
    run->add_option("--threads", rflags.threads, "worker cap");
    run->add_option("--iterates", run_iterates, "CSV path for one sample's iterates");
    run->add_option("--sample", run_sample, "sample index for --iterates");

    // fit
    auto* fit = app.add_subcommand("fit", "unsupervised alternating fit of the rotation");
    CommonFlags fflags;
    std::string fit_data, fit_codes;
    fit->add_option("--data", fit_data, "CSV of samples (rows)")->required();
    fit->add_option("--config", fflags.config_path, "run config JSON");
    fit->add_option("--seed", fflags.seed, "master seed override");
    fit->add_option("--out", fflags.out_path, "report JSON path");
    fit->add_option("--threads", fflags.threads, "worker cap");
    fit->add_option("--codes-out", fit_codes, "CSV path for the fitted codes Y");

    // kernel
    auto* kernel = app.add_subcommand("kernel", "Gram matrix with PSD check");
    CommonFlags kflags;
    std::string kernel_data, kernel_gram;
    kernel->add_option("--data", kernel_data, "CSV of samples (rows)")->required();
    kernel->add_option("--config", kflags.config_path, "run config JSON");
    kernel->add_option("--seed", kflags.seed, "master seed override");
    kernel->add_option("--out", kflags.out_path, "report JSON path");
    kernel->add_option("--threads", kflags.threads, "worker cap");
    kernel->add_option("--gram-out", kernel_gram, "CSV path for the Gram matrix");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Rademacher and generalization bound calculators");
    nok::BoundInputs binputs;
    std::string bounds_out;
    std::optional<std::uint64_t> bounds_seed;
    bounds->add_option("--L", binputs.lipschitz, "loss Lipschitz constant")->required();
    bounds->add_option("--Bw", binputs.weight_norm, "last-layer weight norm bound")->required();
    bounds->add_option("--N", binputs.samples, "sample count")->required();
    bounds->add_option("--T", binputs.depth, "network depth")->required();
    bounds->add_option("--mu", binputs.coherence, "embedding coherence in [0,1]")->required();
    bounds->add_option("--xfrob", binputs.input_frobenius, "Frobenius norm of the input matrix")
        ->required();
    bounds->add_option("--delta", binputs.delta, "confidence level in (0,1)")->required();
    bounds->add_option("--risk", binputs.empirical_risk, "empirical risk in [0,1]")->required();
    bounds->add_option("--seed", bounds_seed, "accepted for interface uniformity");
    bounds->add_option("--out", bounds_out, "report JSON path");

    // report
    auto* report = app.add_subcommand("report", "summarize a report file");
    std::string report_in;
    report->add_option("--in", report_in, "report JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (design->parsed()) return cmd_design(n, m, randomize, design_seed, design_report, design_out);
        if (verify->parsed()) return cmd_verify(suite, vflags);
        if (run->parsed()) return cmd_run(rflags, run_data, run_iterates, run_sample);
        if (fit->parsed()) return cmd_fit(fflags, fit_data, fit_codes);
        if (kernel->parsed()) return cmd_kernel(kflags, kernel_data, kernel_gram);
        if (bounds->parsed()) return cmd_bounds(binputs, bounds_out);
        if (report->parsed()) return cmd_report(report_in);
    } catch (const nok::IntegrityError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const nok::NumericOverflowError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const nok::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
