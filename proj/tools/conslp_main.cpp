// Command-line front end: generate instances, run the consensus solver,
// and check solutions against the reference oracle.
//
// Exit codes
//   solve: 0 converged, 2 max_iters, 3 infeasible_flagged, 4 inner_failure
//   gen:   0 written
//   check: 0 within tolerance, 5 objective gap over tolerance
//   any:   1 usage, I/O, parse, or dimension-cap errors

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "conslp/oracle.hpp"
#include "conslp/problem.hpp"
#include "conslp/runtime.hpp"

namespace {

using namespace conslp;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

int threads_from_env() {
    const char* env = std::getenv("CONSENSUS_LP_THREADS");
    if (!env || !*env) return 0;  // one worker per consensus block
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end || v < 0)
        throw std::runtime_error("CONSENSUS_LP_THREADS must be a nonnegative integer");
    return static_cast<int>(v);
}

struct SolveArgs {
    std::string problem_path;
    std::string report_path;
    std::string trace_path;
    int num_blocks = 1;
    int num_subvectors = 1;
    bool rate_check = false;
    std::string prox_schedule = "constant";
    std::string penalty_mode = "full";
    SolverConfig cfg;
};

void add_solver_flags(CLI::App* cmd, SolveArgs& args) {
    cmd->add_option("--problem", args.problem_path, "problem JSON file")->required();
    cmd->add_option("--out", args.report_path, "report JSON output path");
    cmd->add_option("--trace", args.trace_path, "trace CSV output path");
    cmd->add_option("--N", args.num_blocks, "number of consensus blocks")
        ->capture_default_str();
    cmd->add_option("--M", args.num_subvectors, "number of subvectors")->capture_default_str();
    cmd->add_flag("--rate-check", args.rate_check,
                  "verify the O(1/k) merit bound (consensus-only mode)");
    cmd->add_option("--alpha-w", args.cfg.alpha_w, "consensus dual step")->capture_default_str();
    cmd->add_option("--alpha-mu", args.cfg.alpha_mu, "inequality dual step")
        ->capture_default_str();
    cmd->add_option("--alpha-nu", args.cfg.alpha_nu, "equality dual step")
        ->capture_default_str();
    cmd->add_option("--rho", args.cfg.rho, "augmented Lagrangian penalty")
        ->capture_default_str();
    cmd->add_option("--sigma0", args.cfg.sigma0, "x proximal base")->capture_default_str();
    cmd->add_option("--tau0", args.cfg.tau0, "z proximal base")->capture_default_str();
    cmd->add_option("--gamma0", args.cfg.gamma0, "slack proximal base")->capture_default_str();
    cmd->add_option("--prox-schedule", args.prox_schedule, "constant | normalized")
        ->capture_default_str()
        ->check(CLI::IsMember({"constant", "normalized"}));
    cmd->add_option("--penalty-mode", args.penalty_mode, "full | consensus-only")
        ->capture_default_str()
        ->check(CLI::IsMember({"full", "consensus-only"}));
    cmd->add_option("--dual-bound", args.cfg.dual_bound, "dual variable clamp")
        ->capture_default_str();
    cmd->add_option("--ascent-phase-iters", args.cfg.ascent_phase_iters,
                    "iterations with dual updates reversed as ascent")
        ->capture_default_str();
    cmd->add_option("--tol-residual", args.cfg.tol_residual, "stopping residual tolerance")
        ->capture_default_str();
    cmd->add_option("--tol-merit", args.cfg.tol_merit, "stopping merit-change tolerance")
        ->capture_default_str();
    cmd->add_option("--max-iters", args.cfg.max_iters, "iteration cap")->capture_default_str();
    cmd->add_option("--subqp-tol", args.cfg.subqp_tol, "inner box-QP KKT tolerance")
        ->capture_default_str();
    cmd->add_option("--subqp-max-sweeps", args.cfg.subqp_max_sweeps,
                    "inner box-QP sweep cap")
        ->capture_default_str();
}

int cmd_solve(SolveArgs& args) {
    args.cfg.prox_schedule = args.prox_schedule == "normalized" ? ProxSchedule::kNormalized
                                                                : ProxSchedule::kConstant;
    args.cfg.penalty_mode = args.penalty_mode == "consensus-only" ? PenaltyMode::kConsensusOnly
                                                                  : PenaltyMode::kFull;
    args.cfg.threads = threads_from_env();
    if (args.rate_check && args.cfg.penalty_mode != PenaltyMode::kConsensusOnly)
        throw std::runtime_error("--rate-check requires --penalty-mode consensus-only");

    const ProblemSpec spec = parse_problem(read_file(args.problem_path));
    const PartitionPlan plan = partition(spec, args.num_blocks, args.num_subvectors);

    RunOptions options;
    options.rate_check = args.rate_check;
    std::ofstream trace_out;
    if (!args.trace_path.empty()) {
        trace_out.open(args.trace_path);
        if (!trace_out) throw std::runtime_error("cannot open " + args.trace_path);
        options.trace_sink = &trace_out;
    }

    const SolveReport report = run(spec, plan, args.cfg, options);
    if (!args.report_path.empty()) write_file(args.report_path, report.to_json());

    std::cout << "status: " << to_string(report.status) << "\n"
              << "iterations: " << report.iterations << "\n"
              << "objective: " << report.objective << "\n"
              << "residuals: cons=" << report.final_residuals.consensus
              << " ineq=" << report.final_residuals.ineq
              << " eq=" << report.final_residuals.eq << "\n"
              << "dual clamp events: " << report.clamp_events << "\n";
    if (report.rate)
        std::cout << "rate certificate: C=" << report.rate->c
                  << " max_violation=" << report.rate->max_violation
                  << " satisfied=" << (report.rate->satisfied ? "yes" : "no") << "\n";
    else if (args.rate_check)
        std::cout << "rate certificate: not applicable (run did not converge)\n";

    switch (report.status) {
        case SolveStatus::kConverged: return 0;
        case SolveStatus::kMaxIters: return 2;
        case SolveStatus::kInfeasibleFlagged: return 3;
        case SolveStatus::kInnerFailure: return 4;
    }
    return 1;
}

struct GenArgs {
    long n = 4, p = 4, q = 1;
    std::uint64_t seed = 0;
    std::string out_path;
};

int cmd_gen(const GenArgs& args) {
    GenInfo info;
    const ProblemSpec spec =
        generate_instance(args.seed, args.n, args.p, args.q, GenOptions{}, &info);
    const std::string text = serialize_problem(spec);
    if (args.out_path.empty())
        std::cout << text << "\n";
    else
        write_file(args.out_path, text);
    std::cout << "interior point:";
    for (Index j = 0; j < info.interior_point.size(); ++j)
        std::cout << " " << info.interior_point[j];
    std::cout << "\nmargins:";
    for (Index j = 0; j < info.margins.size(); ++j) std::cout << " " << info.margins[j];
    std::cout << "\n";
    return 0;
}

struct CheckArgs {
    std::string problem_path;
    std::string report_path;
    double gap_tol = 1e-4;
};

int cmd_check(const CheckArgs& args) {
    const ProblemSpec spec = parse_problem(read_file(args.problem_path));
    const OptimalCertificate cert = solve_reference(spec);
    if (cert.status == OracleStatus::kInfeasible) {
        std::cout << "reference: infeasible\n";
        return 5;
    }
    std::cout << "f_star: " << cert.f_star << "\n"
              << "kkt_residual: " << cert.kkt_residual << "\n";

    nlohmann::json report = nlohmann::json::parse(read_file(args.report_path));
    const double f_solver = report.at("objective").get<double>();
    const std::string status = report.at("status").get<std::string>();
    const double gap = std::abs(f_solver - cert.f_star);
    const double tol = args.gap_tol * std::max(1.0, std::abs(cert.f_star));
    std::cout << "solver status: " << status << "\n"
              << "solver objective: " << f_solver << "\n"
              << "gap: " << gap << (gap <= tol ? " (within tolerance)" : " (over tolerance)")
              << "\n";
    return gap <= tol && status == "converged" ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed consensus-block augmented-Lagrangian LP solver"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    CLI::App* solve_cmd = app.add_subcommand("solve", "run the solver on a problem file");
    add_solver_flags(solve_cmd, solve_args);

    GenArgs gen_args;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a feasible random instance");
    gen_cmd->add_option("--n", gen_args.n, "dimension")->required();
    gen_cmd->add_option("--p", gen_args.p, "inequality rows")->capture_default_str();
    gen_cmd->add_option("--q", gen_args.q, "equality rows")->capture_default_str();
    gen_cmd->add_option("--seed", gen_args.seed, "generator seed")->capture_default_str();
    gen_cmd->add_option("--out", gen_args.out_path, "output problem JSON path");

    CheckArgs check_args;
    CLI::App* check_cmd =
        app.add_subcommand("check", "compare a solve report against the oracle");
    check_cmd->add_option("--problem", check_args.problem_path, "problem JSON file")
        ->required();
    check_cmd->add_option("--report", check_args.report_path, "report JSON file")->required();
    check_cmd->add_option("--gap-tol", check_args.gap_tol, "relative objective tolerance")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (solve_cmd->parsed()) return cmd_solve(solve_args);
        if (gen_cmd->parsed()) return cmd_gen(gen_args);
        if (check_cmd->parsed()) return cmd_check(check_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
