#ifndef CONSLP_RUNTIME_HPP_
#define CONSLP_RUNTIME_HPP_

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conslp/engine.hpp"
#include "conslp/problem.hpp"
#include "conslp/types.hpp"

namespace conslp {

enum class SolveStatus { kConverged, kMaxIters, kInnerFailure, kInfeasibleFlagged };

const char* to_string(SolveStatus status);

/// One completed iteration: merit, residuals and counters of iterate k.
struct IterationTrace {
    long k = 0;
    double merit = 0.0;
    double r_cons = 0.0;
    double r_ineq = 0.0;
    double r_eq = 0.0;
    double f_z = 0.0;
    long clamp_count = 0;      // cumulative dual-bound clamp events
    long wall_time_us = 0;
};

/// Outcome of the O(1/k) certificate scan over a recorded trace.
struct RateCheck {
    double c = 0.0;              // certificate constant
    double max_violation = 0.0;  // max over k>=1 of L^k - N f(z^K) - C/k
    bool satisfied = false;      // max_violation <= 1e-8
};

struct SolveReport {
    SolveStatus status = SolveStatus::kMaxIters;
    Vector z;
    std::vector<BlockState> blocks;
    std::vector<IterationTrace> trace;
    Residuals final_residuals;
    double final_merit = 0.0;
    double objective = 0.0;  // f(z) at termination
    long iterations = 0;     // update iterations executed
    long clamp_events = 0;
    long ring_messages = 0;  // z-aggregation messages (forward + broadcast)
    long ring_rounds = 0;    // completed z-aggregation passes
    std::optional<RateCheck> rate;

    std::string to_json() const;
};

struct RunOptions {
    bool rate_check = false;          // requires consensus-only + constant schedule
    std::ostream* trace_sink = nullptr;  // CSV rows appended as they are recorded
};

/// Execute the full iteration loop with one long-lived worker per group of
/// consensus blocks (cfg.threads threads; 0 means one per block). The result
/// is bit-identical for every worker-thread count.
SolveReport run(const ProblemSpec& spec, const PartitionPlan& plan, const SolverConfig& cfg,
                const RunOptions& options = {});

/// Chained partial sums in block-index order, the same association the ring
/// pass uses: returns (numerator, denominator) for the z update.
std::pair<Vector, double> ring_aggregate(const std::vector<Vector>& contributions,
                                         const std::vector<double>& weights);

void write_trace_header(std::ostream& out);
void record_trace(std::ostream& out, const IterationTrace& row);
std::vector<IterationTrace> parse_trace_csv(std::istream& in);

}  // namespace conslp

#endif  // CONSLP_RUNTIME_HPP_
