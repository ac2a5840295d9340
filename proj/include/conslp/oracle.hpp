#ifndef CONSLP_ORACLE_HPP_
#define CONSLP_ORACLE_HPP_

#include <functional>
#include <vector>

#include "conslp/problem.hpp"
#include "conslp/types.hpp"

namespace conslp {

enum class OracleStatus { kOptimal, kInfeasible };

/// Ground-truth solution of a desk-scale instance. With a finite box the
/// problem can never be unbounded, so the status set is optimal/infeasible.
struct OptimalCertificate {
    OracleStatus status = OracleStatus::kInfeasible;
    Vector x_star;
    double f_star = 0.0;
    double kkt_residual = 0.0;
    // Multipliers recovered from the final simplex basis (empty if infeasible).
    Vector mu_star;  // one per inequality row, >= 0
    Vector nu_star;  // one per equality row
};

inline constexpr Index kOracleDimCap = 50;

/// Bounded-variable primal simplex with Bland's rule. Throws
/// std::invalid_argument above the desk-scale cap (n <= 50).
OptimalCertificate solve_reference(const ProblemSpec& spec);

/// Brute-force cross-check: enumerate basic feasible points (q equality
/// rows always active, n-q more constraints chosen among inequality rows
/// and bound faces). Only sensible for small instances.
OptimalCertificate enumerate_vertices(const ProblemSpec& spec);

/// Aggregate KKT residual of (x, duals) under the consensus decomposition:
/// per-block stationarity distance to the box normal cone, primal
/// feasibility, complementary slackness, and negativity of mu.
double kkt_residual(const ProblemSpec& spec, const PartitionPlan& plan, const Vector& x,
                    const std::vector<Vector>& w, const std::vector<Vector>& mu,
                    const std::vector<Vector>& nu);

/// Convenience overload for the undecomposed problem (single block, w = 0).
double kkt_residual(const ProblemSpec& spec, const Vector& x, const Vector& mu,
                    const Vector& nu);

/// Golden-section argmin of a unimodal function on [lo, hi] to `tol`.
double numeric_minimize(const std::function<double(double)>& f, double lo, double hi,
                        double tol = 1e-8);

}  // namespace conslp

#endif  // CONSLP_ORACLE_HPP_
