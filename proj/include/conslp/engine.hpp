#ifndef CONSLP_ENGINE_HPP_
#define CONSLP_ENGINE_HPP_

#include <string>
#include <vector>

#include "conslp/problem.hpp"
#include "conslp/types.hpp"

namespace conslp {

enum class ProxSchedule { kConstant, kNormalized };
enum class PenaltyMode { kFull, kConsensusOnly };
enum class DualDirection { kDescent, kAscent };

struct SolverConfig {
    double alpha_w = 0.5;
    double alpha_mu = 0.5;
    double alpha_nu = 0.5;
    double rho = 1.0;
    double sigma0 = 1.0;
    double tau0 = 1.0;
    double gamma0 = 1.0;
    ProxSchedule prox_schedule = ProxSchedule::kConstant;
    PenaltyMode penalty_mode = PenaltyMode::kFull;
    double dual_bound = 1e6;
    long ascent_phase_iters = 0;
    double tol_residual = 1e-6;
    double tol_merit = 1e-9;
    long max_iters = 50000;
    double subqp_tol = 1e-11;
    int subqp_max_sweeps = 1000;
    int threads = 0;  // 0: one worker thread per consensus block

    void validate() const;  // throws std::invalid_argument

    double ineq_penalty_coeff(double block_rho) const {
        return penalty_mode == PenaltyMode::kFull ? block_rho : 0.0;
    }
};

/// Per-iteration proximal control parameters for one block: sigma and gamma
/// are block-local, tau is shared by all blocks.
struct ProxParams {
    double sigma = 1.0;
    double tau = 1.0;
    double gamma = 1.0;
};

/// Constant schedule returns `base`; normalized returns base/step_norm with
/// the iteration-0 divisor defined as 1 and base as the zero-step fallback.
double scheduled_prox(double base, double step_norm, long k, ProxSchedule schedule);

/// Immutable per-block slice of the problem: the block's constraint rows
/// plus its slack upper bounds.
struct BlockData {
    Matrix a_ineq;  // block rows x n
    Vector b_ineq;
    Matrix a_eq;
    Vector b_eq;
    Vector slack_upper;
    std::vector<Index> infeasible_rows;

    Index num_ineq() const { return b_ineq.size(); }
    Index num_eq() const { return b_eq.size(); }
    Vector ineq_value(const Vector& x) const { return a_ineq * x + b_ineq; }
    Vector eq_value(const Vector& x) const { return a_eq * x + b_eq; }
};

/// Mutable per-block iterates. Owned by exactly one worker at a time.
struct BlockState {
    Vector x;           // local copy of the decision vector
    Vector x_prev;      // previous iterate, for the normalized schedule
    Vector slack;       // Y_i, one entry per block inequality row
    Vector slack_prev;
    Vector dual_w;      // multiplier for x - z = 0
    Vector dual_mu;     // multiplier for G_i(x) + Y_i = 0
    Vector dual_nu;     // multiplier for H_i(x) = 0
    double rho = 1.0;
    double sigma0 = 1.0;
    double gamma0 = 1.0;
    long clamp_events = 0;  // cumulative dual-bound clamps
};

struct GlobalState {
    Vector z;
    Vector z_prev;
    long k = 0;
    double tau0 = 1.0;
};

struct Residuals {
    double consensus = 0.0;  // max_i ||x_i - z||_inf
    double ineq = 0.0;       // max_i ||G_i(x_i) + Y_i||_inf
    double eq = 0.0;         // max_i ||H_i(x_i)||_inf
    double max() const { return std::max(consensus, std::max(ineq, eq)); }
};

/// Builds the per-block data slices (constraint rows + slack bounds).
std::vector<BlockData> make_block_data(const ProblemSpec& spec, const PartitionPlan& plan,
                                       const SlackBounds& bounds);

/// Default initialization: x = z = clip(0, l, u), slack = clip(-G(x), 0, uY),
/// duals zero.
void initialize_states(const ProblemSpec& spec, const std::vector<BlockData>& data,
                       const SolverConfig& cfg, std::vector<BlockState>& blocks,
                       GlobalState& global);

struct SubblockResult {
    Vector x;  // new subvector values
    int sweeps = 0;
    bool converged = false;
};

/// Exact minimizer over the subvector box of the block augmented Lagrangian
/// restricted to subblock `range` plus the proximal term, all other
/// subvectors frozen at their Gauss-Seidel values held in `block.x`.
/// Solved by cyclic coordinate descent with exact per-coordinate updates;
/// "exact" means projected-gradient residual <= cfg.subqp_tol.
SubblockResult update_x_subblock(const ProblemSpec& spec, const BlockData& data,
                                 const BlockState& block, const Vector& z,
                                 const ColRange& range, const ProxParams& prox,
                                 const SolverConfig& cfg);

/// Componentwise clip(numerator/denominator, lo, hi); the exact minimizer of
/// the aggregated z quadratic since its curvature is a positive scalar.
Vector z_closed_form(const Vector& numerator, double denominator, const Vector& lo,
                     const Vector& hi);

/// Closed-form slack update clip((pen*(-g) - mu + gamma*y)/(pen + gamma), 0, uY)
/// where pen is the inequality penalty coefficient (0 in consensus-only mode).
Vector update_y(const Vector& g_val, const Vector& slack, const Vector& dual_mu,
                double pen, double gamma, const Vector& slack_upper);

/// Dual step for one block: descent subtracts alpha times the residual,
/// ascent adds it; results are clamped to [-dual_bound, +dual_bound] and
/// clamp events accumulate in block.clamp_events.
void update_duals(BlockState& block, const Vector& z_new, const Vector& g_val,
                  const Vector& h_val, const SolverConfig& cfg, DualDirection direction);

/// One block's contribution to the merit function L^k.
double block_merit(const ProblemSpec& spec, const BlockData& data, const BlockState& block,
                   const Vector& z, const SolverConfig& cfg);

double merit(const ProblemSpec& spec, const std::vector<BlockData>& data,
             const std::vector<BlockState>& blocks, const Vector& z, const SolverConfig& cfg);

Residuals block_residuals(const BlockData& data, const BlockState& block, const Vector& z);

Residuals residuals(const std::vector<BlockData>& data, const std::vector<BlockState>& blocks,
                    const Vector& z);

/// Theorem-style rate constant from the run's initial iterates and its own
/// terminal point:
///   C = sum_i sigma0_i/2 ||x0_i - z_inf||^2 + (rho_i + tau0)/2 ||z0 - z_inf||^2
///             + gamma0_i/2 ||y0_i - y_inf_i||^2.
/// Only defined in consensus-only penalty mode with the constant schedule;
/// throws std::invalid_argument otherwise.
double rate_certificate(const std::vector<BlockState>& initial_blocks,
                        const GlobalState& initial_global, const Vector& z_inf,
                        const std::vector<Vector>& slack_inf, const SolverConfig& cfg);

}  // namespace conslp

#endif  // CONSLP_ENGINE_HPP_
