#include "conslp/engine.hpp"

#include <cmath>
#include <stdexcept>

namespace conslp {

void SolverConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive(alpha_w, "alpha_w");
    positive(alpha_mu, "alpha_mu");
    positive(alpha_nu, "alpha_nu");
    positive(sigma0, "sigma0");
    positive(tau0, "tau0");
    positive(gamma0, "gamma0");
    positive(dual_bound, "dual_bound");
    positive(tol_residual, "tol_residual");
    positive(tol_merit, "tol_merit");
    positive(subqp_tol, "subqp_tol");
    if (rho < 0.0 || !std::isfinite(rho)) throw std::invalid_argument("rho must be >= 0");
    if (ascent_phase_iters < 0) throw std::invalid_argument("ascent_phase_iters must be >= 0");
    if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
    if (subqp_max_sweeps < 1) throw std::invalid_argument("subqp_max_sweeps must be >= 1");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
}

double scheduled_prox(double base, double step_norm, long k, ProxSchedule schedule) {
    if (schedule == ProxSchedule::kConstant) return base;
    if (k == 0) return base;             // ||x^0 - x^-1|| is defined as 1
    if (step_norm == 0.0) return base;   // zero-step fallback
    return base / step_norm;
}

std::vector<BlockData> make_block_data(const ProblemSpec& spec, const PartitionPlan& plan,
                                       const SlackBounds& bounds) {
    std::vector<BlockData> out;
    out.reserve(static_cast<size_t>(plan.num_blocks));
    for (int i = 0; i < plan.num_blocks; ++i) {
        const auto& gi = plan.ineq_rows[static_cast<size_t>(i)];
        const auto& hi = plan.eq_rows[static_cast<size_t>(i)];
        BlockData d;
        d.a_ineq = Matrix(static_cast<Index>(gi.size()), spec.n);
        d.b_ineq = Vector(static_cast<Index>(gi.size()));
        for (size_t r = 0; r < gi.size(); ++r) {
            d.a_ineq.row(static_cast<Index>(r)) = spec.a_ineq.row(gi[r]);
            d.b_ineq[static_cast<Index>(r)] = spec.b_ineq[gi[r]];
        }
        d.a_eq = Matrix(static_cast<Index>(hi.size()), spec.n);
        d.b_eq = Vector(static_cast<Index>(hi.size()));
        for (size_t r = 0; r < hi.size(); ++r) {
            d.a_eq.row(static_cast<Index>(r)) = spec.a_eq.row(hi[r]);
            d.b_eq[static_cast<Index>(r)] = spec.b_eq[hi[r]];
        }
        d.slack_upper = bounds.upper[static_cast<size_t>(i)];
        d.infeasible_rows = bounds.infeasible_rows[static_cast<size_t>(i)];
        out.push_back(std::move(d));
    }
    return out;
}

void initialize_states(const ProblemSpec& spec, const std::vector<BlockData>& data,
                       const SolverConfig& cfg, std::vector<BlockState>& blocks,
                       GlobalState& global) {
    const Vector z0 = clip(Vector::Zero(spec.n), spec.lower, spec.upper);
    global.z = z0;
    global.z_prev = z0;
    global.k = 0;
    global.tau0 = cfg.tau0;

    blocks.clear();
    blocks.reserve(data.size());
    for (const auto& d : data) {
        BlockState b;
        b.x = z0;
        b.x_prev = z0;
        b.slack = clip(Vector(-d.ineq_value(z0)), Vector::Zero(d.num_ineq()), d.slack_upper);
        b.slack_prev = b.slack;
        b.dual_w = Vector::Zero(spec.n);
        b.dual_mu = Vector::Zero(d.num_ineq());
        b.dual_nu = Vector::Zero(d.num_eq());
        b.rho = cfg.rho;
        b.sigma0 = cfg.sigma0;
        b.gamma0 = cfg.gamma0;
        blocks.push_back(std::move(b));
    }
}

SubblockResult update_x_subblock(const ProblemSpec& spec, const BlockData& data,
                                 const BlockState& block, const Vector& z,
                                 const ColRange& range, const ProxParams& prox,
                                 const SolverConfig& cfg) {
    const Index m = range.size();
    const Index p = data.num_ineq();
    const Index q = data.num_eq();
    const double rho = block.rho;
    const double pen = cfg.ineq_penalty_coeff(rho);  // 0 drops the G/H penalty

    // Slices of the block systems over this subvector.
    const auto ag = data.a_ineq.middleCols(range.begin, m);
    const auto ah = data.a_eq.middleCols(range.begin, m);
    const auto lo = spec.lower.segment(range.begin, m);
    const auto hi = spec.upper.segment(range.begin, m);
    const auto z_l = z.segment(range.begin, m);
    const auto x_k = block.x.segment(range.begin, m);

    // Linear coefficient: cost + consensus dual + row duals pulled back.
    Vector lin = spec.cost.segment(range.begin, m) + block.dual_w.segment(range.begin, m);
    if (p > 0) lin += ag.transpose() * block.dual_mu;
    if (q > 0) lin += ah.transpose() * block.dual_nu;

    Vector x = x_k;
    // Residuals of the penalized systems at the current x, frozen tails
    // included (they live in block.x outside this range).
    Vector r_g, r_h;
    if (pen > 0.0 && p > 0) r_g = data.ineq_value(block.x) + block.slack;
    if (pen > 0.0 && q > 0) r_h = data.eq_value(block.x);

    Vector diag(m);
    for (Index j = 0; j < m; ++j) {
        double d = rho + prox.sigma;
        if (pen > 0.0) d += pen * (ag.col(j).squaredNorm() + ah.col(j).squaredNorm());
        diag[j] = d;
    }

    auto gradient_at = [&](Index j) {
        double g = lin[j] + rho * (x[j] - z_l[j]) + prox.sigma * (x[j] - x_k[j]);
        if (pen > 0.0 && p > 0) g += pen * ag.col(j).dot(r_g);
        if (pen > 0.0 && q > 0) g += pen * ah.col(j).dot(r_h);
        return g;
    };

    SubblockResult result;
    for (int sweep = 1; sweep <= cfg.subqp_max_sweeps; ++sweep) {
        for (Index j = 0; j < m; ++j) {
            const double target = clip(x[j] - gradient_at(j) / diag[j], lo[j], hi[j]);
            const double delta = target - x[j];
            if (delta != 0.0) {
                x[j] = target;
                if (pen > 0.0 && p > 0) r_g += ag.col(j) * delta;
                if (pen > 0.0 && q > 0) r_h += ah.col(j) * delta;
            }
        }
        // Projected-gradient optimality residual of the box QP.
        double kkt = 0.0;
        for (Index j = 0; j < m; ++j)
            kkt = std::max(kkt, std::abs(x[j] - clip(x[j] - gradient_at(j), lo[j], hi[j])));
        result.sweeps = sweep;
        if (kkt <= cfg.subqp_tol) {
            result.converged = true;
            break;
        }
    }
    result.x = std::move(x);
    return result;
}

Vector z_closed_form(const Vector& numerator, double denominator, const Vector& lo,
                     const Vector& hi) {
    if (!(denominator > 0.0))
        throw std::invalid_argument("z_closed_form: nonpositive denominator");
    return clip(Vector(numerator / denominator), lo, hi);
}

Vector update_y(const Vector& g_val, const Vector& slack, const Vector& dual_mu,
                double pen, double gamma, const Vector& slack_upper) {
    if (!(pen + gamma > 0.0)) throw std::invalid_argument("update_y: pen + gamma <= 0");
    Vector target = (pen * (-g_val) - dual_mu + gamma * slack) / (pen + gamma);
    return clip(target, Vector::Zero(slack.size()), slack_upper);
}

namespace {

long clamp_vector(Vector& v, double bound) {
    long events = 0;
    for (Index j = 0; j < v.size(); ++j) {
        if (v[j] > bound) {
            v[j] = bound;
            ++events;
        } else if (v[j] < -bound) {
            v[j] = -bound;
            ++events;
        }
    }
    return events;
}

}  // namespace

void update_duals(BlockState& block, const Vector& z_new, const Vector& g_val,
                  const Vector& h_val, const SolverConfig& cfg, DualDirection direction) {
    const double sign = direction == DualDirection::kDescent ? -1.0 : 1.0;
    block.dual_w += sign * cfg.alpha_w * (block.x - z_new);
    block.dual_mu += sign * cfg.alpha_mu * (g_val + block.slack);
    block.dual_nu += sign * cfg.alpha_nu * h_val;
    block.clamp_events += clamp_vector(block.dual_w, cfg.dual_bound);
    block.clamp_events += clamp_vector(block.dual_mu, cfg.dual_bound);
    block.clamp_events += clamp_vector(block.dual_nu, cfg.dual_bound);
}

double block_merit(const ProblemSpec& spec, const BlockData& data, const BlockState& block,
                   const Vector& z, const SolverConfig& cfg) {
    const double pen_on = cfg.penalty_mode == PenaltyMode::kFull ? 1.0 : 0.0;
    double value = spec.cost.dot(block.x);
    const Vector cons = block.x - z;
    value += 0.5 * block.rho * cons.squaredNorm();
    value += block.dual_w.dot(cons);
    if (data.num_ineq() > 0) {
        const Vector g = data.ineq_value(block.x) + block.slack;
        value += 0.5 * block.rho * pen_on * g.squaredNorm();
        value += block.dual_mu.dot(g);
    }
    if (data.num_eq() > 0) {
        const Vector h = data.eq_value(block.x);
        value += 0.5 * block.rho * pen_on * h.squaredNorm();
        value += block.dual_nu.dot(h);
    }
    return value;
}

double merit(const ProblemSpec& spec, const std::vector<BlockData>& data,
             const std::vector<BlockState>& blocks, const Vector& z, const SolverConfig& cfg) {
    double total = 0.0;
    for (size_t i = 0; i < blocks.size(); ++i)
        total += block_merit(spec, data[i], blocks[i], z, cfg);
    return total;
}

Residuals block_residuals(const BlockData& data, const BlockState& block, const Vector& z) {
    Residuals r;
    r.consensus = (block.x - z).cwiseAbs().maxCoeff();
    if (data.num_ineq() > 0)
        r.ineq = (data.ineq_value(block.x) + block.slack).cwiseAbs().maxCoeff();
    if (data.num_eq() > 0) r.eq = data.eq_value(block.x).cwiseAbs().maxCoeff();
    return r;
}

Residuals residuals(const std::vector<BlockData>& data, const std::vector<BlockState>& blocks,
                    const Vector& z) {
    Residuals total;
    for (size_t i = 0; i < blocks.size(); ++i) {
        const Residuals r = block_residuals(data[i], blocks[i], z);
        total.consensus = std::max(total.consensus, r.consensus);
        total.ineq = std::max(total.ineq, r.ineq);
        total.eq = std::max(total.eq, r.eq);
    }
    return total;
}

double rate_certificate(const std::vector<BlockState>& initial_blocks,
                        const GlobalState& initial_global, const Vector& z_inf,
                        const std::vector<Vector>& slack_inf, const SolverConfig& cfg) {
    if (cfg.penalty_mode != PenaltyMode::kConsensusOnly)
        throw std::invalid_argument("rate_certificate: requires consensus-only penalty mode");
    if (cfg.prox_schedule != ProxSchedule::kConstant)
        throw std::invalid_argument("rate_certificate: requires the constant prox schedule");
    double c = 0.0;
    for (size_t i = 0; i < initial_blocks.size(); ++i) {
        const BlockState& b = initial_blocks[i];
        c += 0.5 * b.sigma0 * (b.x - z_inf).squaredNorm();
        c += 0.5 * (b.rho + initial_global.tau0) * (initial_global.z - z_inf).squaredNorm();
        c += 0.5 * b.gamma0 * (b.slack - slack_inf[i]).squaredNorm();
    }
    return c;
}

}  // namespace conslp
