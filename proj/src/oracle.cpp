#include "conslp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace conslp {

namespace {

constexpr double kOptTol = 1e-9;
constexpr double kFeasTol = 1e-8;
constexpr double kRatioEps = 1e-11;
constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarStatus { kBasic, kAtLower, kAtUpper };

// Bounded-variable primal simplex over
//   A v = rhs,  lo <= v <= up,
// with Bland's rule (smallest eligible index) for entering and leaving.
class BoundedSimplex {
public:
    BoundedSimplex(Matrix a, Vector rhs, Vector lo, Vector up)
        : a_(std::move(a)), rhs_(std::move(rhs)), lo_(std::move(lo)), up_(std::move(up)) {
        total_ = a_.cols();
        m_ = a_.rows();
        value_ = Vector::Zero(total_);
        status_.assign(static_cast<size_t>(total_), VarStatus::kAtLower);
        for (Index j = 0; j < total_; ++j) value_[j] = lo_[j];
    }

    void set_basis(const std::vector<Index>& basic) { basic_ = basic; }
    void set_bounds(Index j, double lo, double up) { lo_[j] = lo; up_[j] = up; }
    void set_status(Index j, VarStatus s) { status_[static_cast<size_t>(j)] = s; }

    double value(Index j) const { return value_[j]; }
    const Vector& values() const { return value_; }
    VarStatus status(Index j) const { return status_[static_cast<size_t>(j)]; }

    // Minimizes cost over the current basis; returns the objective value.
    double minimize(const Vector& cost) {
        refresh_basic_values();
        const long max_pivots = 200000;
        for (long pivot = 0; pivot < max_pivots; ++pivot) {
            Vector y = row_duals(cost);
            Index enter = -1;
            int dir = 0;
            for (Index j = 0; j < total_; ++j) {
                if (status_[static_cast<size_t>(j)] == VarStatus::kBasic) continue;
                if (up_[j] - lo_[j] <= 0.0) continue;  // fixed
                const double d = cost[j] - a_.col(j).dot(y);
                if (status_[static_cast<size_t>(j)] == VarStatus::kAtLower && d < -kOptTol) {
                    enter = j;
                    dir = +1;
                    break;
                }
                if (status_[static_cast<size_t>(j)] == VarStatus::kAtUpper && d > kOptTol) {
                    enter = j;
                    dir = -1;
                    break;
                }
            }
            if (enter < 0) {
                double obj = 0.0;
                for (Index j = 0; j < total_; ++j) obj += cost[j] * value_[j];
                return obj;
            }
            pivot_step(enter, dir);
        }
        throw std::runtime_error("simplex: pivot cap exceeded");
    }

    // Row multipliers y = B^-T c_B for the current basis.
    Vector row_duals(const Vector& cost) {
        if (m_ == 0) return Vector(0);
        factorize();
        return lu_.transpose().solve(basic_cost(cost));
    }

private:
    Vector basic_cost(const Vector& cost) const {
        Vector cb(m_);
        for (Index r = 0; r < m_; ++r) cb[r] = cost[basic_[static_cast<size_t>(r)]];
        return cb;
    }

    void factorize() {
        Matrix b(m_, m_);
        for (Index r = 0; r < m_; ++r) b.col(r) = a_.col(basic_[static_cast<size_t>(r)]);
        lu_.compute(b);
    }

    void refresh_basic_values() {
        if (m_ == 0) return;
        factorize();
        Vector partial = rhs_;
        for (Index j = 0; j < total_; ++j)
            if (status_[static_cast<size_t>(j)] != VarStatus::kBasic)
                partial -= a_.col(j) * value_[j];
        Vector xb = lu_.solve(partial);
        for (Index r = 0; r < m_; ++r) value_[basic_[static_cast<size_t>(r)]] = xb[r];
    }

    void pivot_step(Index enter, int dir) {
        Vector w = m_ > 0 ? Vector(lu_.solve(a_.col(enter))) : Vector(0);
        double t_best = up_[enter] - lo_[enter];  // bound flip distance (may be inf)
        Index leave_pos = -1;                     // -1 => bound flip
        bool leave_to_upper = false;
        for (Index r = 0; r < m_; ++r) {
            const Index b = basic_[static_cast<size_t>(r)];
            const double delta = -dir * w[r];  // change rate of basic r
            double t = kInf;
            bool to_upper = false;
            if (delta < -kRatioEps) {
                t = (value_[b] - lo_[b]) / (-delta);
            } else if (delta > kRatioEps && std::isfinite(up_[b])) {
                t = (up_[b] - value_[b]) / delta;
                to_upper = true;
            } else {
                continue;
            }
            t = std::max(t, 0.0);
            // Bland tie-break: strictly better ratio wins; on ties prefer the
            // smallest leaving variable index.
            if (t < t_best - kRatioEps ||
                (t < t_best + kRatioEps &&
                 (leave_pos < 0 ? b < enter : b < basic_[static_cast<size_t>(leave_pos)]))) {
                t_best = t;
                leave_pos = r;
                leave_to_upper = to_upper;
            }
        }
        if (!std::isfinite(t_best)) throw std::runtime_error("simplex: unbounded ray");

        if (leave_pos < 0) {
            // Entering variable travels to its opposite bound; basis unchanged.
            status_[static_cast<size_t>(enter)] =
                dir > 0 ? VarStatus::kAtUpper : VarStatus::kAtLower;
            value_[enter] = dir > 0 ? up_[enter] : lo_[enter];
        } else {
            const Index leave = basic_[static_cast<size_t>(leave_pos)];
            status_[static_cast<size_t>(leave)] =
                leave_to_upper ? VarStatus::kAtUpper : VarStatus::kAtLower;
            value_[leave] = leave_to_upper ? up_[leave] : lo_[leave];
            basic_[static_cast<size_t>(leave_pos)] = enter;
            status_[static_cast<size_t>(enter)] = VarStatus::kBasic;
        }
        refresh_basic_values();
    }

    Matrix a_;
    Vector rhs_, lo_, up_, value_;
    std::vector<VarStatus> status_;
    std::vector<Index> basic_;
    Eigen::PartialPivLU<Matrix> lu_;
    Index total_ = 0, m_ = 0;
};

double box_stationarity_distance(const Vector& v, const Vector& x, const Vector& lo,
                                 const Vector& hi) {
    // Distance (infinity norm) from v to the normal cone of [lo, hi] at x.
    double worst = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
        const double at_tol = 1e-9 * (1.0 + std::abs(x[j]));
        const bool at_lo = x[j] <= lo[j] + at_tol;
        const bool at_hi = x[j] >= hi[j] - at_tol;
        double d;
        if (at_lo && at_hi)
            d = 0.0;  // fixed coordinate: normal cone is all of R
        else if (at_lo)
            d = std::max(v[j], 0.0);  // cone (-inf, 0]
        else if (at_hi)
            d = std::max(-v[j], 0.0);  // cone [0, +inf)
        else
            d = std::abs(v[j]);  // interior: cone {0}
        worst = std::max(worst, d);
    }
    return worst;
}

}  // namespace

OptimalCertificate solve_reference(const ProblemSpec& spec) {
    spec.validate();
    if (spec.n > kOracleDimCap)
        throw std::invalid_argument("solve_reference: instance over oracle cap (n <= 50)");

    const Index n = spec.n, p = spec.num_ineq(), q = spec.num_eq();
    const Index m = p + q;
    const Index total = n + p + m;  // structurals, slacks, artificials

    Matrix a = Matrix::Zero(m, total);
    Vector rhs(m);
    a.block(0, 0, p, n) = spec.a_ineq;
    a.block(p, 0, q, n) = spec.a_eq;
    for (Index r = 0; r < p; ++r) a(r, n + r) = 1.0;
    rhs.head(p) = -spec.b_ineq;
    rhs.tail(q) = -spec.b_eq;

    Vector lo(total), up(total);
    lo.head(n) = spec.lower;
    up.head(n) = spec.upper;
    for (Index j = n; j < total; ++j) {
        lo[j] = 0.0;
        up[j] = kInf;
    }

    // Artificial columns signed so the starting basis is feasible.
    Vector resid = rhs;
    for (Index j = 0; j < n + p; ++j) resid -= a.col(j) * lo[j];
    for (Index r = 0; r < m; ++r) a(r, n + p + r) = resid[r] >= 0.0 ? 1.0 : -1.0;

    BoundedSimplex simplex(a, rhs, lo, up);
    std::vector<Index> basis(static_cast<size_t>(m));
    for (Index r = 0; r < m; ++r) {
        basis[static_cast<size_t>(r)] = n + p + r;
        simplex.set_status(n + p + r, VarStatus::kBasic);
    }
    simplex.set_basis(basis);

    OptimalCertificate cert;
    if (m > 0) {
        Vector phase1_cost = Vector::Zero(total);
        phase1_cost.tail(m).setOnes();
        const double infeas = simplex.minimize(phase1_cost);
        if (infeas > kFeasTol) {
            cert.status = OracleStatus::kInfeasible;
            return cert;
        }
        for (Index r = 0; r < m; ++r) simplex.set_bounds(n + p + r, 0.0, 0.0);
    }

    Vector cost = Vector::Zero(total);
    cost.head(n) = spec.cost;
    simplex.minimize(cost);

    cert.status = OracleStatus::kOptimal;
    cert.x_star = simplex.values().head(n);
    cert.f_star = spec.cost.dot(cert.x_star);
    if (m > 0) {
        Vector y = simplex.row_duals(cost);
        cert.mu_star = (-y.head(p)).cwiseMax(0.0);
        cert.nu_star = -y.tail(q);
    } else {
        cert.mu_star = Vector(0);
        cert.nu_star = Vector(0);
    }
    cert.kkt_residual = kkt_residual(spec, cert.x_star, cert.mu_star, cert.nu_star);
    return cert;
}

OptimalCertificate enumerate_vertices(const ProblemSpec& spec) {
    spec.validate();
    const Index n = spec.n, p = spec.num_ineq(), q = spec.num_eq();
    OptimalCertificate cert;
    if (q > n) {
        cert.status = OracleStatus::kInfeasible;
        return cert;
    }
    const Index pick = n - q;
    const Index candidates = p + 2 * n;  // ineq rows, lower faces, upper faces

    double combos = 1.0;
    for (Index i = 0; i < pick; ++i) combos *= double(candidates - i) / double(i + 1);
    if (combos > 2e7) throw std::invalid_argument("enumerate_vertices: instance too large");

    Matrix k(n, n);
    Vector rhs(n);
    k.topRows(q) = spec.a_eq;
    rhs.head(q) = -spec.b_eq;

    double best = kInf;
    Vector best_x;
    std::vector<Index> sel(static_cast<size_t>(pick));
    for (Index i = 0; i < pick; ++i) sel[static_cast<size_t>(i)] = i;

    auto describe = [&](Index c, Index row) {
        if (c < p) {
            k.row(row) = spec.a_ineq.row(c);
            rhs[row] = -spec.b_ineq[c];
        } else if (c < p + n) {
            k.row(row).setZero();
            k(row, c - p) = 1.0;
            rhs[row] = spec.lower[c - p];
        } else {
            k.row(row).setZero();
            k(row, c - p - n) = 1.0;
            rhs[row] = spec.upper[c - p - n];
        }
    };

    const double tol = 1e-9;
    while (true) {
        bool skip = false;
        for (Index i = 0; i + 1 < pick && !skip; ++i) {
            // lower and upper face of the same variable are parallel
            const Index ci = sel[static_cast<size_t>(i)];
            for (Index j = i + 1; j < pick; ++j) {
                const Index cj = sel[static_cast<size_t>(j)];
                if (ci >= p && cj >= p && (ci - p) % n == (cj - p) % n) {
                    skip = true;
                    break;
                }
            }
        }
        if (!skip) {
            for (Index i = 0; i < pick; ++i) describe(sel[static_cast<size_t>(i)], q + i);
            Eigen::FullPivLU<Matrix> lu(k);
            lu.setThreshold(1e-10);
            if (lu.rank() == n) {
                Vector x = lu.solve(rhs);
                bool feasible = x.allFinite();
                for (Index j = 0; feasible && j < n; ++j)
                    feasible = x[j] >= spec.lower[j] - tol && x[j] <= spec.upper[j] + tol;
                if (feasible && p > 0)
                    feasible = ((spec.a_ineq * x + spec.b_ineq).array() <= tol).all();
                if (feasible && q > 0)
                    feasible = ((spec.a_eq * x + spec.b_eq).array().abs() <= tol).all();
                if (feasible) {
                    const double f = spec.cost.dot(x);
                    if (f < best) {
                        best = f;
                        best_x = x;
                    }
                }
            }
        }
        // next combination
        Index i = pick;
        while (i > 0 && sel[static_cast<size_t>(i - 1)] == candidates - pick + (i - 1)) --i;
        if (i == 0) break;
        ++sel[static_cast<size_t>(i - 1)];
        for (Index j = i; j < pick; ++j)
            sel[static_cast<size_t>(j)] = sel[static_cast<size_t>(j - 1)] + 1;
    }

    if (!std::isfinite(best)) {
        cert.status = OracleStatus::kInfeasible;
        return cert;
    }
    cert.status = OracleStatus::kOptimal;
    cert.x_star = best_x;
    cert.f_star = best;
    return cert;
}

double kkt_residual(const ProblemSpec& spec, const PartitionPlan& plan, const Vector& x,
                    const std::vector<Vector>& w, const std::vector<Vector>& mu,
                    const std::vector<Vector>& nu) {
    plan.validate(spec);
    double worst = 0.0;

    // Primal feasibility.
    for (Index j = 0; j < spec.n; ++j) {
        worst = std::max(worst, spec.lower[j] - x[j]);
        worst = std::max(worst, x[j] - spec.upper[j]);
    }
    if (spec.num_ineq() > 0)
        worst = std::max(worst, (spec.a_ineq * x + spec.b_ineq).maxCoeff());
    if (spec.num_eq() > 0)
        worst = std::max(worst, (spec.a_eq * x + spec.b_eq).cwiseAbs().maxCoeff());

    for (int i = 0; i < plan.num_blocks; ++i) {
        Vector v = -w[static_cast<size_t>(i)] - spec.cost;
        const auto& gi = plan.ineq_rows[static_cast<size_t>(i)];
        const auto& hi = plan.eq_rows[static_cast<size_t>(i)];
        double compl_slack = 0.0;
        for (size_t r = 0; r < gi.size(); ++r) {
            const double mu_r = mu[static_cast<size_t>(i)][static_cast<Index>(r)];
            v -= spec.a_ineq.row(gi[r]).transpose() * mu_r;
            compl_slack += mu_r * (spec.a_ineq.row(gi[r]).dot(x) + spec.b_ineq[gi[r]]);
            worst = std::max(worst, -mu_r - 1e-12);  // mu >= -1e-12
        }
        for (size_t r = 0; r < hi.size(); ++r)
            v -= spec.a_eq.row(hi[r]).transpose() * nu[static_cast<size_t>(i)][static_cast<Index>(r)];
        worst = std::max(worst, std::abs(compl_slack));
        worst = std::max(worst, box_stationarity_distance(v, x, spec.lower, spec.upper));
    }
    return std::max(worst, 0.0);
}

double kkt_residual(const ProblemSpec& spec, const Vector& x, const Vector& mu,
                    const Vector& nu) {
    PartitionPlan plan = partition(spec, 1, 1);
    std::vector<Vector> w{Vector::Zero(spec.n)};
    return kkt_residual(spec, plan, x, w, {mu}, {nu});
}

double numeric_minimize(const std::function<double(double)>& f, double lo, double hi,
                        double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace conslp
