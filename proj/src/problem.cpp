#include "conslp/problem.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace conslp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

Vector to_vector(const json& j, const char* name) {
    if (!j.is_array()) fail(std::string(name) + ": expected an array");
    Vector v(static_cast<Index>(j.size()));
    Index i = 0;
    for (const auto& e : j) {
        if (!e.is_number()) fail(std::string(name) + ": expected numeric entries");
        v[i++] = e.get<double>();
    }
    return v;
}

Matrix to_matrix(const json& j, Index cols, const char* name) {
    if (!j.is_array()) fail(std::string(name) + ": expected an array of rows");
    Matrix m(static_cast<Index>(j.size()), cols);
    Index r = 0;
    for (const auto& row : j) {
        Vector v = to_vector(row, name);
        if (v.size() != cols) fail(std::string(name) + ": dimension mismatch");
        m.row(r++) = v.transpose();
    }
    return m;
}

json from_vector(const Vector& v) {
    json j = json::array();
    for (Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

json from_matrix(const Matrix& m) {
    json j = json::array();
    for (Index r = 0; r < m.rows(); ++r) j.push_back(from_vector(m.row(r).transpose()));
    return j;
}

}  // namespace

void ProblemSpec::validate() const {
    if (n < 1) fail("n must be >= 1");
    if (cost.size() != n) fail("cost: dimension mismatch");
    if (lower.size() != n || upper.size() != n) fail("bounds: dimension mismatch");
    if (a_ineq.rows() != b_ineq.size()) fail("inequality system: dimension mismatch");
    if (a_eq.rows() != b_eq.size()) fail("equality system: dimension mismatch");
    if (b_ineq.size() > 0 && a_ineq.cols() != n) fail("A_G: dimension mismatch");
    if (b_eq.size() > 0 && a_eq.cols() != n) fail("A_H: dimension mismatch");
    for (Index j = 0; j < n; ++j) {
        if (!std::isfinite(lower[j]) || !std::isfinite(upper[j])) fail("non-finite bound");
        if (lower[j] > upper[j]) fail("lower > upper");
    }
    if (!cost.allFinite() || !b_ineq.allFinite() || !b_eq.allFinite() ||
        !a_ineq.allFinite() || !a_eq.allFinite())
        fail("non-finite coefficient");
}

bool ProblemSpec::operator==(const ProblemSpec& other) const {
    auto mat_eq = [](const Matrix& a, const Matrix& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
    };
    auto vec_eq = [](const Vector& a, const Vector& b) {
        return a.size() == b.size() && a == b;
    };
    return n == other.n && vec_eq(cost, other.cost) && vec_eq(b_ineq, other.b_ineq) &&
           vec_eq(b_eq, other.b_eq) && vec_eq(lower, other.lower) &&
           vec_eq(upper, other.upper) && mat_eq(a_ineq, other.a_ineq) &&
           mat_eq(a_eq, other.a_eq);
}

ProblemSpec parse_problem(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("malformed problem file: ") + e.what());
    }
    for (const char* key : {"n", "cost", "A_G", "b_G", "A_H", "b_H", "lower", "upper"})
        if (!j.contains(key)) fail(std::string("missing field: ") + key);

    ProblemSpec spec;
    if (!j["n"].is_number_integer()) fail("n: expected an integer");
    spec.n = j["n"].get<Index>();
    if (spec.n < 1) fail("n must be >= 1");
    spec.cost = to_vector(j["cost"], "cost");
    spec.b_ineq = to_vector(j["b_G"], "b_G");
    spec.b_eq = to_vector(j["b_H"], "b_H");
    spec.lower = to_vector(j["lower"], "lower");
    spec.upper = to_vector(j["upper"], "upper");
    spec.a_ineq = to_matrix(j["A_G"], spec.n, "A_G");
    spec.a_eq = to_matrix(j["A_H"], spec.n, "A_H");
    if (spec.a_ineq.rows() != spec.b_ineq.size()) fail("inequality system: dimension mismatch");
    if (spec.a_eq.rows() != spec.b_eq.size()) fail("equality system: dimension mismatch");
    spec.validate();
    return spec;
}

std::string serialize_problem(const ProblemSpec& spec) {
    json j;
    j["n"] = spec.n;
    j["cost"] = from_vector(spec.cost);
    j["A_G"] = from_matrix(spec.a_ineq);
    j["b_G"] = from_vector(spec.b_ineq);
    j["A_H"] = from_matrix(spec.a_eq);
    j["b_H"] = from_vector(spec.b_eq);
    j["lower"] = from_vector(spec.lower);
    j["upper"] = from_vector(spec.upper);
    return j.dump(2);
}

PartitionPlan partition(const ProblemSpec& spec, int num_blocks, int num_subvectors) {
    if (num_blocks < 1) fail("N must be >= 1");
    if (num_subvectors < 1) fail("M must be >= 1");
    if (num_subvectors > spec.n) fail("M must be <= n");

    PartitionPlan plan;
    plan.num_blocks = num_blocks;
    plan.num_subvectors = num_subvectors;
    plan.ineq_rows.resize(num_blocks);
    plan.eq_rows.resize(num_blocks);
    for (Index r = 0; r < spec.num_ineq(); ++r)
        plan.ineq_rows[r % num_blocks].push_back(r);
    for (Index r = 0; r < spec.num_eq(); ++r)
        plan.eq_rows[r % num_blocks].push_back(r);

    const Index base = spec.n / num_subvectors;
    const Index rem = spec.n % num_subvectors;
    Index start = 0;
    for (int l = 0; l < num_subvectors; ++l) {
        const Index size = base + (l < rem ? 1 : 0);
        plan.col_ranges.push_back({start, start + size});
        start += size;
    }
    return plan;
}

void PartitionPlan::validate(const ProblemSpec& spec) const {
    if (num_blocks < 1 || num_subvectors < 1) fail("partition plan: N, M must be >= 1");
    if (static_cast<int>(ineq_rows.size()) != num_blocks ||
        static_cast<int>(eq_rows.size()) != num_blocks)
        fail("partition plan: row sets do not match N");
    auto check_cover = [](const std::vector<std::vector<Index>>& sets, Index total,
                          const char* what) {
        std::vector<char> seen(static_cast<size_t>(total), 0);
        for (const auto& s : sets)
            for (Index r : s) {
                if (r < 0 || r >= total) fail(std::string(what) + ": row index out of range");
                if (seen[static_cast<size_t>(r)]) fail(std::string(what) + ": row assigned twice");
                seen[static_cast<size_t>(r)] = 1;
            }
        for (char c : seen)
            if (!c) fail(std::string(what) + ": row not assigned");
    };
    check_cover(ineq_rows, spec.num_ineq(), "ineq rows");
    check_cover(eq_rows, spec.num_eq(), "eq rows");

    if (static_cast<int>(col_ranges.size()) != num_subvectors)
        fail("partition plan: column ranges do not match M");
    Index expect = 0;
    for (const auto& cr : col_ranges) {
        if (cr.begin != expect || cr.size() < 1) fail("partition plan: bad column ranges");
        expect = cr.end;
    }
    if (expect != spec.n) fail("partition plan: column ranges do not cover all columns");
}

SlackBounds slack_upper_bounds(const ProblemSpec& spec, const PartitionPlan& plan) {
    plan.validate(spec);
    SlackBounds out;
    out.upper.resize(plan.ineq_rows.size());
    out.infeasible_rows.resize(plan.ineq_rows.size());
    for (size_t i = 0; i < plan.ineq_rows.size(); ++i) {
        const auto& rows = plan.ineq_rows[i];
        Vector u(static_cast<Index>(rows.size()));
        for (size_t k = 0; k < rows.size(); ++k) {
            const Index r = rows[k];
            double interval_min = spec.b_ineq[r];
            for (Index j = 0; j < spec.n; ++j) {
                const double a = spec.a_ineq(r, j);
                interval_min += std::min(a * spec.lower[j], a * spec.upper[j]);
            }
            double bound = -interval_min;
            if (bound < 0.0) {
                out.infeasible_rows[i].push_back(static_cast<Index>(k));
                bound = 0.0;
            }
            u[static_cast<Index>(k)] = bound;
        }
        out.upper[i] = std::move(u);
    }
    return out;
}

namespace {

// Uniform doubles derived from raw mt19937_64 output so that generated
// instances do not depend on the standard library's distribution details.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace

ProblemSpec generate_instance(std::uint64_t seed, Index n, Index p, Index q,
                              const GenOptions& options, GenInfo* info) {
    if (n < 1) fail("generate_instance: n must be >= 1");
    if (p < 0 || q < 0) fail("generate_instance: p, q must be >= 0");
    if (q > n) fail("generate_instance: q must be <= n");

    Rng rng(seed);
    ProblemSpec spec;
    spec.n = n;
    spec.lower = Vector(n);
    spec.upper = Vector(n);
    spec.cost = Vector(n);
    for (Index j = 0; j < n; ++j) {
        spec.lower[j] = -1.0 - rng.uniform(0.0, options.box_halfwidth);
        spec.upper[j] = 1.0 + rng.uniform(0.0, options.box_halfwidth);
        spec.cost[j] = options.cost_scale * rng.uniform(-1.0, 1.0);
    }
    Vector x0(n);
    for (Index j = 0; j < n; ++j) {
        const double t = rng.uniform(0.2, 0.8);
        x0[j] = spec.lower[j] + t * (spec.upper[j] - spec.lower[j]);
    }
    spec.a_ineq = Matrix(p, n);
    for (Index r = 0; r < p; ++r)
        for (Index j = 0; j < n; ++j) spec.a_ineq(r, j) = rng.uniform(-1.0, 1.0);
    Vector margins(p);
    for (Index r = 0; r < p; ++r) margins[r] = rng.uniform(options.margin_min, options.margin_max);
    spec.b_ineq = p > 0 ? Vector(-spec.a_ineq * x0 - margins) : Vector(0);

    spec.a_eq = Matrix(q, n);
    for (Index r = 0; r < q; ++r)
        for (Index j = 0; j < n; ++j) spec.a_eq(r, j) = rng.uniform(-1.0, 1.0);
    spec.b_eq = q > 0 ? Vector(-spec.a_eq * x0) : Vector(0);

    spec.validate();
    if (info) {
        info->interior_point = x0;
        info->margins = margins;
    }
    return spec;
}

}  // namespace conslp
