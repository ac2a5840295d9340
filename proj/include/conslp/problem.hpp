#ifndef CONSLP_PROBLEM_HPP_
#define CONSLP_PROBLEM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "conslp/types.hpp"

namespace conslp {

/// A box-bounded linear program
///   minimize  <cost, z>
///   s.t.      a_ineq * z + b_ineq <= 0
///             a_eq   * z + b_eq   == 0
///             lower <= z <= upper   (both finite).
struct ProblemSpec {
    Index n = 0;
    Vector cost;
    Matrix a_ineq;  // p x n
    Vector b_ineq;  // p
    Matrix a_eq;    // q x n
    Vector b_eq;    // q
    Vector lower;
    Vector upper;

    Index num_ineq() const { return b_ineq.size(); }
    Index num_eq() const { return b_eq.size(); }

    double objective(const Vector& z) const { return cost.dot(z); }
    Vector ineq_value(const Vector& z) const { return a_ineq * z + b_ineq; }
    Vector eq_value(const Vector& z) const { return a_eq * z + b_eq; }

    /// Throws std::invalid_argument on any violated structural invariant.
    void validate() const;

    bool operator==(const ProblemSpec& other) const;
};

/// Row assignment to N consensus blocks plus the column split shared by
/// every block: M contiguous subvector ranges covering all n columns.
struct PartitionPlan {
    int num_blocks = 1;      // N
    int num_subvectors = 1;  // M
    std::vector<std::vector<Index>> ineq_rows;  // per block, ascending
    std::vector<std::vector<Index>> eq_rows;    // per block, ascending
    std::vector<ColRange> col_ranges;           // M entries, disjoint, exhaustive

    /// Throws std::invalid_argument unless the plan covers `spec` exactly.
    void validate(const ProblemSpec& spec) const;
};

/// Interval-arithmetic upper bounds for the slack variables of each block.
/// A row whose bound would be negative can never satisfy g <= 0 inside the
/// box; it is clamped to 0 and reported in `infeasible_rows`.
struct SlackBounds {
    std::vector<Vector> upper;                        // per block, one entry per ineq row
    std::vector<std::vector<Index>> infeasible_rows;  // block-local row indices

    bool any_infeasible() const {
        for (const auto& rows : infeasible_rows)
            if (!rows.empty()) return true;
        return false;
    }
};

/// Parse the JSON problem format; throws std::invalid_argument on malformed
/// input or any ProblemSpec invariant violation.
ProblemSpec parse_problem(const std::string& text);

/// Serialize in the same JSON format parse_problem reads. Numbers are
/// emitted shortest-round-trip, so parse(serialize(s)) == s exactly.
std::string serialize_problem(const ProblemSpec& spec);

/// Deal constraint rows round-robin (row r -> block r mod N) and split
/// columns into M contiguous ranges whose sizes differ by at most one.
PartitionPlan partition(const ProblemSpec& spec, int num_blocks, int num_subvectors);

SlackBounds slack_upper_bounds(const ProblemSpec& spec, const PartitionPlan& plan);

struct GenOptions {
    double box_halfwidth = 1.0;   // box is roughly [-(1+w), +(1+w)] per coordinate
    double cost_scale = 1.0;
    double margin_min = 0.1;      // inequality slack s at the interior point
    double margin_max = 1.0;
};

/// Construction point and margins used by generate_instance, reported so
/// callers can display or verify them.
struct GenInfo {
    Vector interior_point;
    Vector margins;
};

/// Deterministically generate a feasible instance: draw an interior point
/// x0, then set b_ineq = -a_ineq*x0 - s (s > 0) and b_eq = -a_eq*x0.
ProblemSpec generate_instance(std::uint64_t seed, Index n, Index p, Index q,
                              const GenOptions& options = {}, GenInfo* info = nullptr);

}  // namespace conslp

#endif  // CONSLP_PROBLEM_HPP_
