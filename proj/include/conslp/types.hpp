#ifndef CONSLP_TYPES_HPP_
#define CONSLP_TYPES_HPP_

#include <Eigen/Dense>

namespace conslp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Half-open column range [begin, end) of one subvector.
struct ColRange {
    Index begin = 0;
    Index end = 0;
    Index size() const { return end - begin; }
};

inline Vector clip(const Vector& v, const Vector& lo, const Vector& hi) {
    return v.cwiseMax(lo).cwiseMin(hi);
}

inline double clip(double v, double lo, double hi) {
    return std::min(std::max(v, lo), hi);
}

}  // namespace conslp

#endif  // CONSLP_TYPES_HPP_
