#pragma once

#include <Eigen/Core>

#include <span>

namespace ntl {

// Root of the mean squared nodal error.
double mae(std::span<const double> pred, std::span<const double> truth);
// mae / (max(truth) - min(truth)) * 100
double mre(std::span<const double> pred, std::span<const double> truth);

inline double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return mae(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
               std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}
inline double mre(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return mre(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
               std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

} // namespace ntl
