#include "ntl/metrics.hpp"

#include "ntl/error.hpp"

#include <algorithm>
#include <cmath>

namespace ntl {

double mae(std::span<const double> pred, std::span<const double> truth) {
    if (pred.empty() || truth.empty()) {
        fail(ErrorCode::EmptyInput, "metric on empty input");
    }
    if (pred.size() != truth.size()) {
        fail(ErrorCode::LengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                            " values, truth has " + std::to_string(truth.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - truth[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

double mre(std::span<const double> pred, std::span<const double> truth) {
    double err = mae(pred, truth);
    auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
    if (!(*hi > *lo)) {
        fail(ErrorCode::DegenerateRange, "truth range is zero");
    }
    return err / (*hi - *lo) * 100.0;
}

} // namespace ntl
