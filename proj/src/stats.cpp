#include "risfl/core/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace risfl {

double MeanVar::std_error() const {
    if (count == 0) return 0.0;
    return std::sqrt(variance / static_cast<double>(count));
}

MeanVar mean_var(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("mean_var: empty sample list");
    RunningStats stats;
    for (double x : samples) stats.add(x);
    return stats.result();
}

void RunningStats::add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
}

MeanVar RunningStats::result() const {
    MeanVar out;
    out.count = count_;
    out.mean = mean_;
    out.variance = count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
    return out;
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares_slope: need two or more paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("least_squares_slope: x has no spread");
    return sxy / sxx;
}

}  // namespace risfl
