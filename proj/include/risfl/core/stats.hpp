#pragma once

#include <cstddef>
#include <span>

namespace risfl {

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;  // unbiased; 0 for a single sample
    std::size_t count = 0;

    double std_error() const;
};

MeanVar mean_var(std::span<const double> samples);

/// Streaming mean/variance (Welford).
class RunningStats {
public:
    void add(double x);
    MeanVar result() const;
    std::size_t count() const noexcept { return count_; }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Ordinary least-squares slope of y on x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace risfl
