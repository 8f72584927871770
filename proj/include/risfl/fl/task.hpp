#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "risfl/core/rng.hpp"
#include "risfl/core/scenario.hpp"

namespace risfl {

struct SyntheticTaskOptions {
    std::size_t num_users = 14;
    std::size_t dim = 10;
    std::size_t samples_per_user = 20;
    double condition_number = 10.0;  // ratio of largest to smallest feature variance
    double heterogeneity = 0.5;      // spread of user-specific regression weights
    double label_noise = 0.1;
};

/// Federated least squares: F_k(w) = 1/2 ||A_k w - b_k||^2, F = mean_k F_k.
///
/// A_k and b_k already carry the 1/sqrt(D) factor, so the local gradient is the
/// average per-sample gradient of user k's D samples.
class QuadraticTask {
public:
    QuadraticTask(std::vector<Eigen::MatrixXd> a, std::vector<Eigen::VectorXd> b);

    static QuadraticTask synthetic(RngStream& rng, const SyntheticTaskOptions& options);

    std::size_t num_users() const noexcept { return a_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    double loss(const Eigen::VectorXd& w) const;
    double user_loss(std::size_t k, const Eigen::VectorXd& w) const;
    Eigen::VectorXd local_gradient(std::size_t k, const Eigen::VectorXd& w) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& w) const;

    const Eigen::MatrixXd& hessian() const noexcept { return hessian_; }
    const Eigen::VectorXd& optimum() const noexcept { return optimum_; }
    double optimal_loss() const noexcept { return optimal_loss_; }
    double gap(const Eigen::VectorXd& w) const { return loss(w) - optimal_loss_; }
    double smoothness() const noexcept { return smoothness_; }
    double pl_constant() const noexcept { return pl_constant_; }

    /// min(0.9 * 2/(2+L), 1/L)
    double default_learn_rate() const;

private:
    std::vector<Eigen::MatrixXd> a_;
    std::vector<Eigen::VectorXd> b_;
    std::size_t dim_ = 0;
    Eigen::MatrixXd hessian_;
    Eigen::VectorXd optimum_;
    double optimal_loss_ = 0.0;
    double smoothness_ = 0.0;
    double pl_constant_ = 0.0;
};

/// L and mu from the Hessian, lambda from the task default unless given, and
/// varpi^2 and delta from the noiseless gradient-descent path of `rounds` steps
/// (1.5 safety factor on the observed maxima). Throws if mu is zero.
BoundConstants estimate_constants(const QuadraticTask& task, std::size_t rounds, double learn_rate = 0.0);

}  // namespace risfl
