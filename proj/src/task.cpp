#include "risfl/fl/task.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace risfl {

QuadraticTask::QuadraticTask(std::vector<Eigen::MatrixXd> a, std::vector<Eigen::VectorXd> b)
    : a_(std::move(a)), b_(std::move(b)) {
    if (a_.empty() || a_.size() != b_.size()) throw std::invalid_argument("QuadraticTask: need one (A, b) pair per user");
    dim_ = static_cast<std::size_t>(a_.front().cols());
    hessian_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < a_.size(); ++k) {
        if (static_cast<std::size_t>(a_[k].cols()) != dim_ || a_[k].rows() != b_[k].size())
            throw std::invalid_argument("QuadraticTask: inconsistent shapes");
        hessian_ += a_[k].transpose() * a_[k];
        rhs += a_[k].transpose() * b_[k];
    }
    const double inv_k = 1.0 / static_cast<double>(a_.size());
    hessian_ *= inv_k;
    rhs *= inv_k;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_, Eigen::EigenvaluesOnly);
    pl_constant_ = std::max(eig.eigenvalues().minCoeff(), 0.0);
    smoothness_ = eig.eigenvalues().maxCoeff();
    if (pl_constant_ > 0.0) {
        optimum_ = hessian_.ldlt().solve(rhs);
    } else {
        optimum_ = hessian_.completeOrthogonalDecomposition().solve(rhs);
    }
    optimal_loss_ = loss(optimum_);
}

QuadraticTask QuadraticTask::synthetic(RngStream& rng, const SyntheticTaskOptions& o) {
    if (o.num_users == 0 || o.dim == 0 || o.samples_per_user == 0) throw std::invalid_argument("synthetic task: empty shape");
    if (!(o.condition_number >= 1.0)) throw std::invalid_argument("synthetic task: condition number below 1");
    const auto q = static_cast<Eigen::Index>(o.dim);
    const auto d = static_cast<Eigen::Index>(o.samples_per_user);
    Eigen::VectorXd scale(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        const double frac = q > 1 ? static_cast<double>(j) / static_cast<double>(q - 1) : 0.0;
        scale[j] = std::pow(o.condition_number, 0.5 * frac);
    }
    Eigen::VectorXd truth(q);
    for (Eigen::Index j = 0; j < q; ++j) truth[j] = rng.normal();

    std::vector<Eigen::MatrixXd> a;
    std::vector<Eigen::VectorXd> b;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t k = 0; k < o.num_users; ++k) {
        Eigen::VectorXd weights(q);
        for (Eigen::Index j = 0; j < q; ++j) weights[j] = truth[j] + o.heterogeneity * rng.normal();
        Eigen::MatrixXd x(d, q);
        Eigen::VectorXd y(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < q; ++j) x(i, j) = scale[j] * rng.normal();
            y[i] = x.row(i).dot(weights) + o.label_noise * rng.normal();
        }
        a.push_back(x * inv_sqrt_d);
        b.push_back(y * inv_sqrt_d);
    }
    return QuadraticTask(std::move(a), std::move(b));
}

double QuadraticTask::user_loss(std::size_t k, const Eigen::VectorXd& w) const {
    return 0.5 * (a_.at(k) * w - b_[k]).squaredNorm();
}

double QuadraticTask::loss(const Eigen::VectorXd& w) const {
    double total = 0.0;
    for (std::size_t k = 0; k < a_.size(); ++k) total += user_loss(k, w);
    return total / static_cast<double>(a_.size());
}

Eigen::VectorXd QuadraticTask::local_gradient(std::size_t k, const Eigen::VectorXd& w) const {
    if (static_cast<std::size_t>(w.size()) != dim_) throw std::invalid_argument("local_gradient: wrong model dimension");
    return a_.at(k).transpose() * (a_[k] * w - b_[k]);
}

Eigen::VectorXd QuadraticTask::gradient(const Eigen::VectorXd& w) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < a_.size(); ++k) g += local_gradient(k, w);
    return g / static_cast<double>(a_.size());
}

double QuadraticTask::default_learn_rate() const {
    return std::min(0.9 * 2.0 / (2.0 + smoothness_), 1.0 / smoothness_);
}

BoundConstants estimate_constants(const QuadraticTask& task, std::size_t rounds, double learn_rate) {
    if (!(task.pl_constant() > 0.0)) throw std::invalid_argument("estimate_constants: task is not strongly convex");
    BoundConstants c;
    c.smoothness = task.smoothness();
    c.pl_constant = task.pl_constant();
    c.learn_rate = learn_rate > 0.0 ? learn_rate : task.default_learn_rate();
    c.grad_dim = task.dim();

    const auto q = static_cast<Eigen::Index>(task.dim());
    const double users = static_cast<double>(task.num_users());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(q);
    double max_norm = 0.0;
    Eigen::VectorXd max_var = Eigen::VectorXd::Zero(q);
    for (std::size_t t = 0; t <= rounds; ++t) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
        std::vector<Eigen::VectorXd> grads;
        for (std::size_t k = 0; k < task.num_users(); ++k) {
            grads.push_back(task.local_gradient(k, w));
            max_norm = std::max(max_norm, grads.back().squaredNorm());
            mean += grads.back();
        }
        mean /= users;
        // Pairwise form of the population variance: exactly zero for identical users.
        Eigen::VectorXd var = Eigen::VectorXd::Zero(q);
        for (std::size_t k = 0; k < grads.size(); ++k)
            for (std::size_t l = k + 1; l < grads.size(); ++l) var += (grads[k] - grads[l]).cwiseAbs2();
        max_var = max_var.cwiseMax(var / (users * users));
        w -= c.learn_rate * mean;
    }
    c.grad_norm_bound = 1.5 * max_norm;
    c.var_bounds.resize(task.dim());
    for (Eigen::Index j = 0; j < q; ++j) c.var_bounds[static_cast<std::size_t>(j)] = std::sqrt(1.5 * max_var[j]);
    c.validate();
    return c;
}

}  // namespace risfl
