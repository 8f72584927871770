#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "risfl/core/rng.hpp"

namespace risfl::nn {

/// Column-major batches: one sample per column.
using Matrix = Eigen::MatrixXd;

enum class Activation { relu, tanh, identity };

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Matrix v);
    void zero_grad() { grad.setZero(); }
};

struct DenseLayer {
    Parameter weight;  // out x in
    Parameter bias;    // out x 1
    Activation activation = Activation::identity;

    DenseLayer() = default;
    /// Weights Uniform(+-1/sqrt(in)), biases zero.
    DenseLayer(const std::string& name, std::size_t in, std::size_t out, Activation act, RngStream& rng);

    std::size_t in() const { return static_cast<std::size_t>(weight.value.cols()); }
    std::size_t out() const { return static_cast<std::size_t>(weight.value.rows()); }
    std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

struct DenseCache {
    Matrix input;
    Matrix output;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& x, DenseCache* cache = nullptr);

struct DenseGrads {
    Matrix dx;
    Matrix dw;
    Matrix db;
};

/// Gradients of sum(dy .* y) with respect to input and parameters.
DenseGrads dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dy);
/// Accumulates into the layer's parameter gradients and returns dx.
Matrix dense_backward(DenseLayer& layer, const DenseCache& cache, const Matrix& dy);

/// Gate rows of the stacked weight, in order.
enum class Gate { input = 0, forget = 1, output = 2, candidate = 3 };

struct LstmCell {
    Parameter weight;  // 4H x (I + H), row blocks ordered as Gate
    Parameter bias;    // 4H x 1; forget block initialised to 1
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;

    LstmCell() = default;
    LstmCell(const std::string& name, std::size_t input, std::size_t hidden, RngStream& rng);

    std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

struct LstmStepCache {
    Matrix concat;  // [x; h_prev]
    Matrix gate_i, gate_f, gate_o, candidate;
    Matrix c_prev, c, tanh_c;
};

struct LstmCache {
    std::vector<LstmStepCache> steps;
};

struct LstmOutput {
    std::vector<Matrix> h;  // one per step
    Matrix c;               // final cell state
};

LstmOutput lstm_forward(const LstmCell& cell, const std::vector<Matrix>& xs, const Matrix& h0, const Matrix& c0,
                        LstmCache* cache = nullptr);

struct LstmInputGrads {
    std::vector<Matrix> dx;
    Matrix dh0;
    Matrix dc0;
};

/// Backpropagation through time. dh[t] is the loss gradient with respect to h_t;
/// an empty matrix stands for zero. Parameter gradients are accumulated into the cell.
LstmInputGrads lstm_backward(LstmCell& cell, const LstmCache& cache, const std::vector<Matrix>& dh,
                             const Matrix& dc_final);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

AdamState make_adam(std::span<Parameter* const> params, double lr);
/// One bias-corrected Adam descent step using each parameter's grad.
void adam_step(AdamState& state, std::span<Parameter* const> params);

/// target <- tau * online + (1 - tau) * target
void soft_update(std::span<Parameter* const> target, std::span<Parameter* const> online, double tau);

/// Max relative error |analytic - central difference| / (|analytic| + floor) over a
/// random subset of parameter entries. compute_grads must fill every grad with
/// the analytic gradient of loss.
double finite_diff_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                         const std::function<void()>& compute_grads, RngStream& rng, double h = 1e-5,
                         std::size_t max_entries = 200, double floor = 1e-12);

void save_checkpoint(std::span<Parameter* const> params, const std::string& path);
/// Validates names and shapes before copying any value.
void load_checkpoint(std::span<Parameter* const> params, const std::string& path);

}  // namespace risfl::nn
