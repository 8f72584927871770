#pragma once

#include <cstddef>
#include <vector>

#include "risfl/nn/layers.hpp"

namespace risfl::nn {

struct NetworkShape {
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::size_t hidden = 512;
    bool recurrent = true;  // LSTM first layer over the state history
};

/// State history, oldest first; each entry is state_dim x batch. Feed-forward
/// networks only read the last entry.
using Sequence = std::vector<Matrix>;

/// Policy network: first layer (LSTM or dense ReLU), dense ReLU, dense tanh.
class Actor {
public:
    Actor() = default;
    Actor(const NetworkShape& shape, RngStream& rng);

    const NetworkShape& shape() const noexcept { return shape_; }
    Matrix forward(const Sequence& states) const;
    /// Forward pass that keeps activations for backward.
    Matrix forward_train(const Sequence& states);
    /// Accumulates parameter gradients of sum(d_action .* action).
    void backward(const Matrix& d_action);
    std::vector<Parameter*> parameters();

private:
    Matrix first_layer(const Sequence& states, LstmCache* lstm_cache, DenseCache* dense_cache) const;

    NetworkShape shape_;
    LstmCell lstm_;
    DenseLayer input_;
    DenseLayer hidden_;
    DenseLayer output_;
    LstmCache lstm_cache_;
    DenseCache input_cache_, hidden_cache_, output_cache_;
    std::size_t steps_ = 0;
};

/// Action-value network: first layer on the state, concatenated with the action,
/// dense ReLU, linear scalar output.
class Critic {
public:
    Critic() = default;
    Critic(const NetworkShape& shape, RngStream& rng);

    const NetworkShape& shape() const noexcept { return shape_; }
    Matrix forward(const Sequence& states, const Matrix& actions) const;
    Matrix forward_train(const Sequence& states, const Matrix& actions);
    /// Accumulates parameter gradients of sum(d_value .* value) and returns the action gradient.
    /// With through_state = false the state branch is skipped and its gradients are left untouched.
    Matrix backward(const Matrix& d_value, bool through_state = true);
    std::vector<Parameter*> parameters();

private:
    Matrix first_layer(const Sequence& states, LstmCache* lstm_cache, DenseCache* dense_cache) const;

    NetworkShape shape_;
    LstmCell lstm_;
    DenseLayer input_;
    DenseLayer hidden_;
    DenseLayer output_;
    LstmCache lstm_cache_;
    DenseCache input_cache_, hidden_cache_, output_cache_;
    std::size_t steps_ = 0;
};

}  // namespace risfl::nn
