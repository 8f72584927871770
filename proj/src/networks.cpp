#include "risfl/nn/networks.hpp"

#include <stdexcept>

namespace risfl::nn {

namespace {

void check_sequence(const Sequence& states, std::size_t state_dim) {
    if (states.empty()) throw std::invalid_argument("network: empty state history");
    for (const auto& s : states)
        if (static_cast<std::size_t>(s.rows()) != state_dim || s.cols() != states.front().cols())
            throw std::invalid_argument("network: state history shape mismatch");
}

Matrix recurrent_or_dense(const LstmCell& lstm, const DenseLayer& input, bool recurrent, std::size_t hidden,
                          const Sequence& states, LstmCache* lstm_cache, DenseCache* dense_cache) {
    if (recurrent) {
        const Eigen::Index batch = states.front().cols();
        const Matrix zero = Matrix::Zero(static_cast<Eigen::Index>(hidden), batch);
        return lstm_forward(lstm, states, zero, zero, lstm_cache).h.back();
    }
    return dense_forward(input, states.back(), dense_cache);
}

void first_layer_backward(LstmCell& lstm, DenseLayer& input, bool recurrent, const LstmCache& lstm_cache,
                          const DenseCache& dense_cache, std::size_t steps, const Matrix& d_out) {
    if (recurrent) {
        std::vector<Matrix> dh(steps);
        dh.back() = d_out;
        lstm_backward(lstm, lstm_cache, dh, Matrix());
    } else {
        dense_backward(input, dense_cache, d_out);
    }
}

}  // namespace

Actor::Actor(const NetworkShape& shape, RngStream& rng) : shape_(shape) {
    if (shape.state_dim == 0 || shape.action_dim == 0 || shape.hidden == 0) throw std::invalid_argument("Actor: empty shape");
    if (shape.recurrent) {
        lstm_ = LstmCell("actor.lstm", shape.state_dim, shape.hidden, rng);
    } else {
        input_ = DenseLayer("actor.input", shape.state_dim, shape.hidden, Activation::relu, rng);
    }
    hidden_ = DenseLayer("actor.hidden", shape.hidden, shape.hidden, Activation::relu, rng);
    output_ = DenseLayer("actor.output", shape.hidden, shape.action_dim, Activation::tanh, rng);
}

Matrix Actor::first_layer(const Sequence& states, LstmCache* lstm_cache, DenseCache* dense_cache) const {
    check_sequence(states, shape_.state_dim);
    return recurrent_or_dense(lstm_, input_, shape_.recurrent, shape_.hidden, states, lstm_cache, dense_cache);
}

Matrix Actor::forward(const Sequence& states) const {
    return dense_forward(output_, dense_forward(hidden_, first_layer(states, nullptr, nullptr)));
}

Matrix Actor::forward_train(const Sequence& states) {
    steps_ = states.size();
    const Matrix h1 = first_layer(states, &lstm_cache_, &input_cache_);
    const Matrix h2 = dense_forward(hidden_, h1, &hidden_cache_);
    return dense_forward(output_, h2, &output_cache_);
}

void Actor::backward(const Matrix& d_action) {
    const Matrix d_h2 = dense_backward(output_, output_cache_, d_action);
    const Matrix d_h1 = dense_backward(hidden_, hidden_cache_, d_h2);
    first_layer_backward(lstm_, input_, shape_.recurrent, lstm_cache_, input_cache_, steps_, d_h1);
}

std::vector<Parameter*> Actor::parameters() {
    std::vector<Parameter*> out;
    if (shape_.recurrent) {
        out = lstm_.parameters();
    } else {
        out = input_.parameters();
    }
    for (auto* p : hidden_.parameters()) out.push_back(p);
    for (auto* p : output_.parameters()) out.push_back(p);
    return out;
}

Critic::Critic(const NetworkShape& shape, RngStream& rng) : shape_(shape) {
    if (shape.state_dim == 0 || shape.action_dim == 0 || shape.hidden == 0) throw std::invalid_argument("Critic: empty shape");
    if (shape.recurrent) {
        lstm_ = LstmCell("critic.lstm", shape.state_dim, shape.hidden, rng);
    } else {
        input_ = DenseLayer("critic.input", shape.state_dim, shape.hidden, Activation::relu, rng);
    }
    hidden_ = DenseLayer("critic.hidden", shape.hidden + shape.action_dim, shape.hidden, Activation::relu, rng);
    output_ = DenseLayer("critic.output", shape.hidden, 1, Activation::identity, rng);
}

Matrix Critic::first_layer(const Sequence& states, LstmCache* lstm_cache, DenseCache* dense_cache) const {
    check_sequence(states, shape_.state_dim);
    return recurrent_or_dense(lstm_, input_, shape_.recurrent, shape_.hidden, states, lstm_cache, dense_cache);
}

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
    if (top.cols() != bottom.cols()) throw std::invalid_argument("critic: batch size mismatch between states and actions");
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

}  // namespace

Matrix Critic::forward(const Sequence& states, const Matrix& actions) const {
    if (static_cast<std::size_t>(actions.rows()) != shape_.action_dim) throw std::invalid_argument("critic: action size mismatch");
    const Matrix joined = stack(first_layer(states, nullptr, nullptr), actions);
    return dense_forward(output_, dense_forward(hidden_, joined));
}

Matrix Critic::forward_train(const Sequence& states, const Matrix& actions) {
    if (static_cast<std::size_t>(actions.rows()) != shape_.action_dim) throw std::invalid_argument("critic: action size mismatch");
    steps_ = states.size();
    const Matrix joined = stack(first_layer(states, &lstm_cache_, &input_cache_), actions);
    const Matrix h2 = dense_forward(hidden_, joined, &hidden_cache_);
    return dense_forward(output_, h2, &output_cache_);
}

Matrix Critic::backward(const Matrix& d_value, bool through_state) {
    const Matrix d_h2 = dense_backward(output_, output_cache_, d_value);
    const Matrix d_joined = dense_backward(hidden_, hidden_cache_, d_h2);
    const auto hidden = static_cast<Eigen::Index>(shape_.hidden);
    if (through_state)
        first_layer_backward(lstm_, input_, shape_.recurrent, lstm_cache_, input_cache_, steps_, d_joined.topRows(hidden));
    return d_joined.bottomRows(d_joined.rows() - hidden);
}

std::vector<Parameter*> Critic::parameters() {
    std::vector<Parameter*> out;
    if (shape_.recurrent) {
        out = lstm_.parameters();
    } else {
        out = input_.parameters();
    }
    for (auto* p : hidden_.parameters()) out.push_back(p);
    for (auto* p : output_.parameters()) out.push_back(p);
    return out;
}

}  // namespace risfl::nn
