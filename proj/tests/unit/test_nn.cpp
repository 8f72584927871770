#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "risfl/nn/layers.hpp"
#include "risfl/nn/networks.hpp"

using namespace risfl;
using namespace risfl::nn;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

Sequence random_sequence(std::size_t steps, std::size_t dim, Eigen::Index batch, RngStream& rng) {
    Sequence s;
    for (std::size_t t = 0; t < steps; ++t) s.push_back(random_matrix(static_cast<Eigen::Index>(dim), batch, rng));
    return s;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("risfl_nn_" + name);
}

// Relative floor for finite differences: entries whose gradient is below it are
// compared in absolute terms.
constexpr double kFdFloor = 1e-6;

}  // namespace

TEST(Dense, ForwardExample) {
    auto rng = seeded_rng(1);
    DenseLayer layer("d", 2, 2, Activation::relu, rng);
    layer.weight.value << 1.0, -2.0, 0.5, 0.5;
    layer.bias.value << 0.5, -1.0;
    Matrix x(2, 1);
    x << 1.0, 1.0;
    const Matrix y = dense_forward(layer, x);
    EXPECT_DOUBLE_EQ(y(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(y(1, 0), 0.0);
    x << 3.0, 1.0;
    const Matrix y2 = dense_forward(layer, x);
    EXPECT_DOUBLE_EQ(y2(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(y2(1, 0), 1.0);
}

TEST(Dense, InitialisationBounds) {
    auto rng = seeded_rng(2);
    DenseLayer layer("d", 16, 32, Activation::tanh, rng);
    EXPECT_LE(layer.weight.value.cwiseAbs().maxCoeff(), 0.25);
    EXPECT_GT(layer.weight.value.cwiseAbs().maxCoeff(), 0.2);
    EXPECT_EQ(layer.bias.value.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(DenseLayer("e", 0, 3, Activation::relu, rng), std::invalid_argument);
}

TEST(Dense, LinearGradientIsExact) {
    auto rng = seeded_rng(3);
    DenseLayer layer("d", 4, 3, Activation::identity, rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix dy = random_matrix(3, 5, rng);
    const auto g = dense_backward(layer, x, dy);
    EXPECT_LT((g.dx - layer.weight.value.transpose() * dy).norm(), 1e-12);
    EXPECT_LT((g.dw - dy * x.transpose()).norm(), 1e-12);
    EXPECT_LT((g.db - dy.rowwise().sum()).norm(), 1e-12);

    auto params = layer.parameters();
    auto loss = [&] { return (dy.array() * dense_forward(layer, x).array()).sum(); };
    auto grads = [&] {
        DenseCache cache;
        dense_forward(layer, x, &cache);
        dense_backward(layer, cache, dy);
    };
    EXPECT_LT(finite_diff_check(params, loss, grads, rng, 1e-4, 200, kFdFloor), 1e-8);
}

TEST(Dense, FiniteDifferencesPerActivation) {
    auto rng = seeded_rng(4);
    for (auto act : {Activation::relu, Activation::tanh}) {
        DenseLayer layer("d", 5, 4, act, rng);
        layer.bias.value = random_matrix(4, 1, rng, 0.1);
        const Matrix x = random_matrix(5, 3, rng);
        const Matrix dy = random_matrix(4, 3, rng);
        auto params = layer.parameters();
        auto loss = [&] { return (dy.array() * dense_forward(layer, x).array()).sum(); };
        auto grads = [&] {
            DenseCache cache;
            dense_forward(layer, x, &cache);
            dense_backward(layer, cache, dy);
        };
        EXPECT_LT(finite_diff_check(params, loss, grads, rng, 1e-6, 200, kFdFloor), 1e-4);
    }
}

TEST(Dense, ShapeMismatchRejected) {
    auto rng = seeded_rng(5);
    DenseLayer layer("d", 3, 2, Activation::relu, rng);
    EXPECT_THROW(dense_forward(layer, Matrix::Zero(4, 1)), std::invalid_argument);
    EXPECT_THROW(dense_backward(layer, Matrix::Zero(3, 1), Matrix::Zero(3, 1)), std::invalid_argument);
}

TEST(Lstm, ForgetBiasStartsAtOne) {
    auto rng = seeded_rng(6);
    LstmCell cell("l", 3, 4, rng);
    EXPECT_EQ(cell.weight.value.rows(), 16);
    EXPECT_EQ(cell.weight.value.cols(), 7);
    for (Eigen::Index r = 0; r < 16; ++r) EXPECT_EQ(cell.bias.value(r, 0), (r >= 4 && r < 8) ? 1.0 : 0.0);
}

TEST(Lstm, ScalarCellMatchesHandComputation) {
    auto rng = seeded_rng(7);
    LstmCell cell("l", 1, 1, rng);
    // rows: input, forget, output, candidate; columns: x, h
    cell.weight.value << 0.5, -0.3, 0.2, 0.4, -0.7, 0.1, 0.9, 0.6;
    cell.bias.value << 0.1, 1.0, -0.2, 0.05;
    const std::vector<double> xs{0.8, -1.2, 0.3};
    double h = 0.25, c = -0.4;
    std::vector<Matrix> inputs;
    for (double x : xs) inputs.push_back(Matrix::Constant(1, 1, x));
    const auto out = lstm_forward(cell, inputs, Matrix::Constant(1, 1, h), Matrix::Constant(1, 1, c));
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const double i = sigmoid(0.5 * xs[t] - 0.3 * h + 0.1);
        const double f = sigmoid(0.2 * xs[t] + 0.4 * h + 1.0);
        const double o = sigmoid(-0.7 * xs[t] + 0.1 * h - 0.2);
        const double g = std::tanh(0.9 * xs[t] + 0.6 * h + 0.05);
        c = f * c + i * g;
        h = o * std::tanh(c);
        EXPECT_NEAR(out.h[t](0, 0), h, 1e-15) << "step " << t;
    }
    EXPECT_NEAR(out.c(0, 0), c, 1e-15);
}

TEST(Lstm, GatesStayBounded) {
    auto rng = seeded_rng(8);
    LstmCell cell("l", 3, 5, rng);
    cell.weight.value *= 50.0;
    LstmCache cache;
    const auto xs = random_sequence(6, 3, 4, rng);
    const auto out = lstm_forward(cell, xs, Matrix::Zero(5, 4), Matrix::Zero(5, 4), &cache);
    for (const auto& s : cache.steps) {
        for (const Matrix* gate : {&s.gate_i, &s.gate_f, &s.gate_o}) {
            EXPECT_GE(gate->minCoeff(), 0.0);
            EXPECT_LE(gate->maxCoeff(), 1.0);
        }
        EXPECT_LE(s.candidate.cwiseAbs().maxCoeff(), 1.0);
    }
    for (const auto& h : out.h) EXPECT_LE(h.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Lstm, FiniteDifferencesThroughTime) {
    auto rng = seeded_rng(9);
    LstmCell cell("l", 3, 4, rng);
    const auto xs = random_sequence(5, 3, 2, rng);
    const Matrix h0 = random_matrix(4, 2, rng, 0.3), c0 = random_matrix(4, 2, rng, 0.3);
    std::vector<Matrix> dh;
    for (int t = 0; t < 5; ++t) dh.push_back(t % 2 == 0 ? random_matrix(4, 2, rng) : Matrix());
    const Matrix dc = random_matrix(4, 2, rng);

    auto loss = [&] {
        const auto out = lstm_forward(cell, xs, h0, c0);
        double total = (dc.array() * out.c.array()).sum();
        for (std::size_t t = 0; t < dh.size(); ++t)
            if (dh[t].size() > 0) total += (dh[t].array() * out.h[t].array()).sum();
        return total;
    };
    LstmInputGrads input_grads;
    auto grads = [&] {
        LstmCache cache;
        lstm_forward(cell, xs, h0, c0, &cache);
        input_grads = lstm_backward(cell, cache, dh, dc);
    };
    auto params = cell.parameters();
    EXPECT_LT(finite_diff_check(params, loss, grads, rng, 1e-6, 200, kFdFloor), 1e-4);

    // Input gradient at the first step.
    auto xs_mut = xs;
    for (Eigen::Index e = 0; e < xs_mut[0].size(); ++e) {
        const double saved = xs_mut[0].data()[e];
        auto eval = [&](double v) {
            xs_mut[0].data()[e] = v;
            const auto out = lstm_forward(cell, xs_mut, h0, c0);
            double total = (dc.array() * out.c.array()).sum();
            for (std::size_t t = 0; t < dh.size(); ++t)
                if (dh[t].size() > 0) total += (dh[t].array() * out.h[t].array()).sum();
            return total;
        };
        const double numeric = (eval(saved + 1e-6) - eval(saved - 1e-6)) / 2e-6;
        xs_mut[0].data()[e] = saved;
        EXPECT_NEAR(input_grads.dx[0].data()[e], numeric, 1e-4 * (std::abs(numeric) + kFdFloor));
    }
}

TEST(Lstm, ShapeErrorsRejected) {
    auto rng = seeded_rng(10);
    LstmCell cell("l", 2, 3, rng);
    EXPECT_THROW(lstm_forward(cell, {}, Matrix::Zero(3, 1), Matrix::Zero(3, 1)), std::invalid_argument);
    EXPECT_THROW(lstm_forward(cell, {Matrix::Zero(2, 1)}, Matrix::Zero(2, 1), Matrix::Zero(3, 1)),
                 std::invalid_argument);
    EXPECT_THROW(lstm_forward(cell, {Matrix::Zero(3, 1)}, Matrix::Zero(3, 1), Matrix::Zero(3, 1)),
                 std::invalid_argument);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Parameter p("p", Matrix::Constant(2, 1, 1.0));
    std::vector<Parameter*> params{&p};
    auto adam = make_adam(params, 0.01);
    p.grad << 3.0, -1e-3;
    adam_step(adam, params);
    EXPECT_NEAR(p.value(0, 0), 1.0 - 0.01, 1e-9);
    EXPECT_NEAR(p.value(1, 0), 1.0 + 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-12);
    EXPECT_EQ(adam.step, 1);
}

TEST(Adam, ZeroGradientLeavesValue) {
    Parameter p("p", Matrix::Constant(3, 2, 0.7));
    std::vector<Parameter*> params{&p};
    auto adam = make_adam(params, 0.1);
    for (int i = 0; i < 5; ++i) adam_step(adam, params);
    EXPECT_EQ(p.value, Matrix::Constant(3, 2, 0.7));
}

TEST(Adam, MinimisesQuadratic) {
    Parameter p("p", Matrix::Constant(1, 1, 5.0));
    std::vector<Parameter*> params{&p};
    auto adam = make_adam(params, 0.05);
    for (int i = 0; i < 2000; ++i) {
        p.grad = 2.0 * (p.value.array() - 2.0).matrix();
        adam_step(adam, params);
    }
    EXPECT_NEAR(p.value(0, 0), 2.0, 1e-3);
}

TEST(Adam, ParameterCountChangeRejected) {
    Parameter a("a", Matrix::Zero(1, 1)), b("b", Matrix::Zero(1, 1));
    std::vector<Parameter*> one{&a}, two{&a, &b};
    auto adam = make_adam(one, 0.1);
    EXPECT_THROW(adam_step(adam, two), std::invalid_argument);
}

TEST(SoftUpdate, Examples) {
    Parameter target("w", Matrix::Constant(2, 2, 1.0)), online("w", Matrix::Constant(2, 2, 3.0));
    std::vector<Parameter*> t{&target}, o{&online};
    soft_update(t, o, 0.25);
    EXPECT_EQ(target.value, Matrix::Constant(2, 2, 1.5));
    soft_update(t, o, 0.0);
    EXPECT_EQ(target.value, Matrix::Constant(2, 2, 1.5));
    soft_update(t, o, 1.0);
    EXPECT_EQ(target.value, online.value);
    EXPECT_THROW(soft_update(t, o, 1.5), std::invalid_argument);
    Parameter wrong("w", Matrix::Zero(3, 1));
    std::vector<Parameter*> w{&wrong};
    EXPECT_THROW(soft_update(w, o, 0.5), std::invalid_argument);
}

TEST(SoftUpdate, ConvergesGeometrically) {
    Parameter target("w", Matrix::Constant(1, 1, 0.0)), online("w", Matrix::Constant(1, 1, 1.0));
    std::vector<Parameter*> t{&target}, o{&online};
    for (int i = 0; i < 100; ++i) soft_update(t, o, 0.05);
    EXPECT_NEAR(target.value(0, 0), 1.0 - std::pow(0.95, 100), 1e-12);
}

class NetworkTest : public ::testing::TestWithParam<bool> {};

TEST_P(NetworkTest, ActorOutputShapeAndRange) {
    auto rng = seeded_rng(11);
    const NetworkShape shape{6, 3, 16, GetParam()};
    Actor actor(shape, rng);
    const auto states = random_sequence(4, 6, 5, rng);
    const Matrix a = actor.forward(states);
    EXPECT_EQ(a.rows(), 3);
    EXPECT_EQ(a.cols(), 5);
    EXPECT_LT(a.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_EQ(actor.forward_train(states), a);
}

TEST_P(NetworkTest, SameSeedSameWeights) {
    const NetworkShape shape{6, 3, 16, GetParam()};
    auto r1 = seeded_rng(12), r2 = seeded_rng(12);
    Actor a1(shape, r1), a2(shape, r2);
    auto p1 = a1.parameters(), p2 = a2.parameters();
    ASSERT_EQ(p1.size(), p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        EXPECT_EQ(p1[i]->name, p2[i]->name);
        EXPECT_EQ(p1[i]->value, p2[i]->value);
    }
}

TEST_P(NetworkTest, ActorFiniteDifferences) {
    auto rng = seeded_rng(13);
    const NetworkShape shape{5, 3, 12, GetParam()};
    Actor actor(shape, rng);
    const auto states = random_sequence(3, 5, 4, rng);
    const Matrix d = random_matrix(3, 4, rng);
    auto params = actor.parameters();
    auto loss = [&] { return (d.array() * actor.forward(states).array()).sum(); };
    auto grads = [&] {
        actor.forward_train(states);
        actor.backward(d);
    };
    EXPECT_LT(finite_diff_check(params, loss, grads, rng, 1e-6, 300, kFdFloor), 1e-4);
}

TEST_P(NetworkTest, CriticFiniteDifferences) {
    auto rng = seeded_rng(14);
    const NetworkShape shape{5, 3, 12, GetParam()};
    Critic critic(shape, rng);
    const auto states = random_sequence(3, 5, 4, rng);
    Matrix actions = random_matrix(3, 4, rng, 0.5);
    const Matrix d = random_matrix(1, 4, rng);
    auto params = critic.parameters();
    auto loss = [&] { return (d.array() * critic.forward(states, actions).array()).sum(); };
    Matrix d_action;
    auto grads = [&] {
        critic.forward_train(states, actions);
        d_action = critic.backward(d);
    };
    EXPECT_LT(finite_diff_check(params, loss, grads, rng, 1e-6, 300, kFdFloor), 1e-4);

    ASSERT_EQ(d_action.rows(), 3);
    ASSERT_EQ(d_action.cols(), 4);
    for (Eigen::Index e = 0; e < actions.size(); ++e) {
        const double saved = actions.data()[e];
        actions.data()[e] = saved + 1e-6;
        const double up = loss();
        actions.data()[e] = saved - 1e-6;
        const double down = loss();
        actions.data()[e] = saved;
        const double numeric = (up - down) / 2e-6;
        EXPECT_NEAR(d_action.data()[e], numeric, 1e-4 * (std::abs(numeric) + kFdFloor));
    }
}

TEST_P(NetworkTest, CriticActionOnlyBackwardSkipsStateBranch) {
    auto rng = seeded_rng(15);
    const NetworkShape shape{4, 2, 8, GetParam()};
    Critic critic(shape, rng);
    const auto states = random_sequence(2, 4, 3, rng);
    const Matrix actions = random_matrix(2, 3, rng, 0.5);
    auto params = critic.parameters();
    for (auto* p : params) p->zero_grad();
    critic.forward_train(states, actions);
    const Matrix with_state = critic.backward(Matrix::Ones(1, 3), true);
    for (auto* p : params) p->zero_grad();
    critic.forward_train(states, actions);
    const Matrix without_state = critic.backward(Matrix::Ones(1, 3), false);
    EXPECT_EQ(with_state, without_state);
    EXPECT_EQ(params.front()->grad.cwiseAbs().maxCoeff(), 0.0);
}

INSTANTIATE_TEST_SUITE_P(FirstLayer, NetworkTest, ::testing::Values(true, false),
                         [](const auto& info) { return info.param ? "Recurrent" : "FeedForward"; });

TEST(Checkpoint, RoundTripIsExact) {
    auto rng = seeded_rng(16);
    const NetworkShape shape{5, 3, 8, true};
    Actor saved(shape, rng), loaded(shape, rng);
    const auto path = temp_file("roundtrip.json");
    auto ps = saved.parameters(), pl = loaded.parameters();
    save_checkpoint(ps, path.string());
    load_checkpoint(pl, path.string());
    for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i]->value, pl[i]->value);
    const auto states = random_sequence(3, 5, 2, rng);
    EXPECT_EQ(saved.forward(states), loaded.forward(states));
    std::filesystem::remove(path);
}

TEST(Checkpoint, MismatchRejectedWithoutPartialLoad) {
    auto rng = seeded_rng(17);
    Actor small({5, 3, 8, true}, rng), wide({5, 3, 9, true}, rng);
    const auto path = temp_file("mismatch.json");
    auto ps = small.parameters(), pw = wide.parameters();
    save_checkpoint(ps, path.string());
    std::vector<Matrix> before;
    for (auto* p : pw) before.push_back(p->value);
    EXPECT_THROW(load_checkpoint(pw, path.string()), std::runtime_error);
    for (std::size_t i = 0; i < pw.size(); ++i) EXPECT_EQ(pw[i]->value, before[i]);
    EXPECT_THROW(load_checkpoint(pw, temp_file("missing.json").string()), std::runtime_error);
    {
        std::ofstream bad(path);
        bad << R"({"format":"other","version":1,"parameters":[]})";
    }
    EXPECT_THROW(load_checkpoint(ps, path.string()), std::runtime_error);
    std::filesystem::remove(path);
}
