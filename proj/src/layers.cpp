#include "risfl/nn/layers.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace risfl::nn {

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, RngStream& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

Matrix activate(Activation act, const Matrix& z) {
    switch (act) {
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::identity: return z;
    }
    return z;
}

// Derivative expressed through the activation output.
Matrix activation_grad(Activation act, const Matrix& y, const Matrix& dy) {
    switch (act) {
        case Activation::relu: return (y.array() > 0.0).select(dy, 0.0);
        case Activation::tanh: return (dy.array() * (1.0 - y.array().square())).matrix();
        case Activation::identity: return dy;
    }
    return dy;
}

Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

}  // namespace

Parameter::Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
}

DenseLayer::DenseLayer(const std::string& name, std::size_t in, std::size_t out, Activation act, RngStream& rng)
    : activation(act) {
    if (in == 0 || out == 0) throw std::invalid_argument("DenseLayer: empty shape");
    const auto rows = static_cast<Eigen::Index>(out), cols = static_cast<Eigen::Index>(in);
    weight = Parameter(name + ".weight", uniform_matrix(rows, cols, 1.0 / std::sqrt(static_cast<double>(in)), rng));
    bias = Parameter(name + ".bias", Matrix::Zero(rows, 1));
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x, DenseCache* cache) {
    if (x.rows() != layer.weight.value.cols()) throw std::invalid_argument("dense_forward: input size mismatch");
    Matrix z = layer.weight.value * x;
    z.colwise() += layer.bias.value.col(0);
    Matrix y = activate(layer.activation, z);
    if (cache) {
        cache->input = x;
        cache->output = y;
    }
    return y;
}

DenseGrads dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dy) {
    const Matrix y = dense_forward(layer, x);
    if (dy.rows() != y.rows() || dy.cols() != y.cols()) throw std::invalid_argument("dense_backward: dy shape mismatch");
    const Matrix dz = activation_grad(layer.activation, y, dy);
    return {layer.weight.value.transpose() * dz, dz * x.transpose(), dz.rowwise().sum()};
}

Matrix dense_backward(DenseLayer& layer, const DenseCache& cache, const Matrix& dy) {
    if (dy.rows() != cache.output.rows() || dy.cols() != cache.output.cols())
        throw std::invalid_argument("dense_backward: dy shape mismatch");
    const Matrix dz = activation_grad(layer.activation, cache.output, dy);
    layer.weight.grad.noalias() += dz * cache.input.transpose();
    layer.bias.grad += dz.rowwise().sum();
    return layer.weight.value.transpose() * dz;
}

LstmCell::LstmCell(const std::string& name, std::size_t input, std::size_t hidden, RngStream& rng)
    : input_size(input), hidden_size(hidden) {
    if (input == 0 || hidden == 0) throw std::invalid_argument("LstmCell: empty shape");
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto cols = static_cast<Eigen::Index>(input + hidden);
    weight = Parameter(name + ".weight",
                       uniform_matrix(4 * h, cols, 1.0 / std::sqrt(static_cast<double>(input + hidden)), rng));
    Matrix b = Matrix::Zero(4 * h, 1);
    b.block(static_cast<Eigen::Index>(Gate::forget) * h, 0, h, 1).setOnes();
    bias = Parameter(name + ".bias", std::move(b));
}

LstmOutput lstm_forward(const LstmCell& cell, const std::vector<Matrix>& xs, const Matrix& h0, const Matrix& c0,
                        LstmCache* cache) {
    if (xs.empty()) throw std::invalid_argument("lstm_forward: empty sequence");
    const auto in = static_cast<Eigen::Index>(cell.input_size);
    const auto hid = static_cast<Eigen::Index>(cell.hidden_size);
    const Eigen::Index batch = xs.front().cols();
    if (h0.rows() != hid || c0.rows() != hid || h0.cols() != batch || c0.cols() != batch)
        throw std::invalid_argument("lstm_forward: initial state shape mismatch");
    if (cache) cache->steps.clear();

    LstmOutput out;
    Matrix h = h0, c = c0;
    for (const auto& x : xs) {
        if (x.rows() != in || x.cols() != batch) throw std::invalid_argument("lstm_forward: input shape mismatch");
        Matrix concat(in + hid, batch);
        concat.topRows(in) = x;
        concat.bottomRows(hid) = h;
        Matrix z = cell.weight.value * concat;
        z.colwise() += cell.bias.value.col(0);
        LstmStepCache step;
        step.gate_i = sigmoid(z.middleRows(0 * hid, hid));
        step.gate_f = sigmoid(z.middleRows(1 * hid, hid));
        step.gate_o = sigmoid(z.middleRows(2 * hid, hid));
        step.candidate = z.middleRows(3 * hid, hid).array().tanh().matrix();
        Matrix c_next = (step.gate_f.array() * c.array() + step.gate_i.array() * step.candidate.array()).matrix();
        Matrix tanh_c = c_next.array().tanh().matrix();
        h = (step.gate_o.array() * tanh_c.array()).matrix();
        out.h.push_back(h);
        if (cache) {
            step.concat = std::move(concat);
            step.c_prev = c;
            step.c = c_next;
            step.tanh_c = std::move(tanh_c);
            cache->steps.push_back(std::move(step));
        }
        c = std::move(c_next);
    }
    out.c = c;
    return out;
}

LstmInputGrads lstm_backward(LstmCell& cell, const LstmCache& cache, const std::vector<Matrix>& dh,
                             const Matrix& dc_final) {
    const std::size_t steps = cache.steps.size();
    if (steps == 0 || dh.size() != steps) throw std::invalid_argument("lstm_backward: need one dh per step");
    const auto in = static_cast<Eigen::Index>(cell.input_size);
    const auto hid = static_cast<Eigen::Index>(cell.hidden_size);
    const Eigen::Index batch = cache.steps.front().concat.cols();

    LstmInputGrads out;
    out.dx.resize(steps);
    Matrix dh_next = Matrix::Zero(hid, batch);
    Matrix dc_next = dc_final.size() > 0 ? dc_final : Matrix::Zero(hid, batch);
    Matrix dz(4 * hid, batch);
    for (std::size_t t = steps; t-- > 0;) {
        const LstmStepCache& s = cache.steps[t];
        Matrix dh_total = dh_next;
        if (dh[t].size() > 0) dh_total += dh[t];
        const auto tc = s.tanh_c.array();
        const Eigen::ArrayXXd dc = dc_next.array() + dh_total.array() * s.gate_o.array() * (1.0 - tc.square());
        const auto gi = s.gate_i.array(), gf = s.gate_f.array(), go = s.gate_o.array(), g = s.candidate.array();
        dz.middleRows(0 * hid, hid) = (dc * g * gi * (1.0 - gi)).matrix();
        dz.middleRows(1 * hid, hid) = (dc * s.c_prev.array() * gf * (1.0 - gf)).matrix();
        dz.middleRows(2 * hid, hid) = (dh_total.array() * tc * go * (1.0 - go)).matrix();
        dz.middleRows(3 * hid, hid) = (dc * gi * (1.0 - g.square())).matrix();
        cell.weight.grad.noalias() += dz * s.concat.transpose();
        cell.bias.grad += dz.rowwise().sum();
        const Matrix dconcat = cell.weight.value.transpose() * dz;
        out.dx[t] = dconcat.topRows(in);
        dh_next = dconcat.bottomRows(hid);
        dc_next = (dc * gf).matrix();
    }
    out.dh0 = dh_next;
    out.dc0 = dc_next;
    return out;
}

AdamState make_adam(std::span<Parameter* const> params, double lr) {
    AdamState s;
    s.lr = lr;
    for (const Parameter* p : params) {
        s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
    return s;
}

void adam_step(AdamState& s, std::span<Parameter* const> params) {
    if (params.size() != s.m.size()) throw std::invalid_argument("adam_step: parameter count changed");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (p.grad.rows() != s.m[i].rows() || p.grad.cols() != s.m[i].cols())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * p.grad;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= s.lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.epsilon);
    }
}

void soft_update(std::span<Parameter* const> target, std::span<Parameter* const> online, double tau) {
    if (target.size() != online.size()) throw std::invalid_argument("soft_update: parameter count mismatch");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau outside [0, 1]");
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i]->value.rows() != online[i]->value.rows() || target[i]->value.cols() != online[i]->value.cols())
            throw std::invalid_argument("soft_update: shape mismatch for " + target[i]->name);
        if (tau == 1.0) {
            target[i]->value = online[i]->value;
        } else if (tau > 0.0) {
            target[i]->value = tau * online[i]->value + (1.0 - tau) * target[i]->value;
        }
    }
}

double finite_diff_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                         const std::function<void()>& compute_grads, RngStream& rng, double h,
                         std::size_t max_entries, double floor) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
    for (Parameter* p : params) p->zero_grad();
    compute_grads();
    std::vector<Matrix> analytic;
    std::size_t total = 0;
    for (Parameter* p : params) {
        analytic.push_back(p->grad);
        total += static_cast<std::size_t>(p->value.size());
    }
    if (total == 0) return 0.0;

    std::vector<std::pair<std::size_t, Eigen::Index>> entries;
    if (total <= max_entries) {
        for (std::size_t i = 0; i < params.size(); ++i)
            for (Eigen::Index e = 0; e < params[i]->value.size(); ++e) entries.emplace_back(i, e);
    } else {
        std::set<std::pair<std::size_t, Eigen::Index>> chosen;
        while (chosen.size() < max_entries) {
            std::size_t flat = rng.uniform_index(total);
            std::size_t i = 0;
            while (flat >= static_cast<std::size_t>(params[i]->value.size())) flat -= static_cast<std::size_t>(params[i++]->value.size());
            chosen.emplace(i, static_cast<Eigen::Index>(flat));
        }
        entries.assign(chosen.begin(), chosen.end());
    }

    double worst = 0.0;
    for (const auto& [i, e] : entries) {
        double& value = params[i]->value.data()[e];
        const double saved = value;
        value = saved + h;
        const double up = loss();
        value = saved - h;
        const double down = loss();
        value = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i].data()[e];
        worst = std::max(worst, std::abs(a - numeric) / (std::abs(a) + floor));
    }
    return worst;
}

void save_checkpoint(std::span<Parameter* const> params, const std::string& path) {
    nlohmann::json j;
    j["format"] = "risfl-weights";
    j["version"] = 1;
    j["parameters"] = nlohmann::json::array();
    for (const Parameter* p : params) {
        std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
        j["parameters"].push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", data}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out << j.dump() << '\n';
}

void load_checkpoint(std::span<Parameter* const> params, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "risfl-weights" || j.value("version", 0) != 1)
        throw std::runtime_error("checkpoint: unsupported format");
    const auto& entries = j.at("parameters");
    if (entries.size() != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = entries[i];
        if (e.at("name").get<std::string>() != params[i]->name || e.at("rows").get<Eigen::Index>() != params[i]->value.rows() ||
            e.at("cols").get<Eigen::Index>() != params[i]->value.cols() ||
            e.at("data").size() != static_cast<std::size_t>(params[i]->value.size()))
            throw std::runtime_error("checkpoint: shape mismatch for " + params[i]->name);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto data = entries[i].at("data").get<std::vector<double>>();
        std::copy(data.begin(), data.end(), params[i]->value.data());
    }
}

}  // namespace risfl::nn
