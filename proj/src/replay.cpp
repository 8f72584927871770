#include "risfl/agent/replay.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace risfl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

std::size_t ReplayBuffer::slot_of(std::size_t position) const {
    if (position >= size_) throw std::out_of_range("ReplayBuffer: position past the stored transitions");
    const std::size_t oldest = size_ < capacity_ ? 0 : head_;
    return (oldest + position) % capacity_;
}

void ReplayBuffer::push(const Transition& t) {
    if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim_)
        throw std::invalid_argument("ReplayBuffer: transition shape mismatch");
    Record r;
    r.state = t.state;
    r.action = t.action;
    r.next_state = t.next_state;
    r.reward = t.reward;
    r.done = t.done;
    r.first_in_episode = t.first_in_episode;
    r.serial = pushed_;

    if (size_ > 0 && !t.first_in_episode) {
        Record& prev = ring_[(head_ + capacity_ - 1) % capacity_];
        if (!prev.done && prev.next_state == r.state) prev.next_state.clear();
    }
    if (ring_.size() < capacity_) {
        ring_.push_back(std::move(r));
    } else {
        ring_[head_] = std::move(r);
    }
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
    ++pushed_;
}

const ReplayBuffer::Record* ReplayBuffer::predecessor(const Record& r) const {
    if (r.first_in_episode || r.serial == 0) return nullptr;
    const std::uint64_t oldest_serial = pushed_ - size_;
    if (r.serial - 1 < oldest_serial) return nullptr;
    const std::size_t slot = static_cast<std::size_t>((r.serial - 1) % capacity_);
    return &ring_[slot];
}

const std::vector<double>& ReplayBuffer::next_state_of(std::size_t slot) const {
    const Record& r = ring_[slot];
    if (!r.next_state.empty()) return r.next_state;
    return ring_[(slot + 1) % capacity_].state;
}

Transition ReplayBuffer::at(std::size_t position) const {
    const std::size_t slot = slot_of(position);
    const Record& r = ring_[slot];
    return {r.state, r.action, r.reward, next_state_of(slot), r.done, r.first_in_episode};
}

std::vector<std::size_t> ReplayBuffer::sample_positions(RngStream& rng, std::size_t batch) const {
    if (batch == 0 || batch > size_) throw std::invalid_argument("ReplayBuffer: not enough transitions to sample");
    // Floyd's algorithm keeps the cost proportional to the batch size.
    std::vector<std::size_t> out;
    std::unordered_set<std::size_t> taken;
    for (std::size_t j = size_ - batch; j < size_; ++j) {
        const std::size_t pick = rng.uniform_index(j + 1);
        if (taken.insert(pick).second) {
            out.push_back(pick);
        } else {
            taken.insert(j);
            out.push_back(j);
        }
    }
    return out;
}

Batch ReplayBuffer::sample(RngStream& rng, std::size_t batch, std::size_t history) const {
    return gather(sample_positions(rng, batch), history);
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& positions, std::size_t history) const {
    if (history == 0) throw std::invalid_argument("ReplayBuffer: history length must be positive");
    const auto n = static_cast<Eigen::Index>(positions.size());
    const auto sd = static_cast<Eigen::Index>(state_dim_);
    Batch b;
    b.states.assign(history, nn::Matrix::Zero(sd, n));
    b.next_states.assign(history, nn::Matrix::Zero(sd, n));
    b.actions.resize(static_cast<Eigen::Index>(action_dim_), n);
    b.rewards.resize(1, n);
    b.done.resize(1, n);

    auto put = [&](nn::Matrix& m, Eigen::Index col, const std::vector<double>& v) {
        m.col(col) = Eigen::Map<const Eigen::VectorXd>(v.data(), sd);
    };
    for (Eigen::Index col = 0; col < n; ++col) {
        const std::size_t slot = slot_of(positions[static_cast<std::size_t>(col)]);
        const Record& r = ring_[slot];
        b.actions.col(col) = Eigen::Map<const Eigen::VectorXd>(r.action.data(), static_cast<Eigen::Index>(action_dim_));
        b.rewards(0, col) = r.reward;
        b.done(0, col) = r.done ? 1.0 : 0.0;

        put(b.next_states[history - 1], col, next_state_of(slot));
        const Record* cur = &r;
        for (std::size_t step = history; step-- > 0 && cur;) {
            put(b.states[step], col, cur->state);
            if (step > 0) put(b.next_states[step - 1], col, cur->state);
            cur = predecessor(*cur);
        }
    }
    return b;
}

}  // namespace risfl
