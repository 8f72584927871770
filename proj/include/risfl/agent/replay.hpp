#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "risfl/core/rng.hpp"
#include "risfl/nn/networks.hpp"

namespace risfl {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
    bool first_in_episode = false;
};

/// Mini-batch with J-step state histories, oldest step first.
struct Batch {
    nn::Sequence states;       // J x (state_dim x H)
    nn::Matrix actions;        // action_dim x H
    nn::Matrix rewards;        // 1 x H
    nn::Sequence next_states;  // J x (state_dim x H)
    nn::Matrix done;           // 1 x H, 1 for terminal transitions
    std::size_t size() const { return static_cast<std::size_t>(actions.cols()); }
};

/// FIFO ring of transitions.
///
/// Single states are stored; histories are rebuilt at sampling time by walking
/// back through earlier transitions of the same episode and zero-padding where
/// the episode starts or the predecessor was evicted. A next_state equal to the
/// following transition's state is stored only once.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return capacity_; }

    void push(const Transition& t);
    /// Position 0 is the oldest stored transition.
    Transition at(std::size_t position) const;

    /// batch distinct positions, uniform without replacement.
    std::vector<std::size_t> sample_positions(RngStream& rng, std::size_t batch) const;
    Batch sample(RngStream& rng, std::size_t batch, std::size_t history) const;
    Batch gather(const std::vector<std::size_t>& positions, std::size_t history) const;

private:
    struct Record {
        std::vector<double> state;
        std::vector<double> action;
        std::vector<double> next_state;  // empty when the successor's state is the next state
        double reward = 0.0;
        bool done = false;
        bool first_in_episode = false;
        std::uint64_t serial = 0;
    };

    std::size_t slot_of(std::size_t position) const;
    const Record* predecessor(const Record& r) const;
    const std::vector<double>& next_state_of(std::size_t slot) const;

    std::size_t capacity_;
    std::size_t state_dim_;
    std::size_t action_dim_;
    std::vector<Record> ring_;
    std::size_t head_ = 0;  // next write slot
    std::size_t size_ = 0;
    std::uint64_t pushed_ = 0;
};

}  // namespace risfl
