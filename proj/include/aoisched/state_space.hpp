#pragma once

#include <cstddef>
#include <string>

#include "aoisched/error.hpp"
#include "aoisched/model.hpp"

namespace aoisched {

/// Dense enumeration of the state space. Index layout (last component
/// fastest): e, b, aoi_rx, aoi_tx, retx. Ages are 1-based, so aoi-1 is used
/// as the digit.
class StateSpace {
public:
    explicit StateSpace(const SystemConfig& cfg)
        : n_e_(cfg.energy.num_levels()),
          n_b_(cfg.b_max + 1),
          n_age_(cfg.delta_max),
          n_r_(cfg.harq.r_max + 1) {}

    std::size_t size() const {
        return static_cast<std::size_t>(n_e_) * n_b_ * n_age_ * n_age_ * n_r_;
    }

    std::size_t encode(const SystemState& s) const {
        if (s.e < 0 || s.e >= n_e_ || s.b < 0 || s.b >= n_b_ || s.aoi_rx < 1 ||
            s.aoi_rx > n_age_ || s.aoi_tx < 1 || s.aoi_tx > n_age_ || s.retx < 0 ||
            s.retx >= n_r_)
            throw ContractError("StateSpace::encode: state out of range");
        std::size_t idx = static_cast<std::size_t>(s.e);
        idx = idx * n_b_ + s.b;
        idx = idx * n_age_ + (s.aoi_rx - 1);
        idx = idx * n_age_ + (s.aoi_tx - 1);
        idx = idx * n_r_ + s.retx;
        return idx;
    }

    SystemState decode(std::size_t idx) const {
        if (idx >= size())
            throw ContractError("StateSpace::decode: index " + std::to_string(idx) +
                                " out of range");
        SystemState s;
        s.retx = static_cast<int>(idx % n_r_);
        idx /= n_r_;
        s.aoi_tx = static_cast<int>(idx % n_age_) + 1;
        idx /= n_age_;
        s.aoi_rx = static_cast<int>(idx % n_age_) + 1;
        idx /= n_age_;
        s.b = static_cast<int>(idx % n_b_);
        idx /= n_b_;
        s.e = static_cast<int>(idx);
        return s;
    }

    int num_energy_levels() const { return n_e_; }
    int num_battery_levels() const { return n_b_; }
    int num_ages() const { return n_age_; }
    int num_retx_levels() const { return n_r_; }

private:
    int n_e_, n_b_, n_age_, n_r_;
};

}  // namespace aoisched
