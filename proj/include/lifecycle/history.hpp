#pragma once

#include <span>
#include <vector>

#include "lifecycle/grid.hpp"

namespace lifecycle {

// Income values over the trailing window [t - d, t] sampled on a LagGrid.
// Lag index j = 0 is the oldest value (zeta = -d), j = n_z the current one.
class HistoryBuffer {
public:
    HistoryBuffer() = default;
    HistoryBuffer(LagGrid grid, double fill);
    // `values` ordered oldest first; size must be grid.size().
    HistoryBuffer(LagGrid grid, std::vector<double> values);

    const LagGrid& grid() const { return grid_; }
    std::size_t size() const { return buf_.size(); }

    double at_lag(std::size_t j) const {
        std::size_t s = head_ + j;
        if (s >= buf_.size()) s -= buf_.size();
        return buf_[s];
    }
    double current() const { return at_lag(buf_.size() - 1); }
    double oldest() const { return buf_[head_]; }

    // Drops the oldest value and appends `y` as the new current value.
    void push(double y) {
        sum_ += y - buf_[head_];
        buf_[head_] = y;
        if (++head_ == buf_.size()) head_ = 0;
    }

    // Sum over lags of w[j] * at_lag(j); w.size() must equal size().
    double weighted_sum(std::span<const double> w) const;
    // Plain sum of all stored values, maintained incrementally.
    double sum() const { return sum_; }
    // Recomputes the running sum from scratch.
    void resync_sum();

    std::vector<double> values() const;

private:
    LagGrid grid_;
    std::vector<double> buf_;
    std::size_t head_ = 0;
    double sum_ = 0.0;
};

}  // namespace lifecycle
