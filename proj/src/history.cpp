#include "lifecycle/history.hpp"

#include <numeric>

#include "lifecycle/errors.hpp"

namespace lifecycle {

HistoryBuffer::HistoryBuffer(LagGrid grid, double fill)
    : grid_(grid), buf_(grid.size(), fill), sum_(fill * static_cast<double>(grid.size())) {}

HistoryBuffer::HistoryBuffer(LagGrid grid, std::vector<double> values) : grid_(grid), buf_(std::move(values)) {
    if (buf_.size() != grid_.size()) throw GridMismatch("history length does not match the lag grid");
    resync_sum();
}

double HistoryBuffer::weighted_sum(std::span<const double> w) const {
    const std::size_t n = buf_.size();
    if (w.size() != n) throw GridMismatch("weight vector does not match the history length");
    const std::size_t first = n - head_;  // lags [0, first) live in slots [head_, n)
    double acc = 0.0;
    const double* b = buf_.data();
    for (std::size_t j = 0; j < first; ++j) acc += w[j] * b[head_ + j];
    for (std::size_t j = first; j < n; ++j) acc += w[j] * b[j - first];
    return acc;
}

void HistoryBuffer::resync_sum() { sum_ = std::accumulate(buf_.begin(), buf_.end(), 0.0); }

std::vector<double> HistoryBuffer::values() const {
    std::vector<double> out(buf_.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = at_lag(j);
    return out;
}

}  // namespace lifecycle
