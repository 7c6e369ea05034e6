#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lifecycle/grid.hpp"
#include "lifecycle/history.hpp"
#include "lifecycle/params.hpp"

namespace lifecycle {

enum class HStorage { automatic, dense, lazy };

struct SolverOptions {
    double tol = 1e-10;
    int max_iter = 10'000;
    HStorage storage = HStorage::automatic;
    // Skip the global iteration and march backwards over sub-intervals.
    bool force_windowed = false;
    // Dense storage is chosen automatically up to this many h entries.
    std::size_t dense_limit = 60'000'000;
};

struct SolverInfo {
    int iterations = 0;
    double defect = 0.0;
    std::vector<double> defect_history;
    bool windowed = false;
    std::size_t window_steps = 0;
};

// Annuity weights (g, h) of the human-capital representation on a TimeGrid x LagGrid.
// Zero-extended for t >= tau_R. Immutable once solved.
class WeightTable {
public:
    const ModelConfig& config() const { return cfg_; }
    const TimeGrid& time_grid() const { return tg_; }
    const LagGrid& lag_grid() const { return lg_; }
    const SolverInfo& info() const { return info_; }
    const std::vector<double>& phi_samples() const { return phi_; }

    double dt() const { return tg_.dt(); }
    double tau_R() const { return tg_.t_end; }
    std::size_t n_t() const { return tg_.n_t; }
    std::size_t n_z() const { return lg_.n_z; }

    const std::vector<double>& g() const { return g_; }
    double g_at(std::size_t i) const { return i < g_.size() ? g_[i] : 0.0; }
    double h_at(std::size_t i, std::size_t j) const;
    // Row h(t_i, .) on the lag grid; zero row for i >= n_t.
    void h_row(std::size_t i, std::span<double> out) const;
    // Contiguous view of row i; empty unless h is stored densely and i < n_t.
    std::span<const double> h_row_view(std::size_t i) const {
        if (h_.empty() || i >= tg_.n_t) return {};
        return {h_.data() + i * lg_.size(), lg_.size()};
    }
    bool dense() const { return !h_.empty() || kernel_zero_; }
    // True when phi vanishes, so h is identically zero.
    bool kernel_zero() const { return kernel_zero_; }

private:
    friend WeightTable solve_weights(const ModelConfig&, const AlignedGrids&, const SolverOptions&);

    ModelConfig cfg_;
    TimeGrid tg_;
    LagGrid lg_;
    std::vector<double> phi_;
    std::vector<double> g_;
    std::vector<double> h_;  // row-major (n_t + 1) x (n_z + 1), empty in lazy mode
    bool kernel_zero_ = false;
    SolverInfo info_;
};

// Picard iteration of the integral operator from (g, h) = (0, 0) until successive
// iterates differ by at most tol in sup norm. NoConvergence after max_iter.
WeightTable solve_weights(const ModelConfig& cfg, const AlignedGrids& grids, const SolverOptions& opts = {});
WeightTable solve_weights(const ModelConfig& cfg, const TimeGrid& tg, const LagGrid& lg, double tol,
                          int max_iter);

// Linear (g) / bilinear (h) interpolation; exactly zero for t >= tau_R.
double eval_g(const WeightTable& tbl, double t);
double eval_h(const WeightTable& tbl, double t, double zeta);

struct AnnuitySplit {
    double g1 = 0.0;  // annuity of unit wages without the delay channel
    double g2 = 0.0;  // value of the delayed contribution
};
AnnuitySplit decompose_g(const WeightTable& tbl, double t);
// (1 - exp(-beta (tau_R - t)^+)) / beta, with the beta = 0 limit.
double annuity_g1(double beta, double tau_R, double t);

// g(t) y_now + trapezoid sum of h(t, zeta_j) hist(zeta_j) dz.
double human_capital(const WeightTable& tbl, double t, double y_now, const HistoryBuffer& hist);

// Trapezoid-weighted row h(t_i, zeta_j) * w_j * dz, ready for HistoryBuffer::weighted_sum.
void human_capital_weights(const WeightTable& tbl, std::size_t i, std::span<double> out);

// (mu_y z0 + z1(0), -z1' + z0 phi) with z1' by finite differences on `grid`.
std::pair<double, std::vector<double>> adjoint_apply(const ModelConfig& cfg, double z0,
                                                     std::span<const double> z1, const LagGrid& grid,
                                                     double boundary_tol = 1e-8);

struct ResidualReport {
    double max_ode_residual = 0.0;
    double max_pde_residual = 0.0;
    double g_prime_left = 0.0;   // g'(tau_R-)
    double g_prime_right = 0.0;  // g'(tau_R+), zero by extension
    double jump() const { return g_prime_right - g_prime_left; }
    std::string to_text() const;
};
ResidualReport residual_check(const WeightTable& tbl);

// Sup-norm change of (g, h) after one more application of the discrete operator.
double operator_defect(const WeightTable& tbl);

// CSV dumps: (t, g, g1, g2) and long-format (t, zeta, h). `comment` lines are
// written first, each prefixed by '#'.
void write_weights_csv(std::ostream& os, const WeightTable& tbl, const std::vector<std::string>& comment = {});
void write_h_csv(std::ostream& os, const WeightTable& tbl, const std::vector<std::string>& comment = {},
                 std::size_t time_stride = 1);

}  // namespace lifecycle
