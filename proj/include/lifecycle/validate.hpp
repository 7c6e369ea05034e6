#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "lifecycle/params.hpp"
#include "lifecycle/policy.hpp"
#include "lifecycle/simulate.hpp"
#include "lifecycle/weights.hpp"

namespace lifecycle {

struct OracleReport {
    std::string name;
    double closed_form = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    // Extra allowance for deterministic oracles (SE = 0); zero for MC comparisons.
    double abs_tol = 0.0;
    bool pass = false;
    // Probes are expected to fail; they never count against the suite.
    bool probe = false;
    double runtime_s = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    std::string note;

    // pass = |closed_form - estimate| <= 3 SE + abs_tol
    void settle();
};

// E[int xi y] by simulation vs g(0) y0 + <h(0), hist>. Needs initial.t == 0.
OracleReport oracle_human_capital(const WeightTable& tbl, const StateSnapshot& initial, const PathConfig& pc);

// Policy evaluation of the feedback strategy (optionally with consumption scaled)
// over [0, tau_R] vs V(0, w, x). With consumption_scale != 1 the report is a probe.
OracleReport oracle_value_consistency(std::shared_ptr<const WeightTable> tbl, const StateSnapshot& initial,
                                      const PathConfig& pc, double consumption_scale = 1.0);

// Max |gamma/(1-gamma) F'/F + (r+delta) + gamma/(1-gamma) e^{-(rho+delta)t/gamma} (1 + delta k^{-b}) / F
// + |kappa|^2/(2 gamma)| over n_samples uniform t in [0, tau_R] plus t = tau_R.
// eta_scale != 1 perturbs f for sensitivity probes.
double check_hjb_scalar_identity(const ModelConfig& cfg, std::size_t n_samples, std::uint64_t seed = 7,
                                 double eta_scale = 1.0);

// Max relative residual of theta^T sigma + g y sigma_y^T - (Gamma/gamma) kappa^T at random states.
double check_gamma_substitution(const WeightTable& tbl, std::size_t n_samples, std::uint64_t seed = 11);

// x-independence after retirement and dependence on (t, Gamma) only before it.
OracleReport check_merton_limit(std::shared_ptr<const WeightTable> tbl);

struct SuiteOptions {
    // "all", "hjb", "substitution", "merton", "human_capital", "value"
    std::string suite = "all";
    std::size_t n_paths = 100'000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double dt = 1.0 / 500.0;
    double w0 = 1.0;
    double y0 = 1.0;
};

struct SuiteResult {
    std::vector<OracleReport> reports;
    // True iff every non-probe report passes and every probe fails.
    bool ok() const;
};

// Runs the selected checks on `cfg` (table solved at opts.dt).
SuiteResult run_suite(const ModelConfig& cfg, const SuiteOptions& opts);

// One JSON object per line.
void write_reports_jsonl(std::ostream& os, const std::vector<OracleReport>& reports);
std::string report_line(const OracleReport& r);

}  // namespace lifecycle
