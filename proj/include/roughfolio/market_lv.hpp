#pragma once

#include "roughfolio/rde.hpp"

#include <map>

namespace roughfolio {

/// Investment/consumption pair: bank account phi^0, risky holdings
/// phi^1..phi^m and consumption rate kappa, each carried as a controlled
/// path where constructed.  The self-financing identity
/// phi^0 = sum_i (int phi^i dS^i - phi^i S^i) holds by construction.
struct PortfolioPath {
    ControlledPath phi0;
    std::vector<ControlledPath> phi;
    ControlledPath kappa;
};

struct WealthPath {
    enum class Mode { optimal, realized };
    SampledPath values;
    Mode mode;
};

struct LogOptimalResult {
    PortfolioPath portfolio;
    WealthPath wealth;    // optimal mode, V = kappa (K_T - K)
    double det_min = 0.0; // smallest |det(sigma sigma^T)| seen along the path
};

/// Price path of the local-volatility model: delegates to rde_solve on the
/// time-augmented lift and records the norms entering stability constants.
struct PricePathResult {
    ControlledPath path;
    double residual_sup = 0.0;
    double controlled_norm_p = 0.0;
};
PricePathResult price_path(const CoefficientField& field, std::span<const double> s0,
                           std::shared_ptr<const TimeAugmentedRoughPath> lift, double p = 2.5);

/// The pathwise log-optimal portfolio: H = c^{-1} b with c = sigma sigma^T,
/// kappa = exp(int (theta) d(.,W)) / K_T for theta = (|theta_w|^2/2, theta_w)
/// with theta_w = sigma^T H, V = kappa (K_T - K), phi^i = H^i V.
LogOptimalResult log_optimal_portfolio(const CoefficientField& field, const ControlledPath& s,
                                       const ConsumptionClock& clock,
                                       std::shared_ptr<const TimeAugmentedRoughPath> lift);

/// Wealth generated by a (possibly misspecified or discretized) portfolio on
/// the actual market: V-hat = 1 + sum_i int phi^i dS^i - int kappa dK.
WealthPath realized_wealth(const PortfolioPath& portfolio, const ControlledPath& s,
                           const ConsumptionClock& clock);

struct DiscretizedResult {
    PortfolioPath portfolio;  // staircases along P^n wrapped on the master lift
    WealthPath wealth;        // V^n = kappa^n (K_T - K^n), optimal mode
    WealthPath wealth_hat;    // V-hat^n against the true market
};

/// Discretized portfolio of Euler-scheme prices along P^n; all left-point
/// sums accumulate at partition points, staircases live on the master grid.
DiscretizedResult discretized_portfolio(const CoefficientField& field, const ControlledPath& s_true,
                                        const ConsumptionClock& clock,
                                        const PartitionScheme& scheme, std::size_t n);

/// Convenience overload building the lift and true price path from noise.
DiscretizedResult discretized_portfolio(const CoefficientField& field, const SampledPath& noise,
                                        const ConsumptionClock& clock,
                                        const PartitionScheme& scheme, std::size_t n);

// ---------------------------------------------------------------------------
// Field registry (bounded fields only; C^2_b perturbation norms analytic per
// family, so stability reports can quote the exact Lipschitz right-hand side).
// ---------------------------------------------------------------------------

struct LvFieldSpec {
    std::string family;                    // "lv.const" | "lv.tanh"
    std::map<std::string, double> params;
};

CoefficientField make_lv_field(const LvFieldSpec& spec);

/// Perturbs the drift ("drift") or volatility ("vol") parameter of the
/// family by delta; returns the perturbed spec and the exact C^2_b norm of
/// the perturbation direction (so ||b_delta - b||_{C^2_b} = delta * norm).
std::pair<LvFieldSpec, double> perturb_lv(const LvFieldSpec& spec, double delta,
                                          const std::string& which);

} // namespace roughfolio
