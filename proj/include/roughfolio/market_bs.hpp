#pragma once

#include "roughfolio/market_lv.hpp"

namespace roughfolio {

/// Black-Scholes-type model coefficients: per asset a scalar drift path b^i
/// and a volatility row sigma^{i.}, each a controlled path on the
/// time-augmented lift of the noise.
struct ControlledCoefficients {
    std::vector<ControlledPath> drift;    // m scalars
    std::vector<ControlledPath> vol_rows; // m rows, codim d each
    double det_floor = 1e-8;
    std::vector<std::size_t> jump_indices; // empty for continuous coefficients

    std::size_t assets() const { return drift.size(); }
    std::size_t noise_dim() const { return vol_rows.empty() ? 0 : vol_rows[0].codim(); }
};

/// Xi^i = int b^i dt + int sigma^{i.} dW, one controlled path per asset.
std::vector<ControlledPath> xi(const ControlledCoefficients& coeffs,
                               std::shared_ptr<const TimeAugmentedRoughPath> lift);

struct PriceExponentialResult {
    std::vector<ControlledPath> prices; // S^i = s0^i E(Xi^i), with (S^i)' = S^i Xi^i'
    /// sup relative gap between the two implemented representations
    /// s0 E(Xi) and s0 exp(A).
    double cross_check_sup = 0.0;
};

/// Exponential price representation S^i = s0^i exp(A^i) with
/// A^i = int (b^i - |sigma^{i.}|^2 / 2) dt + int sigma^{i.} dW; both this and
/// the rough-exponential route are computed and cross-checked.
PriceExponentialResult price_exponential(const ControlledCoefficients& coeffs,
                                         std::span<const double> s0,
                                         std::shared_ptr<const TimeAugmentedRoughPath> lift);

struct LogOptimalBsResult {
    PortfolioPath portfolio;
    WealthPath wealth;
    double det_min = 0.0;
    double sup_inv_price = 0.0; // max over assets and times of 1/S^i_t (stability constant)
};

/// h = (sigma sigma^T)^{-1} b, H^i = h^i / S^i, kappa = exp(U)/K_T with
/// U = int (h^T b / 2, h^T sigma) d(.,W), V = kappa (K_T - K), phi^i = H^i V.
LogOptimalBsResult log_optimal_portfolio_bs(const ControlledCoefficients& coeffs,
                                            const std::vector<ControlledPath>& prices,
                                            const ConsumptionClock& clock,
                                            std::shared_ptr<const TimeAugmentedRoughPath> lift);

/// Piecewise-constant bookkeeping gaps of the coefficient data along P^n:
/// sup |(b^n)' - b'|, sup |R^{b^n} - R^b| on capped anchor pairs, and the
/// same for sigma.
struct CoefficientStaircaseGap {
    double drift_deriv_sup = 0.0;
    double drift_remainder_sup = 0.0;
    double vol_deriv_sup = 0.0;
    double vol_remainder_sup = 0.0;
};

struct DiscretizedBsResult {
    PortfolioPath portfolio;
    WealthPath wealth;
    WealthPath wealth_hat;
    CoefficientStaircaseGap coefficient_gap;
};

/// Discretizes the rough-exponential representation along P^n:
/// S^{n,i} = s0^i exp(A^{n,i}) with left-point sums of the staircase
/// coefficients against (gamma^n, W^n), then h^n, kappa^n, V^n, phi^n and
/// the realized wealth against the true prices.
DiscretizedBsResult discretized_portfolio_bs(const ControlledCoefficients& coeffs,
                                             const std::vector<ControlledPath>& prices_true,
                                             const ConsumptionClock& clock,
                                             const PartitionScheme& scheme, std::size_t n);

// ---------------------------------------------------------------------------
// Coefficient registry: constants, deterministic smooth paths, W-driven paths.
// ---------------------------------------------------------------------------

struct BsCoeffSpec {
    std::string family; // "bs.const" | "bs.sin" | "bs.tanhw"
    std::map<std::string, double> params;
};

ControlledCoefficients make_bs_coefficients(const BsCoeffSpec& spec,
                                            std::shared_ptr<const TimeAugmentedRoughPath> lift);

/// Perturbs the family's drift or volatility parameter; the returned norm is
/// the controlled-path norm of the perturbation direction, so the coefficient
/// distance is delta * norm exactly.
std::pair<BsCoeffSpec, double> perturb_bs(const BsCoeffSpec& spec, double delta,
                                          const std::string& which);

} // namespace roughfolio
