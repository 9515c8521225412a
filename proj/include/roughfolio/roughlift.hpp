#pragma once

#include "roughfolio/gridpath.hpp"

#include <memory>

namespace roughfolio {

/// Ito-type rough path over a sampled path: the base X plus the cumulative
/// iterated integral I_t = int_0^t X (x) dX (left-point sums on the master
/// grid).  Only I is stored (O(N d^2)); the second level is reconstructed on
/// demand via
///     XX_{s,t} = I_t - I_s - X_s (x) X_{s,t},
/// which makes Chen's relation an exact identity of the reconstruction.
class RoughPath {
public:
    /// Canonical lift by running left-point sums over the master cells.
    static RoughPath rie_lift(SampledPath path);

    /// Assembles a rough path from a base and a precomputed cumulative
    /// iterated integral (used for canonical lifts of controlled paths).
    static RoughPath from_parts(SampledPath base, std::vector<double> iterated);

    const SampledPath& base() const { return base_; }
    std::size_t size() const { return base_.size(); }
    std::size_t dim() const { return base_.dim(); }

    std::span<const double> iterated_at(std::size_t i) const {
        const std::size_t dd = base_.dim() * base_.dim();
        return {iterated_.data() + i * dd, dd};
    }

    /// Second level XX_{s,t} written into `out` (d*d, row-major).
    void second_level(std::size_t s, std::size_t t, std::span<double> out) const;

    /// Frobenius norm of XX_{s,t}.
    double second_level_norm(std::size_t s, std::size_t t) const;

    /// Rough path bracket [X]_t = X_{0,t} (x) X_{0,t} - 2 Sym(XX_{0,t}),
    /// as a d*d matrix path on the grid.
    SampledPath bracket() const;

private:
    RoughPath(SampledPath base, std::vector<double> iterated);
    SampledPath base_;
    std::vector<double> iterated_; // size * d * d, I_t row-major
};

/// Rough path over R^{1+d} whose coordinate 0 is the time path gamma_t = t;
/// cross integrals are left-point sums, the (W,W) block is taken from the
/// underlying lift.
using TimeAugmentedRoughPath = RoughPath;

TimeAugmentedRoughPath time_augment(const RoughPath& rp);

/// ||X||_p + ||XX||_{p/2} over the anchor set (default: capped subsample).
double rough_norm(const RoughPath& rp, double p,
                  std::optional<std::vector<std::size_t>> anchors = std::nullopt);

double rough_distance(const RoughPath& rp, const RoughPath& rq, double p,
                      std::optional<std::vector<std::size_t>> anchors = std::nullopt);

/// Per-level diagnostic of the RIE property along a partition family.
struct RieLevelStat {
    std::size_t level = 0;
    /// sup over master times of |left-point Riemann sums along P^n - I|.
    double part2_sup_err = 0.0;
    /// sup over partition pairs k < l of |compensated defect|^{p/2} / (t_l - t_k).
    double part3_sup_stat = 0.0;
};

struct RieReport {
    double p = 0.0;
    std::vector<RieLevelStat> levels;
    /// Heuristic flag: the part-(iii) statistic grew over the last levels.
    bool part3_increasing = false;
};

/// Runs the diagnostic for each family index in `ns` (every index must be
/// refined by the master grid).  Convergence is reported, never asserted.
RieReport rie_diagnostic(const SampledPath& path, const PartitionScheme& scheme,
                         std::span<const std::size_t> ns, double p);

/// sup over master times of |int X^n (x) dX - I| for one partition level
/// (the part-(ii) error of an existing lift).
double riemann_lift_sup_error(const RoughPath& lift, const PartitionScheme& scheme,
                              std::size_t n);

} // namespace roughfolio
