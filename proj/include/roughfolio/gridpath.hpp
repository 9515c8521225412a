#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace roughfolio {

/// A d-dimensional path known at a finite strictly increasing time grid on
/// [0,T], stored as one flat row-major block (one row of d values per time).
/// Immutable after construction; the master grid of an experiment is the
/// grid of its driving path, and every derived object lives on it.
class SampledPath {
public:
    SampledPath(std::vector<double> times, std::vector<double> values, std::size_t dim);

    static SampledPath scalar(std::vector<double> times, std::vector<double> values);
    /// The path t -> t (one coordinate per dimension all equal to t).
    static SampledPath identity(std::vector<double> times, std::size_t dim = 1);
    static SampledPath constant(std::vector<double> times, std::span<const double> value);
    static SampledPath zero(std::vector<double> times, std::size_t dim);

    std::size_t size() const { return times_.size(); }
    std::size_t dim() const { return dim_; }
    double horizon() const { return times_.back(); }

    double time(std::size_t i) const { return times_[i]; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& raw_values() const { return values_; }

    std::span<const double> at(std::size_t i) const {
        return {values_.data() + i * dim_, dim_};
    }
    double value(std::size_t i, std::size_t k = 0) const { return values_[i * dim_ + k]; }

    /// Euclidean norm of the increment between grid indices i <= j.
    double increment_norm(std::size_t i, std::size_t j) const;

    bool same_grid(const SampledPath& other) const;

private:
    std::vector<double> times_;
    std::vector<double> values_;
    std::size_t dim_;
};

/// Nested partition family: uniform (n equal pieces) or dyadic (2^level
/// pieces).  Partitions are resolved as index sets on a concrete grid, so
/// membership of partition points in the master grid is exact by
/// construction; a grid that does not refine the partition is rejected.
class PartitionScheme {
public:
    enum class Kind { uniform, dyadic };

    static PartitionScheme uniform() { return PartitionScheme(Kind::uniform); }
    static PartitionScheme dyadic() { return PartitionScheme(Kind::dyadic); }

    Kind kind() const { return kind_; }

    /// Number of partition cells for family index n.
    std::size_t pieces(std::size_t n) const;

    /// Grid indices of the partition points of P^n on the given time grid.
    /// Throws if the grid does not refine P^n.
    std::vector<std::size_t> indices(const std::vector<double>& times, std::size_t n) const;

    double mesh(double horizon, std::size_t n) const;

    std::string name(std::size_t n) const;

    /// Parses "uniform:8" / "dyadic:3" into (scheme, n).
    static std::pair<PartitionScheme, std::size_t> parse(const std::string& text);

private:
    explicit PartitionScheme(Kind kind) : kind_(kind) {}
    Kind kind_;
};

/// Increasing cadlag consumption clock on a grid, with its jump times
/// declared explicitly (a grid alone cannot distinguish a jump from a steep
/// continuous rise).  Jumps are charged at their jump time in dK-integrals.
class ConsumptionClock {
public:
    ConsumptionClock(SampledPath path, std::vector<std::size_t> jump_indices);

    /// K = 1_{T}: consumption only at the terminal time.
    static ConsumptionClock terminal(std::vector<double> times);
    /// K_t = t: continuous consumption at unit rate.
    static ConsumptionClock linear(std::vector<double> times);

    const SampledPath& path() const { return path_; }
    double at(std::size_t i) const { return path_.value(i); }
    double total() const { return path_.value(path_.size() - 1); }
    const std::vector<std::size_t>& jump_indices() const { return jump_indices_; }
    bool is_jump(std::size_t i) const;

    /// Checks that all jump times are partition points of P^n.
    bool jumps_in_partition(const PartitionScheme& scheme, std::size_t n) const;

private:
    SampledPath path_;
    std::vector<std::size_t> jump_indices_;
};

// ---------------------------------------------------------------------------
// p-variation machinery
// ---------------------------------------------------------------------------

/// Exact O(M^2) dynamic program: returns
///   ( max over partitions drawn from `anchors` of sum |cost(a_i, a_{i+1})|^e )^{1/e}.
/// `cost` maps a pair of anchor values (grid indices) to a non-negative size.
double variation_sup(std::span<const std::size_t> anchors,
                     const std::function<double(std::size_t, std::size_t)>& cost,
                     double exponent);

/// Evenly subsamples [0, grid_size) down to at most `cap` anchors, always
/// keeping the endpoints, then merges the `must_include` indices.
std::vector<std::size_t> default_anchors(std::size_t grid_size, std::size_t cap,
                                         std::span<const std::size_t> must_include = {});

inline constexpr std::size_t kPVariationCap = 4096;
inline constexpr std::size_t kTwoParamCap = 1024;

/// p-variation of the path over the anchor set (all grid points, subsampled
/// beyond the cap; the value on a subsample is a certified lower bound).
double p_variation(const SampledPath& path, double p,
                   std::optional<std::vector<std::size_t>> anchors = std::nullopt);

/// r-variation of a two-parameter field given by its norm accessor
/// (s,t) -> |field_{s,t}| on grid-index pairs.
double two_param_p_variation(const std::function<double(std::size_t, std::size_t)>& field_norm,
                             double r, std::span<const std::size_t> anchors);

// ---------------------------------------------------------------------------
// Piecewise-constant approximations
// ---------------------------------------------------------------------------

/// X^n: the piecewise constant approximation of X along P^n, sampled back
/// onto the master grid (value X_{t^n_k} on [t^n_k, t^n_{k+1}), X_T at T).
SampledPath piecewise_constant(const SampledPath& path, const PartitionScheme& scheme,
                               std::size_t n);

/// The staircase time path gamma^n on the given master grid.
SampledPath time_discretization(const PartitionScheme& scheme, std::size_t n,
                                const std::vector<double>& master_times);

/// Supremum over the common grid of the Euclidean norm of a - b.
double sup_distance(const SampledPath& a, const SampledPath& b);

/// Cumulative Stieltjes integral of a scalar integrand against the clock.
/// Continuous increments are charged left-point; declared jumps of K are
/// charged with the integrand value at the jump time.
SampledPath clock_integral(const SampledPath& integrand, const ConsumptionClock& clock);

} // namespace roughfolio
