#include "roughfolio/gridpath.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roughfolio {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace

SampledPath::SampledPath(std::vector<double> times, std::vector<double> values, std::size_t dim)
    : times_(std::move(times)), values_(std::move(values)), dim_(dim) {
    require(dim_ >= 1, "SampledPath: dimension must be >= 1");
    require(!times_.empty(), "SampledPath: empty time grid");
    require(times_.front() == 0.0, "SampledPath: grid must start at 0");
    require(values_.size() == times_.size() * dim_, "SampledPath: values/times size mismatch");
    for (std::size_t i = 0; i + 1 < times_.size(); ++i)
        require(times_[i] < times_[i + 1], "SampledPath: times must be strictly increasing");
    for (double t : times_)
        require(std::isfinite(t), "SampledPath: non-finite time");
    for (double v : values_)
        require(std::isfinite(v), "SampledPath: non-finite value");
}

SampledPath SampledPath::scalar(std::vector<double> times, std::vector<double> values) {
    return SampledPath(std::move(times), std::move(values), 1);
}

SampledPath SampledPath::identity(std::vector<double> times, std::size_t dim) {
    std::vector<double> values(times.size() * dim);
    for (std::size_t i = 0; i < times.size(); ++i)
        for (std::size_t k = 0; k < dim; ++k) values[i * dim + k] = times[i];
    return SampledPath(std::move(times), std::move(values), dim);
}

SampledPath SampledPath::constant(std::vector<double> times, std::span<const double> value) {
    const std::size_t dim = value.size();
    std::vector<double> values(times.size() * dim);
    for (std::size_t i = 0; i < times.size(); ++i)
        for (std::size_t k = 0; k < dim; ++k) values[i * dim + k] = value[k];
    return SampledPath(std::move(times), std::move(values), dim);
}

SampledPath SampledPath::zero(std::vector<double> times, std::size_t dim) {
    std::vector<double> values(times.size() * dim, 0.0);
    return SampledPath(std::move(times), std::move(values), dim);
}

double SampledPath::increment_norm(std::size_t i, std::size_t j) const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
        const double d = values_[j * dim_ + k] - values_[i * dim_ + k];
        s += d * d;
    }
    return std::sqrt(s);
}

bool SampledPath::same_grid(const SampledPath& other) const {
    return times_ == other.times_;
}

// ---------------------------------------------------------------------------

std::size_t PartitionScheme::pieces(std::size_t n) const {
    require(n >= 1, "PartitionScheme: index must be >= 1");
    if (kind_ == Kind::uniform) return n;
    require(n < 63, "PartitionScheme: dyadic level too large");
    return std::size_t{1} << n;
}

std::vector<std::size_t> PartitionScheme::indices(const std::vector<double>& times,
                                                  std::size_t n) const {
    const std::size_t cells = times.size() - 1;
    const std::size_t k = pieces(n);
    if (cells == 0 || cells % k != 0)
        throw std::invalid_argument("PartitionScheme: master grid does not refine " + name(n));
    const std::size_t stride = cells / k;
    std::vector<std::size_t> idx(k + 1);
    for (std::size_t i = 0; i <= k; ++i) idx[i] = i * stride;
    return idx;
}

double PartitionScheme::mesh(double horizon, std::size_t n) const {
    return horizon / static_cast<double>(pieces(n));
}

std::string PartitionScheme::name(std::size_t n) const {
    return (kind_ == Kind::uniform ? "uniform:" : "dyadic:") + std::to_string(n);
}

std::pair<PartitionScheme, std::size_t> PartitionScheme::parse(const std::string& text) {
    const auto colon = text.find(':');
    require(colon != std::string::npos, "PartitionScheme: expected kind:index");
    const std::string kind = text.substr(0, colon);
    const std::size_t n = std::stoul(text.substr(colon + 1));
    if (kind == "uniform") return {PartitionScheme::uniform(), n};
    if (kind == "dyadic") return {PartitionScheme::dyadic(), n};
    throw std::invalid_argument("PartitionScheme: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

ConsumptionClock::ConsumptionClock(SampledPath path, std::vector<std::size_t> jump_indices)
    : path_(std::move(path)), jump_indices_(std::move(jump_indices)) {
    require(path_.dim() == 1, "ConsumptionClock: clock must be scalar");
    for (std::size_t i = 0; i + 1 < path_.size(); ++i)
        require(path_.value(i) <= path_.value(i + 1), "ConsumptionClock: must be non-decreasing");
    require(path_.value(0) >= 0.0, "ConsumptionClock: K_0 must be >= 0");
    require(total() > path_.value(0), "ConsumptionClock: total consumption mass must be positive");
    std::sort(jump_indices_.begin(), jump_indices_.end());
    for (std::size_t j : jump_indices_)
        require(j > 0 && j < path_.size(), "ConsumptionClock: jump index out of range");
}

ConsumptionClock ConsumptionClock::terminal(std::vector<double> times) {
    std::vector<double> values(times.size(), 0.0);
    values.back() = 1.0;
    const std::size_t last = times.size() - 1;
    return ConsumptionClock(SampledPath::scalar(std::move(times), std::move(values)), {last});
}

ConsumptionClock ConsumptionClock::linear(std::vector<double> times) {
    std::vector<double> values = times;
    return ConsumptionClock(SampledPath::scalar(std::move(times), std::move(values)), {});
}

bool ConsumptionClock::is_jump(std::size_t i) const {
    return std::binary_search(jump_indices_.begin(), jump_indices_.end(), i);
}

bool ConsumptionClock::jumps_in_partition(const PartitionScheme& scheme, std::size_t n) const {
    const auto idx = scheme.indices(path_.times(), n);
    for (std::size_t j : jump_indices_)
        if (!std::binary_search(idx.begin(), idx.end(), j)) return false;
    return true;
}

// ---------------------------------------------------------------------------

double variation_sup(std::span<const std::size_t> anchors,
                     const std::function<double(std::size_t, std::size_t)>& cost,
                     double exponent) {
    require(exponent >= 1.0, "variation: exponent must be >= 1");
    const std::size_t m = anchors.size();
    if (m < 2) return 0.0;
    // best[j]: max over partitions of anchors[0..j] ending exactly at anchors[j]
    // of the sum of |cost|^exponent.  Ties keep the earliest split.
    std::vector<double> best(m, 0.0);
    for (std::size_t j = 1; j < m; ++j) {
        double b = -1.0;
        for (std::size_t i = 0; i < j; ++i) {
            const double c = cost(anchors[i], anchors[j]);
            if (!std::isfinite(c)) throw std::invalid_argument("variation: non-finite cost");
            const double cand = best[i] + std::pow(c, exponent);
            if (cand > b) b = cand;
        }
        best[j] = b;
    }
    return best[m - 1] > 0.0 ? std::pow(best[m - 1], 1.0 / exponent) : 0.0;
}

std::vector<std::size_t> default_anchors(std::size_t grid_size, std::size_t cap,
                                         std::span<const std::size_t> must_include) {
    require(grid_size >= 1, "default_anchors: empty grid");
    std::vector<std::size_t> out;
    if (grid_size <= cap) {
        out.resize(grid_size);
        for (std::size_t i = 0; i < grid_size; ++i) out[i] = i;
    } else {
        out.reserve(cap + must_include.size());
        for (std::size_t i = 0; i < cap; ++i) {
            // even spread including both endpoints
            out.push_back((i * (grid_size - 1)) / (cap - 1));
        }
    }
    out.insert(out.end(), must_include.begin(), must_include.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    require(out.back() < grid_size, "default_anchors: anchor out of range");
    return out;
}

double p_variation(const SampledPath& path, double p,
                   std::optional<std::vector<std::size_t>> anchors) {
    require(p >= 1.0, "p_variation: p must be >= 1");
    std::vector<std::size_t> a =
        anchors ? std::move(*anchors) : default_anchors(path.size(), kPVariationCap);
    for (std::size_t i : a)
        require(i < path.size(), "p_variation: anchor out of range");
    return variation_sup(a, [&](std::size_t i, std::size_t j) { return path.increment_norm(i, j); },
                         p);
}

double two_param_p_variation(const std::function<double(std::size_t, std::size_t)>& field_norm,
                             double r, std::span<const std::size_t> anchors) {
    require(r >= 1.0, "two_param_p_variation: r must be >= 1");
    return variation_sup(anchors, field_norm, r);
}

// ---------------------------------------------------------------------------

SampledPath piecewise_constant(const SampledPath& path, const PartitionScheme& scheme,
                               std::size_t n) {
    const auto idx = scheme.indices(path.times(), n);
    const std::size_t d = path.dim();
    std::vector<double> values(path.size() * d);
    std::size_t cell = 0;
    for (std::size_t j = 0; j + 1 < path.size(); ++j) {
        while (cell + 1 < idx.size() - 1 && idx[cell + 1] <= j) ++cell;
        const auto v = path.at(idx[cell]);
        std::copy(v.begin(), v.end(), values.begin() + j * d);
    }
    const auto last = path.at(path.size() - 1);
    std::copy(last.begin(), last.end(), values.begin() + (path.size() - 1) * d);
    return SampledPath(path.times(), std::move(values), d);
}

SampledPath time_discretization(const PartitionScheme& scheme, std::size_t n,
                                const std::vector<double>& master_times) {
    return piecewise_constant(SampledPath::identity(master_times), scheme, n);
}

double sup_distance(const SampledPath& a, const SampledPath& b) {
    require(a.dim() == b.dim(), "sup_distance: dimension mismatch");
    require(a.same_grid(b), "sup_distance: grid mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.dim(); ++k) {
            const double d = a.value(i, k) - b.value(i, k);
            s += d * d;
        }
        worst = std::max(worst, s);
    }
    return std::sqrt(worst);
}

SampledPath clock_integral(const SampledPath& integrand, const ConsumptionClock& clock) {
    require(integrand.dim() == 1, "clock_integral: integrand must be scalar");
    require(integrand.same_grid(clock.path()), "clock_integral: grid mismatch");
    std::vector<double> out(integrand.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < integrand.size(); ++i) {
        const double dK = clock.at(i + 1) - clock.at(i);
        const double f = clock.is_jump(i + 1) ? integrand.value(i + 1) : integrand.value(i);
        acc += f * dK;
        out[i + 1] = acc;
    }
    return SampledPath::scalar(integrand.times(), std::move(out));
}

} // namespace roughfolio
