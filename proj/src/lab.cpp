#include "roughfolio/lab.hpp"

#include "roughfolio/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace roughfolio {

namespace {

using ordered_json = nlohmann::ordered_json;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double sup_abs_diff(const SampledPath& a, const SampledPath& b) { return sup_distance(a, b); }

/// sup over the grid of |a - b| for the value paths of two controlled paths.
double sup_value_diff(const ControlledPath& a, const ControlledPath& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < a.codim(); ++c) {
            const double d = a.value(i, c) - b.value(i, c);
            acc += d * d;
        }
        worst = std::max(worst, std::sqrt(acc));
    }
    return worst;
}

SampledPath diff_path(const SampledPath& a, const SampledPath& b) {
    std::vector<double> values(a.size() * a.dim());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < a.dim(); ++k)
            values[i * a.dim() + k] = a.value(i, k) - b.value(i, k);
    return SampledPath(a.times(), std::move(values), a.dim());
}

struct PortfolioErrors {
    double phi_sup = 0.0;
    double kappa_sup = 0.0;
    double pvar = 0.0;
};

PortfolioErrors portfolio_errors(const PortfolioPath& a, const PortfolioPath& b, double p_prime,
                                 const std::vector<std::size_t>& anchors) {
    PortfolioErrors e;
    e.phi_sup = sup_value_diff(a.phi0, b.phi0);
    e.pvar = p_variation(diff_path(a.phi0.value_path(), b.phi0.value_path()), p_prime, anchors);
    for (std::size_t i = 0; i < a.phi.size(); ++i) {
        e.phi_sup = std::max(e.phi_sup, sup_value_diff(a.phi[i], b.phi[i]));
        e.pvar = std::max(e.pvar, p_variation(diff_path(a.phi[i].value_path(),
                                                        b.phi[i].value_path()),
                                              p_prime, anchors));
    }
    e.kappa_sup = sup_value_diff(a.kappa, b.kappa);
    e.pvar = std::max(e.pvar, p_variation(diff_path(a.kappa.value_path(), b.kappa.value_path()),
                                          p_prime, anchors));
    return e;
}

ConsumptionClock make_clock(const SweepConfig& cfg, const std::vector<double>& times) {
    if (cfg.clock == "terminal") return ConsumptionClock::terminal(times);
    if (cfg.clock == "linear") return ConsumptionClock::linear(times);
    throw std::invalid_argument("unknown clock '" + cfg.clock + "'");
}

NoiseSpec make_noise(const SweepConfig& cfg, std::uint64_t seed) {
    NoiseSpec spec;
    spec.kind = cfg.noise_kind;
    spec.dimension = cfg.dimension;
    spec.horizon = cfg.horizon;
    spec.master_level = cfg.master_level;
    spec.seed = seed;
    return spec;
}

std::size_t count_inversions(std::span<const double> decreasing) {
    std::size_t inversions = 0;
    for (std::size_t i = 0; i + 1 < decreasing.size(); ++i)
        if (decreasing[i + 1] > decreasing[i]) ++inversions;
    return inversions;
}

ordered_json fit_json(const RateFit& fit) {
    return ordered_json{{"slope", fit.slope},
                        {"intercept", fit.intercept},
                        {"half_width", fit.half_width},
                        {"points_used", fit.points_used}};
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

// ---------------------------------------------------------------------------
// rate_fit
// ---------------------------------------------------------------------------

RateFit rate_fit(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "rate_fit: size mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) throw std::invalid_argument("rate_fit: x must be positive");
        if (y[i] > 0.0) {
            lx.push_back(std::log2(x[i]));
            ly.push_back(std::log2(y[i]));
        }
    }
    const std::size_t n = lx.size();
    require(n >= 3, "rate_fit: need at least 3 positive points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    require(sxx > 0.0, "rate_fit: degenerate x");
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += r * r;
    }
    const double dof = static_cast<double>(n >= 3 ? n - 2 : 1);
    fit.half_width = 2.0 * std::sqrt(ss_res / dof / sxx);
    fit.points_used = n;
    return fit;
}

double theory_exponent_uniform(double p, double p_prime, double q, double beta) {
    const double factor = 1.0 - p / p_prime;
    return std::min((1.0 - 1.0 / q) * factor, (2.0 / p - beta) * factor);
}

double theory_exponent_dyadic(double p, double p_prime, double q, double epsilon) {
    const double factor = 1.0 - p / p_prime;
    return std::min({(1.0 - 1.0 / q) * factor, 1.0 / p - 1.0 / p_prime,
                     0.5 * (1.0 - epsilon) * factor});
}

// ---------------------------------------------------------------------------
// SweepConfig
// ---------------------------------------------------------------------------

void SweepConfig::validate() const {
    require(model == "lv" || model == "bs", "config: model must be lv or bs");
    require(p > 2.0 && p < p_prime && p_prime < 3.0, "config: need 2 < p < p' < 3");
    require(q > 1.0 && q < 2.0, "config: need q in (1,2)");
    require(1.0 / p_prime + 1.0 / q > 1.0, "config: need 1/p' + 1/q > 1");
    require(beta > 1.0 - 1.0 / p && beta < 2.0 / p, "config: beta outside (1-1/p, 2/p)");
    require(epsilon > 0.0 && epsilon < 1.0, "config: epsilon outside (0,1)");
    require(!seeds.empty(), "config: need at least one seed");
    require(s0 > 0.0, "config: s0 must be positive");
    if (sweep == "delta") {
        require(deltas.size() >= 3, "config: need at least 3 deltas");
        for (std::size_t i = 0; i + 1 < deltas.size(); ++i)
            require(deltas[i] > deltas[i + 1] && deltas[i + 1] > 0.0,
                    "config: deltas must be positive decreasing");
    } else if (sweep == "n") {
        require(levels.size() >= 3, "config: need at least 3 levels");
        for (std::size_t i = 0; i + 1 < levels.size(); ++i)
            require(levels[i] < levels[i + 1], "config: levels must be increasing");
        if (scheme_kind == PartitionScheme::Kind::dyadic)
            require(master_level >= levels.back() + 3,
                    "config: reference must be at least 8x finer than the largest level");
    } else {
        throw std::invalid_argument("config: sweep must be delta or n");
    }
}

PartitionScheme SweepConfig::scheme() const {
    return scheme_kind == PartitionScheme::Kind::uniform ? PartitionScheme::uniform()
                                                         : PartitionScheme::dyadic();
}

SweepConfig parse_config_text(const std::string& text) {
    SweepConfig cfg;
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "config: expected key=value, got '" + line + "'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    auto take = [&](const std::string& key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    if (auto v = take("model")) cfg.model = *v;
    if (auto v = take("family")) cfg.family = *v;
    if (auto v = take("perturb")) cfg.perturb = *v;
    if (auto v = take("noise.kind")) cfg.noise_kind = NoiseSpec::parse_kind(*v);
    if (auto v = take("noise.d")) cfg.dimension = std::stoul(*v);
    if (auto v = take("noise.T")) cfg.horizon = std::stod(*v);
    if (auto v = take("noise.level")) cfg.master_level = std::stoul(*v);
    if (auto v = take("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : split(*v, ',')) cfg.seeds.push_back(std::stoull(trim(s)));
    }
    if (auto v = take("scheme")) {
        require(*v == "uniform" || *v == "dyadic", "config: scheme must be uniform or dyadic");
        cfg.scheme_kind = (*v == "uniform") ? PartitionScheme::Kind::uniform
                                            : PartitionScheme::Kind::dyadic;
    }
    if (auto v = take("sweep")) cfg.sweep = *v;
    {
        int lo = -8, hi = -3;
        bool have = false;
        if (auto v = take("delta.exp.min")) {
            lo = std::stoi(*v);
            have = true;
        }
        if (auto v = take("delta.exp.max")) {
            hi = std::stoi(*v);
            have = true;
        }
        if (have || cfg.sweep == "delta") {
            require(lo < hi, "config: delta.exp.min must be < delta.exp.max");
            cfg.deltas.clear();
            for (int k = hi; k >= lo; --k) cfg.deltas.push_back(std::exp2(k));
        }
    }
    if (auto v = take("levels")) {
        cfg.levels.clear();
        const auto dots = v->find("..");
        if (dots != std::string::npos) {
            const std::size_t a = std::stoul(v->substr(0, dots));
            const std::size_t b = std::stoul(v->substr(dots + 2));
            for (std::size_t n = a; n <= b; ++n) cfg.levels.push_back(n);
        } else {
            for (const auto& s : split(*v, ',')) cfg.levels.push_back(std::stoul(trim(s)));
        }
    }
    if (auto v = take("p")) cfg.p = std::stod(*v);
    if (auto v = take("p_prime")) cfg.p_prime = std::stod(*v);
    if (auto v = take("q")) cfg.q = std::stod(*v);
    if (auto v = take("beta")) cfg.beta = std::stod(*v);
    if (auto v = take("epsilon")) cfg.epsilon = std::stod(*v);
    if (auto v = take("s0")) cfg.s0 = std::stod(*v);
    if (auto v = take("clock")) cfg.clock = *v;
    if (auto v = take("anchor_cap")) cfg.anchor_cap = std::stoul(*v);
    if (auto v = take("window.stability.lo")) cfg.stability_slope_lo = std::stod(*v);
    if (auto v = take("window.stability.hi")) cfg.stability_slope_hi = std::stod(*v);
    if (auto v = take("window.discretization.slope_max"))
        cfg.discretization_slope_max = std::stod(*v);
    if (auto v = take("window.inversions")) cfg.monotone_inversions_allowed = std::stoul(*v);

    for (auto& [key, value] : kv) {
        require(key.rfind("param.", 0) == 0, "config: unknown key '" + key + "'");
        cfg.params[key.substr(6)] = std::stod(value);
    }
    return cfg;
}

SweepConfig load_config(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open config " + filename);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string canonical_config_text(const SweepConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["model"] = cfg.model;
    kv["family"] = cfg.family;
    kv["perturb"] = cfg.perturb;
    NoiseSpec probe;
    probe.kind = cfg.noise_kind;
    kv["noise.kind"] = probe.kind_name();
    kv["noise.d"] = std::to_string(cfg.dimension);
    kv["noise.T"] = format_double(cfg.horizon);
    kv["noise.level"] = std::to_string(cfg.master_level);
    {
        std::string s;
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            s += (i ? "," : "") + std::to_string(cfg.seeds[i]);
        kv["seeds"] = s;
    }
    kv["scheme"] = cfg.scheme_kind == PartitionScheme::Kind::uniform ? "uniform" : "dyadic";
    kv["sweep"] = cfg.sweep;
    {
        std::string s;
        for (std::size_t i = 0; i < cfg.deltas.size(); ++i)
            s += (i ? "," : "") + format_double(cfg.deltas[i]);
        kv["deltas"] = s;
    }
    {
        std::string s;
        for (std::size_t i = 0; i < cfg.levels.size(); ++i)
            s += (i ? "," : "") + std::to_string(cfg.levels[i]);
        kv["levels"] = s;
    }
    kv["p"] = format_double(cfg.p);
    kv["p_prime"] = format_double(cfg.p_prime);
    kv["q"] = format_double(cfg.q);
    kv["beta"] = format_double(cfg.beta);
    kv["epsilon"] = format_double(cfg.epsilon);
    kv["s0"] = format_double(cfg.s0);
    kv["clock"] = cfg.clock;
    kv["anchor_cap"] = std::to_string(cfg.anchor_cap);
    kv["window.stability.lo"] = format_double(cfg.stability_slope_lo);
    kv["window.stability.hi"] = format_double(cfg.stability_slope_hi);
    kv["window.discretization.slope_max"] = format_double(cfg.discretization_slope_max);
    kv["window.inversions"] = std::to_string(cfg.monotone_inversions_allowed);
    for (const auto& [k, v] : cfg.params) kv["param." + k] = format_double(v);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string config_hash(const SweepConfig& cfg) {
    const std::string text = canonical_config_text(cfg);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

namespace {

struct SweepPoint {
    double key = 0.0;
    double err_phi_sup = 0.0;
    double err_kappa_sup = 0.0;
    double err_v_sup = 0.0;
    double err_vhat_sup = 0.0;
    double err_pvar = 0.0;
    double wn_sup_err = 0.0;
    double wlift_sup_err = 0.0;
    double rhs_norm = 0.0; // Lipschitz right-hand side (delta * perturbation norm)
};

std::string points_csv(const std::vector<SweepPoint>& points, const std::string& model) {
    std::string out = "delta_or_n,err_phi_sup,err_kappa_sup,err_V_sup,err_pvar,model\n";
    for (const auto& pt : points) {
        out += format_double(pt.key) + "," + format_double(pt.err_phi_sup) + "," +
               format_double(pt.err_kappa_sup) + "," + format_double(pt.err_v_sup) + "," +
               format_double(pt.err_pvar) + "," + model + "\n";
    }
    return out;
}

ordered_json points_json(const std::vector<SweepPoint>& points, bool discretization) {
    ordered_json arr = ordered_json::array();
    for (const auto& pt : points) {
        ordered_json j{{"key", pt.key},
                       {"err_phi_sup", pt.err_phi_sup},
                       {"err_kappa_sup", pt.err_kappa_sup},
                       {"err_V_sup", pt.err_v_sup},
                       {"err_Vhat_sup", pt.err_vhat_sup},
                       {"err_pvar", pt.err_pvar}};
        if (discretization) {
            j["wn_sup_err"] = pt.wn_sup_err;
            j["wlift_sup_err"] = pt.wlift_sup_err;
        } else {
            j["rhs_norm"] = pt.rhs_norm;
        }
        arr.push_back(j);
    }
    return arr;
}

/// Per-seed environment shared between the base and perturbed runs, so all
/// controlled paths of one experiment reference the same lift object.
struct MarketEnv {
    SampledPath noise;
    std::shared_ptr<const TimeAugmentedRoughPath> lift;
    ConsumptionClock clock;
};

MarketEnv make_env(const SweepConfig& cfg, std::uint64_t seed) {
    SampledPath w = generate(make_noise(cfg, seed));
    auto lift =
        std::make_shared<const TimeAugmentedRoughPath>(time_augment(RoughPath::rie_lift(w)));
    ConsumptionClock clock = make_clock(cfg, w.times());
    return {std::move(w), std::move(lift), std::move(clock)};
}

struct MarketRun {
    ControlledPath prices; // codim m
    PortfolioPath portfolio;
    WealthPath wealth;     // optimal V
    WealthPath wealth_hat; // realized on the true market
    double det_min = 0.0;
    double sup_inv_price = 0.0;                   // bs only
    std::optional<ControlledCoefficients> coeffs; // bs only
    CoefficientField field;                       // lv only
};

MarketRun run_market(const SweepConfig& cfg, const std::map<std::string, double>& params,
                     const MarketEnv& env) {
    if (cfg.model == "lv") {
        const CoefficientField field = make_lv_field({cfg.family, params});
        std::vector<double> s0(field.m, cfg.s0);
        RdeSolution sol = rde_solve(field, s0, env.lift);
        LogOptimalResult res = log_optimal_portfolio(field, sol.path, env.clock, env.lift);
        WealthPath hat = realized_wealth(res.portfolio, sol.path, env.clock);
        return {std::move(sol.path), std::move(res.portfolio), std::move(res.wealth),
                std::move(hat),      res.det_min,              0.0,
                std::nullopt,        field};
    }
    ControlledCoefficients coeffs = make_bs_coefficients({cfg.family, params}, env.lift);
    std::vector<double> s0(coeffs.assets(), cfg.s0);
    PriceExponentialResult prices = price_exponential(coeffs, s0, env.lift);
    LogOptimalBsResult res = log_optimal_portfolio_bs(coeffs, prices.prices, env.clock, env.lift);
    std::vector<ControlledPath> scalar_prices;
    for (const auto& s : prices.prices) scalar_prices.push_back(s);
    ControlledPath stacked = from_components(scalar_prices);
    WealthPath hat = realized_wealth(res.portfolio, stacked, env.clock);
    return {std::move(stacked), std::move(res.portfolio), std::move(res.wealth),
            std::move(hat),     res.det_min,              res.sup_inv_price,
            std::move(coeffs),  CoefficientField{}};
}

} // namespace

ExperimentReport stability_sweep(const SweepConfig& cfg) {
    cfg.validate();
    require(cfg.sweep == "delta", "stability_sweep: sweep variable must be delta");

    std::vector<SweepPoint> mean(cfg.deltas.size());
    double det_min = std::numeric_limits<double>::infinity();
    double sup_inv_price = 0.0;
    double w_norm = 0.0;
    double field_bound = 0.0;
    double bump_norm = 1.0;

    for (const std::uint64_t seed : cfg.seeds) {
        const MarketEnv env = make_env(cfg, seed);
        MarketRun base = run_market(cfg, cfg.params, env);
        det_min = std::min(det_min, base.det_min);
        sup_inv_price = std::max(sup_inv_price, base.sup_inv_price);
        w_norm = std::max(w_norm, rough_norm(*env.lift, cfg.p));
        if (cfg.model == "lv") field_bound = std::max(field_bound, base.field.c3_bound);
        const auto anchors = default_anchors(base.prices.size(), cfg.anchor_cap);

        for (std::size_t di = 0; di < cfg.deltas.size(); ++di) {
            const double delta = cfg.deltas[di];
            std::map<std::string, double> perturbed;
            if (cfg.model == "lv") {
                auto [spec, norm] = perturb_lv({cfg.family, cfg.params}, delta, cfg.perturb);
                perturbed = spec.params;
                bump_norm = norm;
            } else {
                auto [spec, norm] = perturb_bs({cfg.family, cfg.params}, delta, cfg.perturb);
                perturbed = spec.params;
                bump_norm = norm;
            }
            MarketRun tilde = run_market(cfg, perturbed, env);
            const PortfolioErrors pe =
                portfolio_errors(tilde.portfolio, base.portfolio, cfg.p_prime, anchors);
            const double err_v = sup_abs_diff(tilde.wealth.values, base.wealth.values);
            // Misspecified portfolio run on the true price path (model
            // uncertainty wealth).
            const WealthPath hat_tilde =
                realized_wealth(tilde.portfolio, base.prices, env.clock);
            const double err_vhat = sup_abs_diff(hat_tilde.values, base.wealth_hat.values);

            SweepPoint& pt = mean[di];
            pt.key = delta;
            const double inv_seeds = 1.0 / static_cast<double>(cfg.seeds.size());
            pt.err_phi_sup += pe.phi_sup * inv_seeds;
            pt.err_kappa_sup += pe.kappa_sup * inv_seeds;
            pt.err_v_sup += err_v * inv_seeds;
            pt.err_vhat_sup += err_vhat * inv_seeds;
            pt.err_pvar += pe.pvar * inv_seeds;
            pt.rhs_norm = delta * bump_norm;
        }
    }

    std::vector<double> xs, y_portfolio, y_wealth;
    for (const auto& pt : mean) {
        xs.push_back(pt.key);
        y_portfolio.push_back(std::max(pt.err_phi_sup, pt.err_kappa_sup));
        y_wealth.push_back(pt.err_v_sup);
    }
    const RateFit fit_portfolio = rate_fit(xs, y_portfolio);
    const RateFit fit_wealth = rate_fit(xs, y_wealth);

    const bool pass = fit_portfolio.slope >= cfg.stability_slope_lo &&
                      fit_portfolio.slope <= cfg.stability_slope_hi &&
                      fit_wealth.slope >= cfg.stability_slope_lo &&
                      fit_wealth.slope <= cfg.stability_slope_hi;

    ExperimentReport report;
    report.summary = ordered_json{
        {"kind", "stability"},
        {"config_hash", config_hash(cfg)},
        {"model", cfg.model},
        {"family", cfg.family},
        {"perturb", cfg.perturb},
        {"hyper",
         ordered_json{{"p", cfg.p}, {"p_prime", cfg.p_prime}, {"q", cfg.q}, {"beta", cfg.beta},
                      {"epsilon", cfg.epsilon}}},
        {"seeds", cfg.seeds},
        {"constants",
         ordered_json{{"det_min", det_min},
                      {"sup_inv_price", sup_inv_price},
                      {"w_rough_norm_p", w_norm},
                      {"field_c3_bound", field_bound},
                      {"perturbation_norm", bump_norm}}},
        {"points", points_json(mean, false)},
        {"fits",
         ordered_json{{"portfolio", fit_json(fit_portfolio)}, {"wealth", fit_json(fit_wealth)}}},
        {"windows",
         ordered_json{{"slope_lo", cfg.stability_slope_lo},
                      {"slope_hi", cfg.stability_slope_hi}}},
        {"pass", pass}};
    report.points_csv = points_csv(mean, cfg.model);
    report.pass = pass;
    return report;
}

ExperimentReport discretization_sweep(const SweepConfig& cfg) {
    cfg.validate();
    require(cfg.sweep == "n", "discretization_sweep: sweep variable must be n");
    const PartitionScheme scheme = cfg.scheme();

    std::vector<SweepPoint> mean(cfg.levels.size());
    double det_min = std::numeric_limits<double>::infinity();
    double w_norm = 0.0;

    for (const std::uint64_t seed : cfg.seeds) {
        const MarketEnv env = make_env(cfg, seed);
        MarketRun base = run_market(cfg, cfg.params, env);
        det_min = std::min(det_min, base.det_min);
        w_norm = std::max(w_norm, rough_norm(*env.lift, cfg.p));
        const RoughPath noise_lift = RoughPath::rie_lift(env.noise);

        // p'-variation anchors: partition points of the largest level, capped
        // (a subsampled anchor set yields a certified lower bound).
        const auto largest_idx = scheme.indices(env.noise.times(), cfg.levels.back());
        std::vector<std::size_t> anchors;
        if (largest_idx.size() <= cfg.anchor_cap) {
            anchors = largest_idx;
        } else {
            for (std::size_t i : default_anchors(largest_idx.size(), cfg.anchor_cap))
                anchors.push_back(largest_idx[i]);
        }

        for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
            const std::size_t n = cfg.levels[li];
            PortfolioPath disc_portfolio = [&] {
                if (cfg.model == "lv")
                    return discretized_portfolio(base.field, base.prices, env.clock, scheme, n);
                std::vector<ControlledPath> scalar_prices;
                for (std::size_t i = 0; i < base.prices.codim(); ++i)
                    scalar_prices.push_back(base.prices.component(i));
                DiscretizedBsResult d =
                    discretized_portfolio_bs(*base.coeffs, scalar_prices, env.clock, scheme, n);
                return DiscretizedResult{std::move(d.portfolio), std::move(d.wealth),
                                         std::move(d.wealth_hat)};
            }()
                                                .portfolio;
            const WealthPath hat_n = realized_wealth(disc_portfolio, base.prices, env.clock);

            const PortfolioErrors pe =
                portfolio_errors(disc_portfolio, base.portfolio, cfg.p_prime, anchors);
            SweepPoint& pt = mean[li];
            pt.key = static_cast<double>(scheme.pieces(n));
            const double inv_seeds = 1.0 / static_cast<double>(cfg.seeds.size());
            pt.err_phi_sup += pe.phi_sup * inv_seeds;
            pt.err_kappa_sup += pe.kappa_sup * inv_seeds;
            pt.err_v_sup += sup_abs_diff(hat_n.values, base.wealth_hat.values) * inv_seeds;
            pt.err_vhat_sup = pt.err_v_sup;
            pt.err_pvar += pe.pvar * inv_seeds;
            pt.wn_sup_err +=
                sup_distance(piecewise_constant(env.noise, scheme, n), env.noise) * inv_seeds;
            pt.wlift_sup_err += riemann_lift_sup_error(noise_lift, scheme, n) * inv_seeds;
        }
    }

    std::vector<double> xs, y_portfolio, y_wealth;
    for (const auto& pt : mean) {
        xs.push_back(pt.key);
        y_portfolio.push_back(std::max(pt.err_phi_sup, pt.err_kappa_sup));
        y_wealth.push_back(pt.err_v_sup);
    }
    const RateFit fit_portfolio = rate_fit(xs, y_portfolio);
    const RateFit fit_wealth = rate_fit(xs, y_wealth);

    const double theory = cfg.scheme_kind == PartitionScheme::Kind::uniform
                              ? theory_exponent_uniform(cfg.p, cfg.p_prime, cfg.q, cfg.beta)
                              : theory_exponent_dyadic(cfg.p, cfg.p_prime, cfg.q, cfg.epsilon);

    const std::size_t inv_portfolio = count_inversions(y_portfolio);
    const std::size_t inv_wealth = count_inversions(y_wealth);
    const bool slopes_pass = fit_portfolio.slope <= cfg.discretization_slope_max &&
                             fit_wealth.slope <= cfg.discretization_slope_max;
    const bool monotone_pass = inv_portfolio <= cfg.monotone_inversions_allowed &&
                               inv_wealth <= cfg.monotone_inversions_allowed;
    const bool pass = slopes_pass && monotone_pass;

    // Empirical slopes may beat the worst-case exponent; only flag a
    // violation, never assert tightness.
    const double worst_slope = std::max(fit_portfolio.slope, fit_wealth.slope);
    std::string status = "consistent_with_bound";
    if (worst_slope > -theory + 0.1)
        status = "bound_violated";
    else if (worst_slope < -theory - 0.1)
        status = "faster_than_bound";

    ExperimentReport report;
    report.summary = ordered_json{
        {"kind", "discretization"},
        {"config_hash", config_hash(cfg)},
        {"model", cfg.model},
        {"family", cfg.family},
        {"scheme", cfg.scheme_kind == PartitionScheme::Kind::uniform ? "uniform" : "dyadic"},
        {"hyper",
         ordered_json{{"p", cfg.p}, {"p_prime", cfg.p_prime}, {"q", cfg.q}, {"beta", cfg.beta},
                      {"epsilon", cfg.epsilon}}},
        {"seeds", cfg.seeds},
        {"constants", ordered_json{{"det_min", det_min}, {"w_rough_norm_p", w_norm}}},
        {"points", points_json(mean, true)},
        {"fits",
         ordered_json{{"portfolio", fit_json(fit_portfolio)}, {"wealth", fit_json(fit_wealth)}}},
        {"theory_exponent", theory},
        {"status", status},
        {"inversions",
         ordered_json{{"portfolio", inv_portfolio}, {"wealth", inv_wealth},
                      {"allowed", cfg.monotone_inversions_allowed}}},
        {"windows", ordered_json{{"slope_max", cfg.discretization_slope_max}}},
        {"pass", pass}};
    report.points_csv = points_csv(mean, cfg.model);
    report.pass = pass;
    return report;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

namespace {

struct Check {
    std::string name;
    double value;
    double threshold;
    bool pass;
};

void add_check(std::vector<Check>& checks, const std::string& name, double value,
               double threshold) {
    checks.push_back({name, value, threshold, value <= threshold});
}

} // namespace

ExperimentReport selftest(const SweepConfig& cfg_in) {
    SweepConfig cfg = cfg_in;
    if (cfg.master_level > 12) cfg.master_level = 12;
    const std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds[0];
    std::vector<Check> checks;

    // Noise determinism and refinement consistency.
    {
        NoiseSpec spec = make_noise(cfg, seed);
        spec.kind = NoiseSpec::Kind::brownian;
        const SampledPath a = generate(spec);
        const SampledPath b = generate(spec);
        double regen = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            regen = std::max(regen, std::abs(a.value(i) - b.value(i)));
        add_check(checks, "noise_regeneration_identical", regen, 0.0);

        NoiseSpec coarse = spec;
        coarse.master_level = spec.master_level - 1;
        const SampledPath c = generate(coarse);
        double refine = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i)
            refine = std::max(refine, std::abs(c.value(i) - a.value(2 * i)));
        add_check(checks, "noise_refinement_consistency", refine, 0.0);
    }

    // Algebraic identities on a Brownian lift.
    {
        NoiseSpec spec = make_noise(cfg, seed);
        spec.kind = NoiseSpec::Kind::brownian;
        spec.master_level = std::min<std::size_t>(cfg.master_level, 10);
        const SampledPath w = generate(spec);
        auto lift = std::make_shared<const RoughPath>(RoughPath::rie_lift(w));
        const std::size_t n = w.size();

        double chen = 0.0;
        std::vector<double> xst(1), xsu(1), xut(1);
        std::uint64_t state = seed * 2654435761ULL + 1;
        auto next_index = [&](std::size_t bound) {
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            return static_cast<std::size_t>((state >> 33) % bound);
        };
        for (int trial = 0; trial < 1000; ++trial) {
            std::size_t s = next_index(n), u = next_index(n), t = next_index(n);
            if (s > u) std::swap(s, u);
            if (u > t) std::swap(u, t);
            if (s > u) std::swap(s, u);
            lift->second_level(s, t, xst);
            lift->second_level(s, u, xsu);
            lift->second_level(u, t, xut);
            const double res =
                xst[0] - xsu[0] - xut[0] - (w.value(u) - w.value(s)) * (w.value(t) - w.value(u));
            chen = std::max(chen, std::abs(res));
        }
        add_check(checks, "chen_residual", chen, 1e-12);

        const ControlledPath wid = ControlledPath::identity(lift);
        const ControlledPath intw = rough_integral(wid, wid);
        const SampledPath bracket = lift->bracket();
        const double wt = w.value(n - 1) - w.value(0);
        add_check(checks, "polarization_identity",
                  std::abs(2.0 * intw.value(n - 1) + bracket.value(n - 1) - wt * wt), 1e-9);

        const ControlledPath w2 = product(wid, wid);
        const ControlledPath w3 = product(w2, wid);
        std::vector<double> rf(1), rg(1), rfg(1);
        double prod_res = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            std::size_t s = next_index(n), t = next_index(n);
            if (s > t) std::swap(s, t);
            w2.remainder(s, t, rf);
            wid.remainder(s, t, rg);
            w3.remainder(s, t, rfg);
            const double df = w2.value(t) - w2.value(s);
            const double dg = w.value(t) - w.value(s);
            const double expect = rf[0] * w.value(s) + w2.value(s) * rg[0] + df * dg;
            prod_res = std::max(prod_res, std::abs(rfg[0] - expect));
        }
        add_check(checks, "product_remainder_identity", prod_res, 1e-12);

        add_check(checks, "associativity_residual", associativity_residual(wid, w2, wid), 1e-8);
    }

    // Closed-form portfolio oracle (constant-coefficient Black-Scholes).
    {
        SweepConfig merton = cfg;
        merton.model = "bs";
        merton.family = "bs.const";
        merton.params = {{"b", 0.1}, {"sigma", 0.2}};
        const MarketEnv env = make_env(merton, seed);
        MarketRun run = run_market(merton, merton.params, env);
        const double ratio = 0.1 / (0.2 * 0.2);
        double fraction_err = 0.0;
        for (std::size_t i = 0; i + 1 < run.prices.size(); ++i) {
            const double v = run.wealth.values.value(i);
            if (v <= 0.0) continue;
            const double fraction =
                run.portfolio.phi[0].value(i) * run.prices.value(i, 0) / v;
            fraction_err = std::max(fraction_err, std::abs(fraction - ratio));
        }
        add_check(checks, "merton_fraction_exact", fraction_err, 1e-12);

        double kappa_err = 0.0;
        const double theta = 0.1 / 0.2;
        for (std::size_t i = 0; i < run.prices.size(); ++i) {
            const double t = env.noise.time(i);
            const double closed = std::exp(0.5 * theta * theta * t + theta * env.noise.value(i));
            kappa_err = std::max(kappa_err, std::abs(run.portfolio.kappa.value(i) - closed));
        }
        add_check(checks, "kappa_closed_form", kappa_err, 1e-9);
    }

    // Consistency chain.
    {
        SweepConfig bs = cfg;
        bs.model = "bs";
        bs.family = "bs.const";
        bs.params = {{"b", 0.1}, {"sigma", 0.2}};
        SampledPath w = generate(make_noise(bs, seed));
        auto lift =
            std::make_shared<const TimeAugmentedRoughPath>(time_augment(RoughPath::rie_lift(w)));
        ControlledCoefficients coeffs = make_bs_coefficients({bs.family, bs.params}, lift);
        std::vector<double> s0{1.0};
        PriceExponentialResult pe = price_exponential(coeffs, s0, lift);
        add_check(checks, "linear_rde_vs_exponential", pe.cross_check_sup, 1e-6);

        const CoefficientField field = make_lv_field({"lv.tanh", {{"b0", 0.05},
                                                                  {"b1", 0.1},
                                                                  {"s0", 0.3},
                                                                  {"s1", 0.1}}});
        const PartitionScheme dyadic = PartitionScheme::dyadic();
        const std::size_t level = bs.master_level >= 4 ? bs.master_level - 3 : 1;
        const SampledPath euler = euler_solve(field, s0, w, dyadic, level);
        const SampledPath wn = piecewise_constant(w, dyadic, level);
        const SampledPath gn = time_discretization(dyadic, level, w.times());
        std::vector<double> pair_values(w.size() * 2);
        for (std::size_t i = 0; i < w.size(); ++i) {
            pair_values[2 * i] = gn.value(i);
            pair_values[2 * i + 1] = wn.value(i);
        }
        auto staircase_lift = std::make_shared<const RoughPath>(
            RoughPath::rie_lift(SampledPath(w.times(), std::move(pair_values), 2)));
        RdeSolution driven = rde_solve(field, s0, staircase_lift);
        const auto idx = dyadic.indices(w.times(), level);
        double gap = 0.0;
        for (const std::size_t j : idx)
            gap = std::max(gap, std::abs(euler.value(j) - driven.path.value(j)));
        add_check(checks, "euler_equals_staircase_rde", gap, 0.0);

        const ConsumptionClock clock = make_clock(bs, w.times());
        RdeSolution sol = rde_solve(field, s0, lift);
        LogOptimalResult cont = log_optimal_portfolio(field, sol.path, clock, lift);
        DiscretizedResult disc =
            discretized_portfolio(field, sol.path, clock, dyadic, bs.master_level);
        double reproduce = sup_value_diff(disc.portfolio.kappa, cont.portfolio.kappa);
        for (std::size_t i = 0; i < disc.portfolio.phi.size(); ++i)
            reproduce =
                std::max(reproduce, sup_value_diff(disc.portfolio.phi[i], cont.portfolio.phi[i]));
        add_check(checks, "discretized_at_master_reproduces", reproduce, 1e-9);
    }

    // Miniature sweeps.
    ordered_json mini = ordered_json::array();
    std::string csv;
    {
        SweepConfig st = cfg;
        st.sweep = "delta";
        st.deltas = {std::exp2(-3), std::exp2(-4), std::exp2(-5), std::exp2(-6), std::exp2(-7)};
        st.seeds = {seed};
        st.master_level = std::min<std::size_t>(cfg.master_level, 10);
        st.stability_slope_lo = 0.5;
        st.stability_slope_hi = 1.5;
        for (const char* model : {"lv", "bs"}) {
            st.model = model;
            if (st.model == "lv") {
                st.family = "lv.tanh";
                st.params = {{"b0", 0.05}, {"b1", 0.1}, {"s0", 0.3}, {"s1", 0.1}};
            } else {
                st.family = "bs.const";
                st.params = {{"b", 0.1}, {"sigma", 0.2}};
            }
            ExperimentReport r = stability_sweep(st);
            checks.push_back({std::string("stability_slope_") + model,
                              r.summary["fits"]["portfolio"]["slope"].get<double>(), 0.0,
                              r.pass});
            mini.push_back(ordered_json{{"name", std::string("stability_") + model},
                                        {"summary", r.summary}});
            csv += r.points_csv;
        }

        SweepConfig ds = cfg;
        ds.sweep = "n";
        ds.model = "lv";
        ds.family = "lv.tanh";
        ds.params = {{"b0", 0.05}, {"b1", 0.1}, {"s0", 0.3}, {"s1", 0.1}};
        ds.seeds = {seed};
        ds.master_level = std::clamp<std::size_t>(cfg.master_level, 9, 10);
        ds.levels.clear();
        for (std::size_t n = ds.master_level - 6; n + 3 <= ds.master_level; ++n)
            ds.levels.push_back(n);
        ds.discretization_slope_max = -0.1;
        ExperimentReport r = discretization_sweep(ds);
        checks.push_back({"discretization_slope_lv",
                          r.summary["fits"]["portfolio"]["slope"].get<double>(), 0.0, r.pass});
        mini.push_back(ordered_json{{"name", "discretization_lv"}, {"summary", r.summary}});
        csv += r.points_csv;
    }

    bool pass = true;
    ordered_json checks_json = ordered_json::array();
    for (const auto& c : checks) {
        pass = pass && c.pass;
        checks_json.push_back(ordered_json{
            {"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
    }

    ExperimentReport report;
    report.summary = ordered_json{{"kind", "selftest"},
                                  {"config_hash", config_hash(cfg)},
                                  {"checks", checks_json},
                                  {"sweeps", mini},
                                  {"pass", pass}};
    report.points_csv = csv;
    report.pass = pass;
    return report;
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir + "/report.json");
        if (!out) throw std::runtime_error("cannot write " + out_dir + "/report.json");
        out << report.summary.dump(2) << "\n";
    }
    {
        std::ofstream out(out_dir + "/points.csv");
        if (!out) throw std::runtime_error("cannot write " + out_dir + "/points.csv");
        out << report.points_csv;
    }
}

} // namespace roughfolio
