// Command-line front end: noise generation, lifting, RDE solving, portfolio
// construction and the stability / discretization / selftest experiments.

#include "roughfolio/csv_io.hpp"
#include "roughfolio/lab.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace rf = roughfolio;
using ordered_json = nlohmann::ordered_json;

namespace {

void write_json(const ordered_json& j, const std::string& out_dir, const std::string& name) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/" + name);
    out << j.dump(2) << "\n";
}

ordered_json rie_to_json(const rf::RieReport& report) {
    ordered_json levels = ordered_json::array();
    for (const auto& stat : report.levels)
        levels.push_back(ordered_json{{"level", stat.level},
                                      {"part2_sup_err", stat.part2_sup_err},
                                      {"part3_sup_stat", stat.part3_sup_stat}});
    return ordered_json{
        {"p", report.p}, {"levels", levels}, {"part3_increasing", report.part3_increasing}};
}

rf::NoiseSpec noise_from_config(const rf::SweepConfig& cfg) {
    rf::NoiseSpec spec;
    spec.kind = cfg.noise_kind;
    spec.dimension = cfg.dimension;
    spec.horizon = cfg.horizon;
    spec.master_level = cfg.master_level;
    spec.seed = cfg.seeds.empty() ? 0 : cfg.seeds[0];
    return spec;
}

int run_lift(const std::string& config_file, const std::string& out_dir) {
    const rf::SweepConfig cfg = rf::load_config(config_file);
    const rf::SampledPath w = rf::generate(noise_from_config(cfg));
    const rf::RoughPath lift = rf::RoughPath::rie_lift(w);
    std::filesystem::create_directories(out_dir);
    rf::write_lift_csv(lift, out_dir + "/lift.csv");
    const std::size_t n_max = cfg.levels.empty() ? 8 : cfg.levels.back();
    rf::NoiseSpec spec = noise_from_config(cfg);
    const rf::RieReport report = rf::rie_report(spec, cfg.scheme(), cfg.p, n_max);
    write_json(rie_to_json(report), out_dir, "report.json");
    return 0;
}

int run_solve(const std::string& config_file, const std::string& out_dir) {
    const rf::SweepConfig cfg = rf::load_config(config_file);
    const rf::SampledPath w = rf::generate(noise_from_config(cfg));
    auto lift = std::make_shared<const rf::TimeAugmentedRoughPath>(
        rf::time_augment(rf::RoughPath::rie_lift(w)));
    std::filesystem::create_directories(out_dir);
    ordered_json summary{{"model", cfg.model}, {"family", cfg.family}};
    if (cfg.model == "lv") {
        const rf::CoefficientField field = rf::make_lv_field({cfg.family, cfg.params});
        std::vector<double> s0(field.m, cfg.s0);
        const rf::PricePathResult result = rf::price_path(field, s0, lift, cfg.p);
        rf::write_path_csv(result.path.value_path(), out_dir + "/price.csv");
        summary["residual_sup"] = result.residual_sup;
        summary["controlled_norm_p"] = result.controlled_norm_p;
    } else {
        const rf::ControlledCoefficients coeffs =
            rf::make_bs_coefficients({cfg.family, cfg.params}, lift);
        std::vector<double> s0(coeffs.assets(), cfg.s0);
        const rf::PriceExponentialResult result = rf::price_exponential(coeffs, s0, lift);
        std::vector<rf::ControlledPath> comps(result.prices.begin(), result.prices.end());
        rf::write_path_csv(rf::from_components(comps).value_path(), out_dir + "/price.csv");
        summary["exponential_cross_check_sup"] = result.cross_check_sup;
    }
    write_json(summary, out_dir, "report.json");
    return 0;
}

int run_portfolio(const std::string& config_file, const std::string& out_dir) {
    const rf::SweepConfig cfg = rf::load_config(config_file);
    const rf::SampledPath w = rf::generate(noise_from_config(cfg));
    auto lift = std::make_shared<const rf::TimeAugmentedRoughPath>(
        rf::time_augment(rf::RoughPath::rie_lift(w)));
    const rf::ConsumptionClock clock = cfg.clock == "linear"
                                           ? rf::ConsumptionClock::linear(w.times())
                                           : rf::ConsumptionClock::terminal(w.times());
    std::filesystem::create_directories(out_dir);
    ordered_json summary{{"model", cfg.model}, {"family", cfg.family}};

    rf::PortfolioPath portfolio = [&] {
        if (cfg.model == "lv") {
            const rf::CoefficientField field = rf::make_lv_field({cfg.family, cfg.params});
            std::vector<double> s0(field.m, cfg.s0);
            rf::RdeSolution sol = rf::rde_solve(field, s0, lift);
            rf::LogOptimalResult res = rf::log_optimal_portfolio(field, sol.path, clock, lift);
            rf::write_path_csv(sol.path.value_path(), out_dir + "/price.csv");
            rf::write_path_csv(res.wealth.values, out_dir + "/V.csv");
            const rf::WealthPath hat = rf::realized_wealth(res.portfolio, sol.path, clock);
            rf::write_path_csv(hat.values, out_dir + "/Vhat.csv");
            summary["det_min"] = res.det_min;
            return std::move(res.portfolio);
        }
        const rf::ControlledCoefficients coeffs =
            rf::make_bs_coefficients({cfg.family, cfg.params}, lift);
        std::vector<double> s0(coeffs.assets(), cfg.s0);
        rf::PriceExponentialResult prices = rf::price_exponential(coeffs, s0, lift);
        rf::LogOptimalBsResult res =
            rf::log_optimal_portfolio_bs(coeffs, prices.prices, clock, lift);
        std::vector<rf::ControlledPath> comps(prices.prices.begin(), prices.prices.end());
        const rf::ControlledPath stacked = rf::from_components(comps);
        rf::write_path_csv(stacked.value_path(), out_dir + "/price.csv");
        rf::write_path_csv(res.wealth.values, out_dir + "/V.csv");
        const rf::WealthPath hat = rf::realized_wealth(res.portfolio, stacked, clock);
        rf::write_path_csv(hat.values, out_dir + "/Vhat.csv");
        summary["det_min"] = res.det_min;
        summary["sup_inv_price"] = res.sup_inv_price;
        return std::move(res.portfolio);
    }();

    rf::write_path_csv(portfolio.kappa.value_path(), out_dir + "/kappa.csv");
    std::vector<rf::ControlledPath> phi_all;
    phi_all.push_back(portfolio.phi0);
    for (const auto& p : portfolio.phi) phi_all.push_back(p);
    rf::write_path_csv(rf::from_components(phi_all).value_path(), out_dir + "/phi.csv");
    summary["kappa_0"] = portfolio.kappa.value(0);
    write_json(summary, out_dir, "report.json");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pathwise log-optimal portfolio laboratory"};
    app.require_subcommand(1);

    // gen-noise
    auto* gen = app.add_subcommand("gen-noise", "generate a driving path to CSV");
    std::string kind = "brownian", out_file = "w.csv", gen_config;
    std::size_t d = 1, level = 10;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    gen->add_option("--kind", kind, "brownian|zero|identity|sine");
    gen->add_option("--d", d, "dimension");
    gen->add_option("--T", horizon, "horizon");
    gen->add_option("--level", level, "master level (grid has 2^level cells)");
    gen->add_option("--seed", seed, "seed");
    gen->add_option("--config", gen_config, "optional config file with noise.* keys");
    gen->add_option("--out", out_file, "output CSV file");

    std::string config_file, out_dir = "out";
    auto add_config_cmd = [&](const char* name, const char* desc) {
        auto* cmd = app.add_subcommand(name, desc);
        cmd->add_option("--config", config_file, "flat key=value config file")->required();
        cmd->add_option("--out", out_dir, "output directory");
        return cmd;
    };
    auto* lift_cmd = add_config_cmd("lift", "canonical lift + RIE diagnostic");
    auto* solve_cmd = add_config_cmd("solve", "price path of the configured model");
    auto* portfolio_cmd = add_config_cmd("portfolio", "log-optimal portfolio and wealth");
    auto* stability_cmd = add_config_cmd("stability", "parameter-stability sweep");
    auto* discretize_cmd = add_config_cmd("discretize", "time-discretization sweep");

    auto* selftest_cmd = app.add_subcommand("selftest", "deterministic self checks");
    std::string selftest_config;
    selftest_cmd->add_option("--config", selftest_config, "optional config file");
    selftest_cmd->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            rf::NoiseSpec spec;
            if (!gen_config.empty()) {
                spec = noise_from_config(rf::load_config(gen_config));
            } else {
                spec.kind = rf::NoiseSpec::parse_kind(kind);
                spec.dimension = d;
                spec.horizon = horizon;
                spec.master_level = level;
                spec.seed = seed;
            }
            rf::write_path_csv(rf::generate(spec), out_file);
            return 0;
        }
        if (lift_cmd->parsed()) return run_lift(config_file, out_dir);
        if (solve_cmd->parsed()) return run_solve(config_file, out_dir);
        if (portfolio_cmd->parsed()) return run_portfolio(config_file, out_dir);
        if (stability_cmd->parsed()) {
            const rf::ExperimentReport report = rf::stability_sweep(rf::load_config(config_file));
            rf::write_report(report, out_dir);
            std::cout << (report.pass ? "PASS" : "FAIL") << " stability ("
                      << report.summary["fits"]["portfolio"]["slope"].get<double>() << ")\n";
            return report.pass ? 0 : 1;
        }
        if (discretize_cmd->parsed()) {
            const rf::ExperimentReport report =
                rf::discretization_sweep(rf::load_config(config_file));
            rf::write_report(report, out_dir);
            std::cout << (report.pass ? "PASS" : "FAIL") << " discretize ("
                      << report.summary["fits"]["portfolio"]["slope"].get<double>() << ")\n";
            return report.pass ? 0 : 1;
        }
        if (selftest_cmd->parsed()) {
            rf::SweepConfig cfg;
            if (!selftest_config.empty()) cfg = rf::load_config(selftest_config);
            const rf::ExperimentReport report = rf::selftest(cfg);
            rf::write_report(report, out_dir);
            for (const auto& check : report.summary["checks"])
                std::cout << (check["pass"].get<bool>() ? "PASS " : "FAIL ")
                          << check["name"].get<std::string>() << "\n";
            return report.pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
