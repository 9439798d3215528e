// Command-line front end: fit the estimators on a CSV dataset, run a Monte
// Carlo design, or sweep a grid of designs with per-cell checkpointing.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hdlogit/hdlogit.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::vector<hdlogit::Method> parse_methods(const std::string& csv) {
    std::vector<hdlogit::Method> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "naive") {
            out.push_back(hdlogit::Method::naive);
        } else if (tok == "optimal-iv") {
            out.push_back(hdlogit::Method::optimal_iv);
        } else if (tok == "double-selection") {
            out.push_back(hdlogit::Method::double_selection);
        } else if (tok == "one-step") {
            out.push_back(hdlogit::Method::one_step);
        } else {
            throw hdlogit::InvalidInputError("unknown method '" + tok + "'");
        }
    }
    if (out.empty()) throw hdlogit::InvalidInputError("no methods requested");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw hdlogit::InvalidInputError("empty list");
    return out;
}

// "start:stop:step" inclusive of stop up to rounding slack.
std::vector<double> parse_range(const std::string& spec) {
    double start, stop, step;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0.0) {
        throw hdlogit::InvalidInputError("bad range '" + spec + "' (want start:stop:step)");
    }
    std::vector<double> out;
    for (int k = 0;; ++k) {
        const double v = start + step * k;
        if (v > stop + 1e-9) break;
        out.push_back(v);
    }
    return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
    }
    fs::rename(tmp, path);
}

json region_to_json(const hdlogit::ConfidenceRegion& region) {
    json intervals = json::array();
    for (const auto& [lo, hi] : region.intervals) intervals.push_back({lo, hi});
    return {{"kind", hdlogit::region_kind_name(region.kind)},
            {"level", region.level},
            {"intervals", intervals},
            {"empty", region.intervals.empty()}};
}

int cmd_fit(const std::string& data_path, const std::string& y_col, const std::string& d_col,
            bool no_intercept, const hdlogit::AnalysisConfig& cfg, double alpha0, bool have_alpha0,
            const std::string& out_path) {
    const hdlogit::CsvTable table = hdlogit::read_csv(data_path);
    const hdlogit::Dataset data = hdlogit::dataset_from_table(table, y_col, d_col, !no_intercept);
    const hdlogit::AnalysisOutput out = hdlogit::analyze(data, cfg);

    const auto col_name = [&](int j) {
        return data.col_names.empty() ? std::to_string(j) : data.col_names[j];
    };

    json doc;
    doc["n"] = out.n;
    doc["p"] = out.p_orig;
    doc["lambda1"] = out.lambda1;
    doc["lambda2"] = out.lambda2;
    json s1 = json::array(), s2 = json::array(), dropped = json::array();
    for (int j : out.support1) s1.push_back(col_name(j));
    for (int j : out.support2) s2.push_back(col_name(j));
    for (int j : out.dropped_columns) dropped.push_back(col_name(j));
    doc["support_step1"] = s1;
    doc["support_step2"] = s2;
    doc["dropped_columns"] = dropped;

    json methods = json::array();
    for (const auto& [m, mo] : out.methods) {
        json entry;
        entry["method"] = hdlogit::method_name(m);
        entry["alpha_check"] = mo.result.alpha_check;
        entry["std_err"] = std::sqrt(mo.result.sigma_sq / mo.result.n_used);
        entry["region"] = region_to_json(mo.region);
        if (mo.region_cr_i) entry["region_cr_i"] = region_to_json(*mo.region_cr_i);
        if (have_alpha0) {
            const hdlogit::TestOutcome t =
                hdlogit::test_alpha(mo.result, mo.profile ? &*mo.profile : nullptr,
                                    mo.region.kind, alpha0, cfg.xi);
            entry["test"] = {{"alpha0", alpha0}, {"reject", t.reject}, {"statistic", t.statistic}};
        }
        json diag;
        diag["support1_size"] = mo.result.diagnostics.support1;
        diag["support2_size"] = mo.result.diagnostics.support2;
        if (m == hdlogit::Method::double_selection) {
            diag["union_size"] = mo.result.diagnostics.union_size;
            diag["degenerate_w_frac"] = mo.result.diagnostics.degenerate_w_frac;
        }
        if (m == hdlogit::Method::optimal_iv) {
            diag["boundary_hit"] = mo.result.diagnostics.boundary_hit;
            diag["search_interval"] = {mo.profile->lo, mo.profile->hi};
            diag["score_root"] = mo.profile->root;
        }
        diag["warnings"] = mo.result.diagnostics.warnings;
        entry["diagnostics"] = diag;
        methods.push_back(entry);
    }
    doc["methods"] = methods;
    if (out.one_step) doc["one_step"] = *out.one_step;
    if (!out.failures.empty()) {
        json fails;
        for (const auto& [m, why] : out.failures) fails[hdlogit::method_name(m)] = why;
        doc["failures"] = fails;
    }
    doc["config"] = {{"xi", cfg.xi},
                     {"h0_mode", cfg.h0_mode},
                     {"penalize_treatment", cfg.penalize_treatment},
                     {"penalty_rule",
                      cfg.penalty_rule == hdlogit::PenaltyRule::plug_in ? "plug-in" : "hoeffding"},
                     {"interval_constant", cfg.interval_constant},
                     {"grid_points", cfg.grid_points},
                     {"step2_mode", cfg.step2_mode == hdlogit::Step2Mode::post_lasso
                                        ? "post-lasso"
                                        : "lasso-only"},
                     {"intercept_added", !no_intercept}};

    const std::string text = doc.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_atomic(out_path, text);
    }
    // A run where every requested method failed is a failed run.
    return out.methods.empty() && !out.failures.empty() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Honest inference on a treatment coefficient in high-dimensional logistic regression"};
    app.require_subcommand(1);

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "Fit the estimators on a CSV dataset");
    std::string data_path, y_col = "y", d_col = "d", fit_out, methods_csv = "naive,optimal-iv,double-selection";
    std::string penalty_rule = "plug-in", step2_mode = "post-lasso";
    bool no_intercept = false, h0_mode = false, no_penalize_treatment = false;
    double xi = 0.05, interval_constant = 1.0, gamma = 0.05;
    double lambda1_override = -1.0, lambda2_override = -1.0, alpha0 = 0.0;
    int grid_points = 401;
    bool have_alpha0 = false;
    fit->add_option("--data", data_path, "CSV file with outcome, treatment, controls")->required();
    fit->add_option("--outcome", y_col, "outcome column name (binary)");
    fit->add_option("--treatment", d_col, "treatment column name");
    fit->add_option("--methods", methods_csv, "comma list of naive,optimal-iv,double-selection,one-step");
    fit->add_flag("--no-intercept", no_intercept, "do not prepend an all-ones intercept control");
    fit->add_flag("--h0-mode", h0_mode, "use unit weights in step 2 (testing alpha0 = 0)");
    fit->add_flag("--no-penalize-treatment", no_penalize_treatment, "leave d unpenalized in step 1");
    fit->add_option("--xi", xi, "test size / one minus coverage (default 0.05)");
    fit->add_option("--penalty", penalty_rule, "plug-in|hoeffding");
    fit->add_option("--gamma", gamma, "tail budget inside the penalty rule");
    fit->add_option("--lambda1", lambda1_override, "override step-1 penalty level");
    fit->add_option("--lambda2", lambda2_override, "override step-2 penalty level");
    fit->add_option("--interval-constant", interval_constant, "criterion search half-width is C/log n");
    fit->add_option("--grid-points", grid_points, "criterion grid size (default 401)");
    fit->add_option("--step2-mode", step2_mode, "post-lasso|lasso-only");
    auto* a0opt = fit->add_option("--alpha0", alpha0, "null value to test");
    fit->add_option("--out", fit_out, "write JSON here instead of stdout");

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "Monte Carlo at one design point");
    std::string design_str = "sparse", sim_out;
    int sim_n = 200, sim_p = 250, reps = 1000, threads = 0;
    double rho = 0.5, sim_alpha0 = 0.2, r2d = 0.75, r2y = 0.75;
    std::uint64_t seed = 0;
    std::string sim_methods = "naive,optimal-iv,double-selection";
    double sim_xi = 0.05, sim_C = 1.0;
    sim->add_option("--design", design_str, "sparse|quadratic");
    sim->add_option("--n", sim_n, "sample size");
    sim->add_option("--p", sim_p, "number of controls (intercept included)");
    sim->add_option("--alpha0", sim_alpha0, "true treatment coefficient");
    sim->add_option("--r2d", r2d, "signal share in the treatment equation");
    sim->add_option("--r2y", r2y, "signal share in the outcome equation");
    sim->add_option("--rho", rho, "AR(1) correlation of the controls");
    sim->add_option("--reps", reps, "replications");
    sim->add_option("--seed", seed, "master seed");
    sim->add_option("--threads", threads, "worker threads (0 = all cores)");
    sim->add_option("--methods", sim_methods, "comma list of methods");
    sim->add_option("--xi", sim_xi, "test size");
    sim->add_option("--interval-constant", sim_C, "criterion search half-width constant");
    sim->add_option("--out", sim_out, "write summary CSV here instead of stdout");

    // ---- grid ----
    auto* grid = app.add_subcommand("grid", "Monte Carlo over an (alpha0, R2d, R2y) grid");
    std::string grid_out, alpha0_list = "0", r2_list, r2_range, grid_design = "sparse";
    std::string grid_methods = "naive,optimal-iv,double-selection";
    int grid_n = 200, grid_p = 250, grid_reps = 1000, grid_threads = 0;
    double grid_rho = 0.5, grid_xi = 0.05, grid_C = 1.0;
    std::uint64_t grid_seed = 0;
    bool resume = false;
    grid->add_option("--design", grid_design, "sparse|quadratic");
    grid->add_option("--n", grid_n, "sample size");
    grid->add_option("--p", grid_p, "number of controls");
    grid->add_option("--rho", grid_rho, "AR(1) correlation");
    grid->add_option("--alpha0-list", alpha0_list, "comma list of true coefficients");
    grid->add_option("--r2-list", r2_list, "comma list of R2 values (both equations)");
    grid->add_option("--r2-grid", r2_range, "R2 range start:stop:step");
    grid->add_option("--reps", grid_reps, "replications per cell");
    grid->add_option("--seed", grid_seed, "master seed (cells derive their own)");
    grid->add_option("--threads", grid_threads, "worker threads");
    grid->add_option("--methods", grid_methods, "comma list of methods");
    grid->add_option("--xi", grid_xi, "test size");
    grid->add_option("--interval-constant", grid_C, "criterion search constant");
    grid->add_option("--out", grid_out, "output CSV")->required();
    grid->add_flag("--resume", resume, "skip cells with existing checkpoints");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (fit->parsed()) {
            hdlogit::AnalysisConfig cfg;
            cfg.methods = parse_methods(methods_csv);
            cfg.xi = xi;
            cfg.interval_constant = interval_constant;
            cfg.grid_points = grid_points;
            cfg.h0_mode = h0_mode;
            cfg.penalize_treatment = !no_penalize_treatment;
            cfg.gamma = gamma;
            cfg.lambda1_override = lambda1_override;
            cfg.lambda2_override = lambda2_override;
            if (penalty_rule == "hoeffding") {
                cfg.penalty_rule = hdlogit::PenaltyRule::hoeffding;
            } else if (penalty_rule != "plug-in") {
                throw hdlogit::InvalidInputError("unknown penalty rule '" + penalty_rule + "'");
            }
            if (step2_mode == "lasso-only") {
                cfg.step2_mode = hdlogit::Step2Mode::lasso_only;
            } else if (step2_mode != "post-lasso") {
                throw hdlogit::InvalidInputError("unknown step2 mode '" + step2_mode + "'");
            }
            have_alpha0 = a0opt->count() > 0;
            return cmd_fit(data_path, y_col, d_col, no_intercept, cfg, alpha0, have_alpha0, fit_out);
        }

        if (sim->parsed()) {
            hdlogit::McRequest req;
            req.dgp = hdlogit::make_dgp(hdlogit::design_from_name(design_str), sim_n, sim_p,
                                        sim_alpha0, rho, r2d, r2y);
            req.methods = parse_methods(sim_methods);
            req.reps = reps;
            req.xi = sim_xi;
            req.seed = seed;
            req.threads = threads;
            req.analysis.interval_constant = sim_C;
            const hdlogit::McSummary summary = hdlogit::run_monte_carlo(req);
            std::string csv = std::string(hdlogit::summary_csv_header()) + "\n" +
                              hdlogit::summary_csv_rows(summary);
            if (sim_out.empty()) {
                std::cout << csv;
            } else {
                write_atomic(sim_out, csv);
            }
            if (!summary.valid) {
                std::cerr << "warning: a method failed in more than 20% of replications; "
                             "summary flagged invalid\n";
            }
            return 0;
        }

        // grid
        hdlogit::GridRequest req;
        req.design = hdlogit::design_from_name(grid_design);
        req.n = grid_n;
        req.p = grid_p;
        req.rho = grid_rho;
        req.alpha0s = parse_double_list(alpha0_list);
        if (!r2_list.empty()) {
            req.r2s = parse_double_list(r2_list);
        } else if (!r2_range.empty()) {
            req.r2s = parse_range(r2_range);
        } else {
            throw hdlogit::InvalidInputError("grid: need --r2-list or --r2-grid");
        }
        req.methods = parse_methods(grid_methods);
        req.reps = grid_reps;
        req.xi = grid_xi;
        req.seed = grid_seed;
        req.threads = grid_threads;
        req.analysis.interval_constant = grid_C;

        const fs::path out_path(grid_out);
        const fs::path cells_dir = out_path.string() + ".cells";
        fs::create_directories(cells_dir);
        const auto cell_file = [&](int index) {
            char name[32];
            std::snprintf(name, sizeof(name), "cell_%05d.csv", index);
            return cells_dir / name;
        };

        const auto skip = [&](const hdlogit::GridCell& cell) {
            if (resume && fs::exists(cell_file(cell.index))) {
                std::cerr << "cell " << cell.index << ": checkpoint found, skipping\n";
                return true;
            }
            return false;
        };
        const auto done = [&](const hdlogit::GridCell& cell) {
            write_atomic(cell_file(cell.index), hdlogit::summary_csv_rows(cell.summary));
            std::cerr << "cell " << cell.index << " done (alpha0=" << cell.alpha0
                      << " r2d=" << cell.r2d << " r2y=" << cell.r2y << ")\n";
        };
        hdlogit::run_grid(req, skip, done);

        // Assemble: every cell (fresh or checkpointed) must be present.
        std::string all = std::string(hdlogit::summary_csv_header()) + "\n";
        const int total = static_cast<int>(req.alpha0s.size() * req.r2s.size() * req.r2s.size());
        for (int c = 0; c < total; ++c) {
            std::ifstream in(cell_file(c));
            if (!in) throw std::runtime_error("missing checkpoint for cell " + std::to_string(c));
            std::stringstream ss;
            ss << in.rdbuf();
            all += ss.str();
        }
        write_atomic(out_path, all);
        fs::remove_all(cells_dir);
        return 0;
    } catch (const hdlogit::InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
