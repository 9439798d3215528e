#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hdlogit/analyze.hpp"
#include "hdlogit/dgp.hpp"

namespace hdlogit {

struct MethodMetrics {
    double bias = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double rp = std::numeric_limits<double>::quiet_NaN();  // rejection of H0: alpha = alpha0
    double failure_rate = 0.0;
    int n_success = 0;
    double se_bias = 0.0, se_variance = 0.0, se_rmse = 0.0, se_rp = 0.0;
    bool mc_se_defined = false;  // needs at least 2 successful replications
};

// Per-replication record, kept when collect_details is on (and used
// internally for aggregation).  Slots are parallel to the request's method
// list; NaN alpha marks a failed replication for that method.
struct RepDetail {
    std::vector<double> alpha;
    std::vector<unsigned char> ok;
    std::vector<unsigned char> reject;
    double n_ln_alpha0 = std::numeric_limits<double>::quiet_NaN();  // optimal-iv criterion at truth
    bool cr_i_reject = false;
    bool cr_i_empty = false;
    std::string error;  // first failure message, for diagnostics
};

struct McRequest {
    DgpSpec dgp;
    std::vector<Method> methods = {Method::naive, Method::optimal_iv, Method::double_selection};
    int reps = 1000;
    double xi = 0.05;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency; capped by HDLOGIT_THREADS
    bool collect_details = false;
    AnalysisConfig analysis;  // methods/xi fields are overridden per request
};

struct McSummary {
    std::string design;
    int n = 0, p = 0;
    double alpha0 = 0.0, rho = 0.0, r2d = 0.0, r2y = 0.0;
    int reps = 0;
    double xi = 0.05;
    std::uint64_t seed = 0;
    std::vector<std::pair<Method, MethodMetrics>> metrics;  // request order
    bool valid = true;  // false once any method fails in > 20% of replications
    std::vector<RepDetail> details;
};

namespace detail {

inline int resolve_threads(int requested, int reps) {
    int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (t < 1) t = 1;
    if (const char* cap = std::getenv("HDLOGIT_THREADS")) {
        int c = 0;
        const auto [ptr, ec] = std::from_chars(cap, cap + std::strlen(cap), c);
        if (ec == std::errc() && c > 0) t = std::min(t, c);
    }
    return std::min(t, std::max(reps, 1));
}

}  // namespace detail

// Run `reps` independent replications of the design and aggregate per-method
// moments and rejection rates.  Replication r always draws from stream
// (seed, r) and records are aggregated in replication order, so the summary
// is bit-identical for any thread count.
inline McSummary run_monte_carlo(const McRequest& request) {
    if (request.reps < 1) throw InvalidInputError("run_monte_carlo: need reps >= 1");
    const int reps = request.reps;
    const std::vector<Method>& methods = request.methods;
    const std::size_t nm = methods.size();

    AnalysisConfig cfg = request.analysis;
    cfg.methods = methods;
    cfg.xi = request.xi;

    std::vector<RepDetail> records(reps);
    std::atomic<int> next{0};
    std::mutex fatal_mutex;
    std::exception_ptr fatal;

    const bool want_cr_i = std::find(methods.begin(), methods.end(), Method::optimal_iv) != methods.end();

    auto worker = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= reps) return;
            try {
                RngStream rng(request.seed, static_cast<std::uint64_t>(r));
                const Dataset data = draw_dataset(request.dgp, rng);
                const AnalysisOutput out = analyze(data, cfg);

                RepDetail& rec = records[r];
                rec.alpha.assign(nm, std::numeric_limits<double>::quiet_NaN());
                rec.ok.assign(nm, 0);
                rec.reject.assign(nm, 0);
                for (std::size_t k = 0; k < nm; ++k) {
                    const Method m = methods[k];
                    const auto it = out.methods.find(m);
                    if (it == out.methods.end()) {
                        const auto fit = out.failures.find(m);
                        if (rec.error.empty() && fit != out.failures.end()) rec.error = fit->second;
                        continue;
                    }
                    rec.ok[k] = 1;
                    rec.alpha[k] = it->second.result.alpha_check;
                    rec.reject[k] = it->second.region.covers(request.dgp.alpha0) ? 0 : 1;
                    if (m == Method::optimal_iv && want_cr_i) {
                        rec.n_ln_alpha0 = static_cast<double>(it->second.result.n_used) *
                                          it->second.profile->ln(request.dgp.alpha0);
                        rec.cr_i_empty = it->second.region_cr_i->empty_warning;
                        rec.cr_i_reject = !it->second.region_cr_i->covers(request.dgp.alpha0);
                    }
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
                return;
            }
        }
    };

    const int nthreads = detail::resolve_threads(request.threads, reps);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    McSummary summary;
    summary.design = design_name(request.dgp.design);
    summary.n = static_cast<int>(request.dgp.n);
    summary.p = static_cast<int>(request.dgp.p);
    summary.alpha0 = request.dgp.alpha0;
    summary.rho = request.dgp.rho;
    summary.r2d = request.dgp.r2d;
    summary.r2y = request.dgp.r2y;
    summary.reps = reps;
    summary.xi = request.xi;
    summary.seed = request.seed;

    for (std::size_t k = 0; k < nm; ++k) {
        MethodMetrics mm;
        // First pass: successes, mean, rejections (in replication order).
        double sum = 0.0;
        int n_ok = 0, n_reject = 0;
        for (int r = 0; r < reps; ++r) {
            if (!records[r].ok.empty() && records[r].ok[k]) {
                sum += records[r].alpha[k];
                n_reject += records[r].reject[k];
                ++n_ok;
            }
        }
        mm.n_success = n_ok;
        mm.failure_rate = static_cast<double>(reps - n_ok) / static_cast<double>(reps);
        if (mm.failure_rate > 0.20) summary.valid = false;
        if (n_ok > 0) {
            const double mean = sum / n_ok;
            mm.bias = mean - request.dgp.alpha0;
            double m2 = 0.0, m4 = 0.0, mse_sum = 0.0, mse_sq_sum = 0.0;
            for (int r = 0; r < reps; ++r) {
                if (records[r].ok.empty() || !records[r].ok[k]) continue;
                const double dev = records[r].alpha[k] - mean;
                m2 += dev * dev;
                m4 += dev * dev * dev * dev;
                const double err = records[r].alpha[k] - request.dgp.alpha0;
                mse_sum += err * err;
                mse_sq_sum += err * err * err * err;
            }
            m2 /= n_ok;
            m4 /= n_ok;
            mm.variance = m2;
            mm.rmse = std::sqrt(mm.bias * mm.bias + mm.variance);
            mm.rp = static_cast<double>(n_reject) / n_ok;
            if (n_ok > 1) {
                mm.mc_se_defined = true;
                mm.se_bias = std::sqrt(m2 / n_ok);
                mm.se_variance = std::sqrt(std::max(0.0, m4 - m2 * m2) / n_ok);
                const double mse = mse_sum / n_ok;
                const double var_mse = std::max(0.0, mse_sq_sum / n_ok - mse * mse);
                mm.se_rmse = mm.rmse > 0.0 ? std::sqrt(var_mse / n_ok) / (2.0 * mm.rmse) : 0.0;
                mm.se_rp = std::sqrt(mm.rp * (1.0 - mm.rp) / n_ok);
            }
        }
        summary.metrics.emplace_back(methods[k], mm);
    }

    if (request.collect_details) summary.details = std::move(records);
    return summary;
}

// ---- results serialization ----------------------------------------------

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline const char* summary_csv_header() {
    return "design,n,p,alpha0,r2d,r2y,method,reps,bias,variance,rmse,rp,failure_rate,seed";
}

// One CSV row per method, in request order.
inline std::string summary_csv_rows(const McSummary& s) {
    std::ostringstream os;
    for (const auto& [method, mm] : s.metrics) {
        os << s.design << ',' << s.n << ',' << s.p << ',' << format_double(s.alpha0) << ','
           << format_double(s.r2d) << ',' << format_double(s.r2y) << ',' << method_name(method)
           << ',' << s.reps << ',' << format_double(mm.bias) << ',' << format_double(mm.variance)
           << ',' << format_double(mm.rmse) << ',' << format_double(mm.rp) << ','
           << format_double(mm.failure_rate) << ',' << s.seed << '\n';
    }
    return os.str();
}

// ---- design grids ---------------------------------------------------------

struct GridRequest {
    Design design = Design::sparse_decline;
    Eigen::Index n = 200, p = 250;
    double rho = 0.5;
    std::vector<double> alpha0s = {0.0};
    std::vector<double> r2s = {0.0};  // cells are the r2d x r2y product grid
    std::vector<Method> methods = {Method::naive, Method::optimal_iv, Method::double_selection};
    int reps = 1000;
    double xi = 0.05;
    std::uint64_t seed = 0;
    int threads = 0;
    AnalysisConfig analysis;
};

struct GridCell {
    int index = 0;
    double alpha0 = 0.0, r2d = 0.0, r2y = 0.0;
    McSummary summary;
};

// Deterministic cell order: alpha0 (outer), r2d, r2y (inner).  Each cell
// gets an independent seed derived from (master seed, cell index); `skip`
// lets a caller resume a partial run, `done` is invoked after each cell.
inline std::vector<GridCell> run_grid(
    const GridRequest& request,
    const std::function<bool(const GridCell&)>& skip = nullptr,
    const std::function<void(const GridCell&)>& done = nullptr) {
    std::vector<GridCell> cells;
    int index = 0;
    for (double alpha0 : request.alpha0s) {
        for (double r2d : request.r2s) {
            for (double r2y : request.r2s) {
                GridCell cell;
                cell.index = index++;
                cell.alpha0 = alpha0;
                cell.r2d = r2d;
                cell.r2y = r2y;
                if (skip && skip(cell)) continue;

                McRequest mc;
                mc.dgp = make_dgp(request.design, request.n, request.p, alpha0, request.rho, r2d, r2y);
                mc.methods = request.methods;
                mc.reps = request.reps;
                mc.xi = request.xi;
                mc.seed = mix_seed(request.seed, static_cast<std::uint64_t>(cell.index));
                mc.threads = request.threads;
                mc.analysis = request.analysis;
                cell.summary = run_monte_carlo(mc);
                if (done) done(cell);
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

}  // namespace hdlogit
