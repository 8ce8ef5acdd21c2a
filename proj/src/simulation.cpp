#include "sae/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "sae/errors.hpp"

namespace sae {

namespace {

// Runs fn(i) for i in [0, n). If any call throws, the exception from the
// smallest failing index is rethrown so errors do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr failure;

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

[[noreturn]] void rethrow_with_replicate(std::size_t r) {
    const std::string prefix = "replicate " + std::to_string(r) + ": ";
    try {
        throw;
    } catch (const NumericError& e) {
        throw NumericError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const std::exception& e) {
        throw NumericError(prefix + e.what());
    }
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);  // 0-based
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct ReplicateData {
    SimulatedDataset sim;
    FitResult fit;
};

}  // namespace

// -------------------------------------------------------------------------
// SimulationConfig
// -------------------------------------------------------------------------

std::vector<double> SimulationConfig::default_x_list() {
    std::vector<double> x(12);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 150.0 + (460.0 - 150.0) * i / 11.0;
    return x;
}

void SimulationConfig::validate() const {
    auto fail = [](const std::string& msg) { throw DataError("invalid simulation config: " + msg); };
    if (!std::isfinite(beta0) || !std::isfinite(beta1)) fail("beta0/beta1 must be finite");
    if (!(sigma_u2 >= 0.0) || !std::isfinite(sigma_u2)) fail("sigma_u2 must be finite and >= 0");
    if (!(sigma_e2 >= 0.0) || !std::isfinite(sigma_e2)) fail("sigma_e2 must be finite and >= 0");
    if (n_list.empty()) fail("n_list is empty");
    if (n_list.size() != x_list.size()) fail("n_list and x_list lengths differ");
    for (int n : n_list) {
        if (n <= 0) fail("n_list entries must be positive");
    }
    for (double x : x_list) {
        if (!std::isfinite(x)) fail("x_list entries must be finite");
    }
    if (R < 2) fail("R must be >= 2");
    if (design_replication < 1) fail("design_replication must be >= 1");
    if (methods.empty()) fail("methods is empty");
    const bool tilted = std::find(methods.begin(), methods.end(), MspeMethod::tilted) != methods.end();
    if (tilted && B < 2) fail("B must be >= 2 when the new method is requested");
    if (m() < 4) fail("need at least 4 areas (intercept + slope, jackknife)");
}

ParamVector SimulationConfig::true_parameters() const {
    ParamVector d;
    d.beta = VectorXd(2);
    d.beta << beta0, beta1;
    d.sigma_u2 = sigma_u2;
    return d;
}

std::vector<AreaDesign> SimulationConfig::design() const {
    std::vector<AreaDesign> out;
    out.reserve(m());
    for (std::size_t r = 0; r < design_replication; ++r) {
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            AreaDesign a;
            a.x = VectorXd(2);
            a.x << 1.0, x_list[i];
            a.n = n_list[i];
            a.D = sigma_e2 / n_list[i];
            out.push_back(std::move(a));
        }
    }
    return out;
}

// -------------------------------------------------------------------------
// Summaries
// -------------------------------------------------------------------------

SixNumberSummary summarize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    SixNumberSummary s;
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

void relative_metrics(const MatrixXd& estimates, const VectorXd& smspe,
                      std::span<const int> area_ids, VectorXd& rb, VectorXd& cv) {
    const Eigen::Index R = estimates.rows();
    const Eigen::Index m = estimates.cols();
    rb.resize(m);
    cv.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(smspe(i) > 0.0)) {
            throw NumericError("degenerate SMSPE (" + std::to_string(smspe(i)) + ") for area " +
                               std::to_string(area_ids[i]) + ": relative bias and CV are undefined");
        }
        double sum = 0.0;
        double sq = 0.0;
        for (Eigen::Index r = 0; r < R; ++r) {
            const double v = estimates(r, i);
            sum += v;
            sq += (v - smspe(i)) * (v - smspe(i));
        }
        rb(i) = (sum / R - smspe(i)) / smspe(i);
        cv(i) = std::sqrt(sq / R) / smspe(i);
    }
}

const MethodSummary& SimulationSummary::method(std::string_view name) const {
    for (const auto& s : methods) {
        if (s.name == name) return s;
    }
    throw std::out_of_range("method '" + std::string(name) + "' not in summary");
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("SAE_MSPE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// -------------------------------------------------------------------------
// Driver
// -------------------------------------------------------------------------

SimulationSummary run_simulation(const SimulationConfig& cfg, const SimulationOptions& options) {
    cfg.validate();

    const std::size_t R = cfg.R;
    const std::size_t m = cfg.m();
    const std::size_t threads = options.threads > 0 ? options.threads : default_thread_count();
    const ParamVector truth = cfg.true_parameters();
    const std::vector<AreaDesign> design = cfg.design();
    const EstimatorSpec est;
    const RandomStream root(cfg.seed);

    // Replicate r draws its data from root.child(r).child(0) and its
    // bootstrap from root.child(r).child(1), so regenerating is exact.
    auto replicate = [&](std::size_t r) {
        RandomStream data_stream = root.child(r).child(0);
        SimulatedDataset sim = simulate_dataset(truth, design, data_stream);
        FitResult fitted = fit(sim.data, est);
        return ReplicateData{std::move(sim), std::move(fitted)};
    };

    // Pass 1: truth and EBP for SMSPE.
    MatrixXd theta(R, m);
    MatrixXd theta_hat(R, m);
    std::vector<char> truncated(R, 0);
    parallel_for(R, threads, [&](std::size_t r) {
        try {
            const ReplicateData rep = replicate(r);
            truncated[r] = rep.fit.delta_hat.sigma_u2 == 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                theta(r, i) = rep.sim.theta(i);
                theta_hat(r, i) = best_predictor(rep.fit.delta_hat, rep.sim.data[i], LinkFunction::identity);
            }
        } catch (...) {
            rethrow_with_replicate(r);
        }
    });

    SimulationSummary summary;
    summary.config = cfg;
    summary.smspe = VectorXd::Zero(m);
    for (std::size_t r = 0; r < R; ++r) {
        summary.sigma_truncations += truncated[r] ? 1 : 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double err = theta_hat(r, i) - theta(r, i);
            summary.smspe(i) += err * err;
        }
    }
    summary.smspe /= static_cast<double>(R);

    std::vector<int> area_ids(m);
    for (std::size_t i = 0; i < m; ++i) area_ids[i] = static_cast<int>(i) + 1;
    for (std::size_t i = 0; i < m; ++i) {
        if (!(summary.smspe(i) > 0.0)) {
            throw NumericError("degenerate SMSPE (" + std::to_string(summary.smspe(i)) + ") for area " +
                               std::to_string(area_ids[i]) + ": relative bias and CV are undefined");
        }
    }

    // Pass 2: MSPE estimators.
    const auto& methods = cfg.methods;
    const bool tilted =
        std::find(methods.begin(), methods.end(), MspeMethod::tilted) != methods.end();
    std::vector<MatrixXd> estimates(methods.size(), MatrixXd(R, m));
    std::vector<std::size_t> fallbacks(R, 0);

    MspeInputs base_inputs;
    base_inputs.est = est;
    base_inputs.tilt.diag_weight = cfg.tilt_diag_weight;

    parallel_for(R, threads, [&](std::size_t r) {
        try {
            const ReplicateData rep = replicate(r);
            MspeInputs inputs = base_inputs;
            if (tilted) {
                inputs.bv = bootstrap_bias_var(rep.sim.data, rep.fit, est, cfg.B, root.child(r).child(1));
            }
            const auto breakdowns = compute_mspe(methods, rep.sim.data, rep.fit.delta_hat, inputs);
            for (std::size_t k = 0; k < methods.size(); ++k) {
                for (std::size_t i = 0; i < m; ++i) {
                    const AreaMspe& a = breakdowns[k].areas[i];
                    estimates[k](r, i) = a.value;
                    if (a.tilt && !a.tilt->used_preliminary) ++fallbacks[r];
                }
            }
        } catch (...) {
            rethrow_with_replicate(r);
        }
    });

    for (std::size_t k = 0; k < methods.size(); ++k) {
        MethodSummary s;
        s.name = std::string(to_string(methods[k]));
        s.mean_estimate = estimates[k].colwise().mean().transpose();
        relative_metrics(estimates[k], summary.smspe, area_ids, s.rb, s.cv);
        s.rb_summary = summarize(std::span<const double>(s.rb.data(), m));
        s.cv_summary = summarize(std::span<const double>(s.cv.data(), m));
        s.min_estimate = estimates[k].minCoeff();
        s.negative_count = static_cast<std::size_t>((estimates[k].array() < 0.0).count());
        if (methods[k] == MspeMethod::tilted) {
            std::size_t total = 0;
            for (std::size_t f : fallbacks) total += f;
            const double rate = static_cast<double>(total) / static_cast<double>(R * m);
            double ss = 0.0;
            for (std::size_t f : fallbacks) {
                const double dev = static_cast<double>(f) / static_cast<double>(m) - rate;
                ss += dev * dev;
            }
            s.tilt_fallback_rate = rate;
            s.tilt_fallback_se = std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R));
        }
        summary.methods.push_back(std::move(s));
    }

    if (options.oracle_method) {
        MatrixXd oracle = summary.smspe.transpose().replicate(static_cast<Eigen::Index>(R), 1);
        MethodSummary s;
        s.name = "oracle";
        s.mean_estimate = summary.smspe;
        relative_metrics(oracle, summary.smspe, area_ids, s.rb, s.cv);
        s.rb_summary = summarize(std::span<const double>(s.rb.data(), m));
        s.cv_summary = summarize(std::span<const double>(s.cv.data(), m));
        s.min_estimate = oracle.minCoeff();
        summary.methods.push_back(std::move(s));
        estimates.push_back(std::move(oracle));
    }

    if (options.keep_raw) {
        RawRecords raw;
        for (const auto& s : summary.methods) raw.method_names.push_back(s.name);
        raw.theta_true = std::move(theta);
        raw.theta_hat = std::move(theta_hat);
        raw.estimates = std::move(estimates);
        summary.raw = std::move(raw);
    }
    return summary;
}

}  // namespace sae
