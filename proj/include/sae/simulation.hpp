#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sae/mspe.hpp"

namespace sae {

/// Monte Carlo design for the area-level model y_i = beta0 + beta1 X_i + u_i + e_i
/// with D_i = sigma_e2 / n_i. Defaults reproduce the twelve-county corn
/// setting; n_list and x_list are stand-ins since the original per-county
/// counts and pixel averages are not reproduced here.
struct SimulationConfig {
    double beta0 = 43.0;
    double beta1 = 0.25;
    double sigma_u2 = 140.0;
    double sigma_e2 = 147.0;
    std::vector<int> n_list = {1, 1, 1, 2, 3, 3, 3, 3, 4, 5, 5, 6};
    std::vector<double> x_list = default_x_list();
    std::size_t R = 2000;
    std::size_t B = kDefaultBootstrapReplicates;
    std::uint64_t seed = 20240607;
    std::vector<MspeMethod> methods = {MspeMethod::pr, MspeMethod::jlw, MspeMethod::tilted};
    std::size_t design_replication = 1;
    DiagWeight tilt_diag_weight = DiagWeight::half;

    /// Twelve equally spaced covariate values on [150, 460].
    static std::vector<double> default_x_list();

    void validate() const;
    std::size_t m() const { return n_list.size() * design_replication; }
    ParamVector true_parameters() const;
    std::vector<AreaDesign> design() const;
};

struct SixNumberSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Order-statistic summary; the p-quantile sits at 1-based position
/// 1 + (m - 1) p with linear interpolation.
SixNumberSummary summarize(std::span<const double> values);

struct MethodSummary {
    std::string name;
    VectorXd mean_estimate;  // per area, mean over replicates
    VectorXd rb;
    VectorXd cv;
    SixNumberSummary rb_summary;
    SixNumberSummary cv_summary;
    std::size_t negative_count = 0;
    double min_estimate = 0.0;
    std::optional<double> tilt_fallback_rate;  // tilted method only
    std::optional<double> tilt_fallback_se;    // from per-replicate fallback fractions
};

/// Per-replicate values, kept only when requested. Row r*m + i holds
/// replicate r, area i.
struct RawRecords {
    std::vector<std::string> method_names;
    MatrixXd theta_true;  // R x m
    MatrixXd theta_hat;   // R x m
    std::vector<MatrixXd> estimates;  // per method, R x m
};

struct SimulationSummary {
    SimulationConfig config;
    VectorXd smspe;
    std::vector<MethodSummary> methods;
    std::size_t sigma_truncations = 0;  // replicates with sigma_hat^2 = 0
    std::optional<RawRecords> raw;

    const MethodSummary& method(std::string_view name) const;
};

struct SimulationOptions {
    std::size_t threads = 0;    // 0: SAE_MSPE_THREADS or hardware concurrency
    bool keep_raw = false;
    bool oracle_method = false; // adds "oracle", which reports SMSPE itself
};

/// Worker count from SAE_MSPE_THREADS, falling back to hardware concurrency.
std::size_t default_thread_count();

/// Relative bias and CV of per-replicate estimates (R x m) against SMSPE.
/// Throws NumericError naming the area when SMSPE_i is not positive.
void relative_metrics(const MatrixXd& estimates, const VectorXd& smspe,
                      std::span<const int> area_ids, VectorXd& rb, VectorXd& cv);

SimulationSummary run_simulation(const SimulationConfig& cfg, const SimulationOptions& options = {});

}  // namespace sae
