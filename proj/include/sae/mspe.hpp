#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sae/errors.hpp"
#include "sae/predictor.hpp"
#include "sae/resampling.hpp"

namespace sae {

enum class MspeMethod { naive, pr, jlw, tilted };

/// Names used on the command line and in output files: naive, pr, jlw, new.
std::string_view to_string(MspeMethod method);
MspeMethod parse_method(std::string_view name);

/// Weight on the diagonal second-order terms of the tilt correction.
/// `half` weights every (j, l) term by 1/2; `one` uses 1 on the diagonal
/// and 1/2 off it.
enum class DiagWeight { half, one };

std::string_view to_string(DiagWeight weight);
DiagWeight parse_diag_weight(std::string_view name);

/// Raised when every first partial of M1 vanishes, so no coordinate can
/// carry the tilt.
class ZeroGradientError : public NumericError {
public:
    using NumericError::NumericError;
};

struct TiltDiagnostics {
    std::size_t component = 0;  // 0-based flattened coordinate; printed 1-based
    double grad_value = 0.0;
    double threshold = 0.0;     // (1 + ln m)^{-2}
    bool used_preliminary = false;
    bool fell_outside_delta = false;
    bool below_threshold = false;
    bool zero_gradient = false;
};

struct AreaMspe {
    int area_id = 0;
    double value = 0.0;
    double m1_part = 0.0;
    double m2_part = 0.0;
    double bias_correction = 0.0;
    std::optional<TiltDiagnostics> tilt;
};

struct MspeBreakdown {
    MspeMethod method = MspeMethod::naive;
    std::vector<AreaMspe> areas;

    std::size_t negative_count() const;
};

// -------------------------------------------------------------------------
// Per-area estimators
// -------------------------------------------------------------------------

/// M1(delta_hat) + M2(delta_hat).
AreaMspe naive_mspe(const ParamVector& delta_hat, const AreaDataset& data, std::size_t i,
                    LinkFunction link, const EstimatorSpec& est,
                    std::optional<BootstrapBudget> boot = std::nullopt);

/// g1 + g2 + 2 g3; identity link only.
AreaMspe pr_mspe(const ParamVector& delta_hat, const AreaDataset& data, std::size_t i,
                 LinkFunction link, const EstimatorSpec& est);

/// M1(delta_hat) - Bias + M2(delta_hat) with the delete-one jackknife bias
/// ((m - 1)/m) sum_u [M1(delta_{-u}) - M1(delta_hat)]. Not clamped.
AreaMspe jlw_mspe(const ParamVector& delta_hat, std::span<const ParamVector> jack,
                  const AreaDataset& data, std::size_t i, LinkFunction link,
                  const EstimatorSpec& est, std::optional<BootstrapBudget> boot = std::nullopt);

/// argmax_j |grad(j)|, smallest index on ties.
std::size_t tilt_component(const VectorXd& grad);

/// delta_hat shifted in coordinate l only, by
/// -[grad'b + w(H, V)] / grad(l), where w(H, V) is the weighted H:V sum.
ParamVector preliminary_tilt(const ParamVector& delta_hat, const VectorXd& grad,
                             const MatrixXd& hess, const BiasVarEstimate& bv, std::size_t l,
                             DiagWeight weight = DiagWeight::half);

struct TiltResult {
    ParamVector delta_tilde;
    TiltDiagnostics diagnostics;
};

/// Keeps delta_bar when it lies in `space` and |grad_l| >= (1 + ln m)^{-2};
/// otherwise falls back to delta_hat.
TiltResult tilted_estimator(const ParamVector& delta_bar, const ParamVector& delta_hat,
                            const ParamSpace& space, double grad_l, std::size_t m);

struct TiltOptions {
    ParamSpace space;
    DiagWeight diag_weight = DiagWeight::half;
};

/// M1(delta_tilde) + M2(delta_hat); nonnegative for every input.
AreaMspe new_mspe(const AreaDataset& data, std::size_t i, const ParamVector& delta_hat,
                  const BiasVarEstimate& bv, LinkFunction link, const EstimatorSpec& est,
                  const TiltOptions& options = {},
                  std::optional<BootstrapBudget> boot = std::nullopt);

// -------------------------------------------------------------------------
// Whole-dataset evaluation
// -------------------------------------------------------------------------

/// Everything a batch evaluation may need. `bv` is required for the tilted
/// method, `jack` for jlw (computed on demand when absent), `m2_boot` for the
/// exp link.
struct MspeInputs {
    LinkFunction link = LinkFunction::identity;
    EstimatorSpec est;
    TiltOptions tilt;
    std::optional<BiasVarEstimate> bv;
    std::optional<std::vector<ParamVector>> jack;
    std::optional<BootstrapBudget> m2_boot;
};

/// Evaluates one method for every area. M2 is computed once and shared.
MspeBreakdown compute_mspe(MspeMethod method, const AreaDataset& data,
                           const ParamVector& delta_hat, const MspeInputs& inputs);

/// Several methods over one dataset, sharing M2 and the jackknife refits.
std::vector<MspeBreakdown> compute_mspe(std::span<const MspeMethod> methods,
                                        const AreaDataset& data, const ParamVector& delta_hat,
                                        const MspeInputs& inputs);

}  // namespace sae
