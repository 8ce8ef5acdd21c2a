#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "sae/estimation.hpp"
#include "sae/model.hpp"

namespace sae {

/// Transformation h applied to the area mean before prediction.
enum class LinkFunction { identity, exp };

std::string_view to_string(LinkFunction link);
LinkFunction parse_link(std::string_view name);

struct MspeComponents {
    double m1 = 0.0;
    double m2 = 0.0;
};

/// Replicate count and seed for bootstrap approximations of M2.
struct BootstrapBudget {
    std::size_t replicates = 1000;
    std::uint64_t seed = 0;
};

/// gamma = sigma_u2 / (sigma_u2 + D), taken as 0 whenever sigma_u2 = 0.
double shrinkage(const ParamVector& delta, double D);

/// E(h(theta) | y) under the Gaussian model at delta.
double best_predictor(const ParamVector& delta, const AreaObservation& area, LinkFunction link);

/// Expected squared error of the best predictor, E(H(delta) - h(theta))^2.
double m1(const ParamVector& delta, const AreaObservation& area, LinkFunction link);

/// Identity-link pieces of the second-order MSPE approximation for area i.
/// g1 = M1, g2 = (1 - gamma)^2 x'(sum_j x_j x_j' / (sigma_u2 + D_j))^{-1} x,
/// g3 = D^2 (sigma_u2 + D)^{-3} (2/m^2) sum_j (sigma_u2 + D_j)^2.
struct PrasadRaoTerms {
    double g1 = 0.0;
    double g2 = 0.0;
    double g3 = 0.0;
};
std::vector<PrasadRaoTerms> prasad_rao_terms(const ParamVector& delta, const AreaDataset& data);

/// Contribution of parameter estimation to the MSPE, E(H(delta_hat) - H(delta))^2.
/// Identity link: g2 + g3. Exp link: parametric bootstrap, requires a budget.
double m2(const ParamVector& delta, const AreaDataset& data, std::size_t i, LinkFunction link,
          const EstimatorSpec& est, std::optional<BootstrapBudget> boot = std::nullopt);

/// m2 for every area at once; bootstrap draws are shared across areas and
/// replicate b uses RandomStream(seed).child(b), so entry i equals m2(..., i, ...).
VectorXd m2_all(const ParamVector& delta, const AreaDataset& data, LinkFunction link,
                const EstimatorSpec& est, std::optional<BootstrapBudget> boot = std::nullopt);

/// Bootstrap M2 against an arbitrary refit: responses are regenerated from
/// delta, `refit` maps them to delta*, and the mean of (H_i(delta*) - H_i(delta))^2
/// is taken with each observed y_i held fixed.
using Refit = std::function<ParamVector(const VectorXd& y)>;
VectorXd bootstrap_m2_all(const ParamVector& delta, const AreaDataset& data, LinkFunction link,
                          const BootstrapBudget& boot, const Refit& refit);

struct Derivatives {
    VectorXd gradient;
    MatrixXd hessian;
};

/// Central differences with step h_j = max(1e-5 |delta_j|, 1e-6). A coordinate
/// whose +-h step would leave `space` switches to a second-order one-sided
/// stencil (offsets 0, h, 2h). The Hessian is symmetrized.
Derivatives finite_diff(const std::function<double(const ParamVector&)>& f,
                        const ParamVector& delta, const ParamSpace& space = {});

/// Gradient / Hessian of M1 in the flattened (beta, sigma_u2) coordinates.
/// Identity link is analytic (right derivatives at sigma_u2 = 0); exp link
/// goes through finite_diff.
VectorXd grad_m1(const ParamVector& delta, const AreaObservation& area, LinkFunction link);
MatrixXd hess_m1(const ParamVector& delta, const AreaObservation& area, LinkFunction link);
Derivatives m1_derivatives(const ParamVector& delta, const AreaObservation& area,
                           LinkFunction link);

}  // namespace sae
