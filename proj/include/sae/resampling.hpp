#pragma once

#include <cstddef>

#include "sae/estimation.hpp"
#include "sae/model.hpp"
#include "sae/random.hpp"

namespace sae {

inline constexpr std::size_t kDefaultBootstrapReplicates = 1000;

/// Parametric-bootstrap bias and variance of delta_hat in flattened
/// (beta, sigma_u2) coordinates.
struct BiasVarEstimate {
    VectorXd b_hat;
    MatrixXd V_hat;
    std::size_t B = 0;
    std::size_t n_degenerate = 0;  // refits with sigma_u2* = 0
};

/// Regenerates y* = x'beta_hat + u* + e* with u* ~ N(0, sigma_hat^2),
/// e* ~ N(0, D_i), refits with the same estimator, and returns
/// b_hat = mean(delta*) - delta_hat and the (B - 1)-denominator sample
/// covariance of delta*. Replicate b draws from rng.child(b).
BiasVarEstimate bootstrap_bias_var(const AreaDataset& data, const FitResult& fitted,
                                   const EstimatorSpec& spec, std::size_t B,
                                   const RandomStream& rng);

}  // namespace sae
