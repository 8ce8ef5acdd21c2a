#pragma once

#include <vector>

#include "sae/model.hpp"

namespace sae {

/// Which estimator of delta is in use. Only the moment + GLS pair ships.
struct EstimatorSpec {
    enum class Method { moment_gls };

    Method method = Method::moment_gls;
    double sigma_floor = 0.0;
};

struct FitResult {
    ParamVector delta_hat;
    bool sigma_truncated = false;  // raw moment estimate fell below the floor
    MatrixXd gls_cov_beta;         // (sum_i x_i x_i' / (sigma_u2 + D_i))^{-1}
};

/// Two-stage estimator for a fixed design (X, D):
///   1. OLS residuals e = y - X b_ols,
///   2. sigma_u2 = max{floor, [sum e_i^2 - sum D_i (1 - h_ii)] / (m - p)},
///   3. beta = GLS with weights 1 / (sigma_u2 + D_i).
/// Everything that depends on the design only is computed once, so repeated
/// fits against new responses (bootstrap, simulation) cost O(m p^2).
class MomentGlsFitter {
public:
    MomentGlsFitter(const MatrixXd& X, const VectorXd& D, EstimatorSpec spec = {});
    explicit MomentGlsFitter(const AreaDataset& data, EstimatorSpec spec = {});

    FitResult fit(const VectorXd& y) const;

    std::size_t m() const { return static_cast<std::size_t>(X_.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(X_.cols()); }
    const VectorXd& leverages() const { return leverage_; }

private:
    MatrixXd X_;
    VectorXd D_;
    EstimatorSpec spec_;
    MatrixXd ols_projector_;  // (X'X)^{-1} X'
    VectorXd leverage_;
    double leverage_adjust_ = 0.0;  // sum_i D_i (1 - h_ii)
};

FitResult fit(const AreaDataset& data, const EstimatorSpec& spec = {});

/// GLS coefficients and their covariance at a given sigma_u2.
/// When every sigma_u2 + D_i is zero the weights are taken as equal.
struct GlsSolution {
    VectorXd beta;
    MatrixXd cov_beta;
};
GlsSolution gls(const MatrixXd& X, const VectorXd& D, const VectorXd& y, double sigma_u2);

/// Delete-one-area refits; element u is fit(data.without(u)). Needs m >= p + 3.
std::vector<ParamVector> jackknife_fits(const AreaDataset& data, const EstimatorSpec& spec = {});

}  // namespace sae
