#include "sae/resampling.hpp"

#include <string>

#include "sae/errors.hpp"

namespace sae {

BiasVarEstimate bootstrap_bias_var(const AreaDataset& data, const FitResult& fitted,
                                   const EstimatorSpec& spec, std::size_t B,
                                   const RandomStream& rng) {
    if (B < 2) throw std::invalid_argument("bootstrap needs B >= 2");
    const ParamVector& delta = fitted.delta_hat;
    if (!contains(ParamSpace{}, delta)) {
        throw std::domain_error("bootstrap generator parameter lies outside the parameter space");
    }
    if (delta.p() != data.p()) throw std::invalid_argument("beta length differs from dataset p");

    const std::size_t m = data.m();
    const std::size_t k = delta.k();
    const MomentGlsFitter fitter(data, spec);
    const VectorXd fixed = data.design_matrix() * delta.beta;
    const VectorXd D = data.sampling_variances();

    // Replicates are stored and reduced in index order.
    MatrixXd draws(k, B);
    BiasVarEstimate out;
    VectorXd y_star(m);
    for (std::size_t b = 0; b < B; ++b) {
        RandomStream stream = rng.child(b);
        for (std::size_t i = 0; i < m; ++i) {
            const double u = stream.normal(0.0, delta.sigma_u2);
            const double e = stream.normal(0.0, D(i));
            y_star(i) = fixed(i) + u + e;
        }
        const FitResult star = fitter.fit(y_star);
        if (!star.delta_hat.finite()) {
            throw NumericError("bootstrap replicate " + std::to_string(b) + " produced a nonfinite fit");
        }
        if (star.delta_hat.sigma_u2 == 0.0) ++out.n_degenerate;
        draws.col(b) = star.delta_hat.flatten();
    }

    const VectorXd mean = draws.rowwise().mean();
    const MatrixXd centered = draws.colwise() - mean;
    out.b_hat = mean - delta.flatten();
    out.V_hat = centered * centered.transpose() / static_cast<double>(B - 1);
    out.V_hat = 0.5 * (out.V_hat + out.V_hat.transpose()).eval();
    out.B = B;
    return out;
}

}  // namespace sae
