#include "sae/estimation.hpp"

#include <algorithm>
#include <string>

#include "sae/errors.hpp"

namespace sae {

namespace {

void check_spec(const EstimatorSpec& spec) {
    if (spec.method != EstimatorSpec::Method::moment_gls) {
        throw UnsupportedError("unknown estimator method");
    }
    if (!(spec.sigma_floor >= 0.0)) throw std::invalid_argument("sigma floor must be >= 0");
}

}  // namespace

GlsSolution gls(const MatrixXd& X, const VectorXd& D, const VectorXd& y, double sigma_u2) {
    const Eigen::Index m = X.rows();
    const Eigen::Index p = X.cols();

    VectorXd w(m);
    Eigen::Index zero_count = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double v = sigma_u2 + D(i);
        if (v == 0.0) ++zero_count;
        w(i) = v > 0.0 ? 1.0 / v : 0.0;
    }
    if (zero_count == m) {
        w.setOnes();
    } else if (zero_count > 0) {
        throw NumericError("GLS weights undefined: sigma_u2 + D_i = 0 for some but not all areas");
    }

    MatrixXd A = MatrixXd::Zero(p, p);
    VectorXd b = VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < m; ++i) {
        A.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), w(i));
        b.noalias() += w(i) * y(i) * X.row(i).transpose();
    }
    A.triangularView<Eigen::Upper>() = A.transpose();

    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw NumericError("singular weighted design matrix");
    GlsSolution out;
    out.beta = llt.solve(b);
    out.cov_beta = llt.solve(MatrixXd::Identity(p, p));
    return out;
}

MomentGlsFitter::MomentGlsFitter(const MatrixXd& X, const VectorXd& D, EstimatorSpec spec)
    : X_(X), D_(D), spec_(spec) {
    check_spec(spec_);
    const Eigen::Index m = X_.rows();
    const Eigen::Index p = X_.cols();
    if (D_.size() != m) throw std::invalid_argument("D length differs from number of areas");
    if (m <= p) {
        throw DataError("moment estimator needs m > p (m = " + std::to_string(m) +
                        ", p = " + std::to_string(p) + ")");
    }

    Eigen::ColPivHouseholderQR<MatrixXd> qr(X_);
    if (qr.rank() < p) throw NumericError("design matrix X is rank deficient");

    const MatrixXd xtx = X_.transpose() * X_;
    Eigen::LDLT<MatrixXd> ldlt(xtx);
    ols_projector_ = ldlt.solve(X_.transpose());
    leverage_ = (X_.array() * ols_projector_.transpose().array()).rowwise().sum();
    leverage_adjust_ = (D_.array() * (1.0 - leverage_.array())).sum();
}

MomentGlsFitter::MomentGlsFitter(const AreaDataset& data, EstimatorSpec spec)
    : MomentGlsFitter(data.design_matrix(), data.sampling_variances(), spec) {}

FitResult MomentGlsFitter::fit(const VectorXd& y) const {
    const double m = static_cast<double>(X_.rows());
    const double p = static_cast<double>(X_.cols());

    const VectorXd beta_ols = ols_projector_ * y;
    const double rss = (y - X_ * beta_ols).squaredNorm();
    const double raw = (rss - leverage_adjust_) / (m - p);

    FitResult out;
    out.sigma_truncated = raw < spec_.sigma_floor;
    out.delta_hat.sigma_u2 = std::max(spec_.sigma_floor, raw);

    GlsSolution g = gls(X_, D_, y, out.delta_hat.sigma_u2);
    out.delta_hat.beta = std::move(g.beta);
    out.gls_cov_beta = std::move(g.cov_beta);
    return out;
}

FitResult fit(const AreaDataset& data, const EstimatorSpec& spec) {
    return MomentGlsFitter(data, spec).fit(data.response());
}

std::vector<ParamVector> jackknife_fits(const AreaDataset& data, const EstimatorSpec& spec) {
    if (data.m() < data.p() + 3) {
        throw DataError("jackknife needs m >= p + 3 so every deleted dataset stays estimable");
    }
    std::vector<ParamVector> out;
    out.reserve(data.m());
    for (std::size_t u = 0; u < data.m(); ++u) {
        out.push_back(fit(data.without(u), spec).delta_hat);
    }
    return out;
}

}  // namespace sae
