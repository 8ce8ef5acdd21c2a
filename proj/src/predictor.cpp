#include "sae/predictor.hpp"

#include <array>
#include <cmath>
#include <string>

#include "sae/errors.hpp"
#include "sae/random.hpp"

namespace sae {

namespace {

void require_valid(const ParamVector& delta) {
    if (!delta.finite()) throw std::domain_error("parameter vector is not finite");
    if (delta.sigma_u2 < 0.0) throw std::domain_error("sigma_u2 must be >= 0");
}

void require_dims(const ParamVector& delta, const AreaObservation& area) {
    if (static_cast<std::size_t>(area.x.size()) != delta.p()) {
        throw std::invalid_argument("covariate length differs from beta length");
    }
}

// Offsets and weights (already scaled by 1/h or 1/h^2) of a 1-D stencil.
struct Stencil {
    std::array<double, 3> offsets{};
    std::array<double, 3> weights{};
    int size = 0;
};

}  // namespace

std::string_view to_string(LinkFunction link) {
    return link == LinkFunction::identity ? "identity" : "exp";
}

LinkFunction parse_link(std::string_view name) {
    if (name == "identity") return LinkFunction::identity;
    if (name == "exp") return LinkFunction::exp;
    throw std::invalid_argument("unknown link function '" + std::string(name) + "'");
}

double shrinkage(const ParamVector& delta, double D) {
    if (!(D >= 0.0)) throw std::invalid_argument("sampling variance D must be >= 0");
    if (!std::isfinite(delta.sigma_u2) || delta.sigma_u2 < 0.0) {
        throw std::domain_error("sigma_u2 must be finite and >= 0");
    }
    if (delta.sigma_u2 == 0.0) return 0.0;
    return delta.sigma_u2 / (delta.sigma_u2 + D);
}

double best_predictor(const ParamVector& delta, const AreaObservation& area, LinkFunction link) {
    require_valid(delta);
    require_dims(delta, area);
    const double gamma = shrinkage(delta, area.D);
    const double fixed = area.x.dot(delta.beta);
    const double mean = fixed + gamma * (area.y - fixed);
    if (link == LinkFunction::identity) return mean;
    const double var = gamma * area.D;
    return std::exp(mean + 0.5 * var);
}

double m1(const ParamVector& delta, const AreaObservation& area, LinkFunction link) {
    require_valid(delta);
    require_dims(delta, area);
    const double gamma = shrinkage(delta, area.D);
    const double v = gamma * area.D;
    if (link == LinkFunction::identity) return v;
    // E_y Var(e^theta | y): theta | y ~ N(mu, v), mu - x'beta ~ N(0, gamma sigma_u2)
    const double fixed = area.x.dot(delta.beta);
    return std::exp(v) * std::expm1(v) * std::exp(2.0 * fixed + 2.0 * gamma * delta.sigma_u2);
}

// -------------------------------------------------------------------------
// M2
// -------------------------------------------------------------------------

std::vector<PrasadRaoTerms> prasad_rao_terms(const ParamVector& delta, const AreaDataset& data) {
    require_valid(delta);
    if (delta.p() != data.p()) throw std::invalid_argument("beta length differs from dataset p");

    const MatrixXd X = data.design_matrix();
    const VectorXd D = data.sampling_variances();
    const double m = static_cast<double>(data.m());
    const double s = delta.sigma_u2;

    const GlsSolution g = gls(X, D, data.response(), s);
    const double spread = (s + D.array()).square().sum() * 2.0 / (m * m);

    std::vector<PrasadRaoTerms> out(data.m());
    for (std::size_t i = 0; i < data.m(); ++i) {
        const double gamma = shrinkage(delta, D(i));
        const VectorXd xi = X.row(i).transpose();
        const double total = s + D(i);
        out[i].g1 = gamma * D(i);
        out[i].g2 = (1.0 - gamma) * (1.0 - gamma) * xi.dot(g.cov_beta * xi);
        out[i].g3 = total > 0.0 ? D(i) * D(i) / (total * total * total) * spread : 0.0;
    }
    return out;
}

VectorXd bootstrap_m2_all(const ParamVector& delta, const AreaDataset& data, LinkFunction link,
                          const BootstrapBudget& boot, const Refit& refit) {
    require_valid(delta);
    if (boot.replicates < 1) throw std::invalid_argument("bootstrap budget must be positive");

    const std::size_t m = data.m();
    const MatrixXd X = data.design_matrix();
    const VectorXd D = data.sampling_variances();
    const VectorXd fixed = X * delta.beta;

    VectorXd base(m);
    for (std::size_t i = 0; i < m; ++i) base(i) = best_predictor(delta, data[i], link);

    const RandomStream root(boot.seed);
    VectorXd acc = VectorXd::Zero(m);
    VectorXd y_star(m);
    for (std::size_t b = 0; b < boot.replicates; ++b) {
        RandomStream rng = root.child(b);
        for (std::size_t j = 0; j < m; ++j) {
            const double theta = rng.normal(fixed(j), delta.sigma_u2);
            y_star(j) = rng.normal(theta, D(j));
        }
        const ParamVector star = refit(y_star);
        for (std::size_t i = 0; i < m; ++i) {
            const double diff = best_predictor(star, data[i], link) - base(i);
            acc(i) += diff * diff;
        }
    }
    return acc / static_cast<double>(boot.replicates);
}

VectorXd m2_all(const ParamVector& delta, const AreaDataset& data, LinkFunction link,
                const EstimatorSpec& est, std::optional<BootstrapBudget> boot) {
    if (link == LinkFunction::identity) {
        const auto terms = prasad_rao_terms(delta, data);
        VectorXd out(data.m());
        for (std::size_t i = 0; i < data.m(); ++i) out(i) = terms[i].g2 + terms[i].g3;
        return out;
    }
    if (!boot) throw std::invalid_argument("exp-link M2 needs a bootstrap budget");
    const MomentGlsFitter fitter(data, est);
    return bootstrap_m2_all(delta, data, link, *boot,
                            [&fitter](const VectorXd& y) { return fitter.fit(y).delta_hat; });
}

double m2(const ParamVector& delta, const AreaDataset& data, std::size_t i, LinkFunction link,
          const EstimatorSpec& est, std::optional<BootstrapBudget> boot) {
    if (i >= data.m()) throw std::out_of_range("area index out of range");
    return m2_all(delta, data, link, est, boot)(i);
}

// -------------------------------------------------------------------------
// Derivatives
// -------------------------------------------------------------------------

Derivatives finite_diff(const std::function<double(const ParamVector&)>& f,
                        const ParamVector& delta, const ParamSpace& space) {
    const std::size_t k = delta.k();
    const VectorXd base = delta.flatten();

    VectorXd h(k);
    std::vector<int> direction(k, 0);  // 0 central, +1 forward, -1 backward
    for (std::size_t j = 0; j < k; ++j) {
        h(j) = std::max(1e-5 * std::abs(base(j)), 1e-6);
        auto inside = [&](double offset) {
            return contains(space, delta.with_coordinate(j, base(j) + offset));
        };
        if (inside(-h(j)) && inside(h(j))) {
            direction[j] = 0;
        } else if (inside(h(j)) && inside(2.0 * h(j))) {
            direction[j] = 1;
        } else if (inside(-h(j)) && inside(-2.0 * h(j))) {
            direction[j] = -1;
        } else {
            throw std::domain_error("finite difference stencil leaves the parameter space");
        }
    }

    auto first = [&](std::size_t j) {
        Stencil s;
        if (direction[j] == 0) {
            s.offsets = {-h(j), h(j), 0.0};
            s.weights = {-0.5 / h(j), 0.5 / h(j), 0.0};
            s.size = 2;
        } else {
            const double d = direction[j] * h(j);
            s.offsets = {0.0, d, 2.0 * d};
            s.weights = {-1.5 / d, 2.0 / d, -0.5 / d};
            s.size = 3;
        }
        return s;
    };

    auto eval = [&](std::size_t j, double a, std::size_t l, double b) {
        VectorXd point = base;
        point(j) += a;
        point(l) += b;
        return f(ParamVector::from_flat(point));
    };

    const double f0 = f(delta);
    Derivatives out;
    out.gradient = VectorXd::Zero(k);
    out.hessian = MatrixXd::Zero(k, k);

    for (std::size_t j = 0; j < k; ++j) {
        const Stencil s = first(j);
        for (int a = 0; a < s.size; ++a) {
            const double value = s.offsets[a] == 0.0 ? f0 : eval(j, s.offsets[a], j, 0.0);
            out.gradient(j) += s.weights[a] * value;
        }

        const double d = direction[j] == 0 ? h(j) : direction[j] * h(j);
        const double h2 = h(j) * h(j);
        if (direction[j] == 0) {
            out.hessian(j, j) = (eval(j, d, j, 0.0) - 2.0 * f0 + eval(j, -d, j, 0.0)) / h2;
        } else {
            out.hessian(j, j) = (f0 - 2.0 * eval(j, d, j, 0.0) + eval(j, 2.0 * d, j, 0.0)) / h2;
        }

        for (std::size_t l = 0; l < j; ++l) {
            const Stencil t = first(l);
            double mixed = 0.0;
            for (int a = 0; a < s.size; ++a) {
                for (int b = 0; b < t.size; ++b) {
                    mixed += s.weights[a] * t.weights[b] * eval(j, s.offsets[a], l, t.offsets[b]);
                }
            }
            out.hessian(j, l) = mixed;
            out.hessian(l, j) = mixed;
        }
    }
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    return out;
}

Derivatives m1_derivatives(const ParamVector& delta, const AreaObservation& area,
                           LinkFunction link) {
    require_valid(delta);
    require_dims(delta, area);
    if (link == LinkFunction::exp) {
        return finite_diff([&area](const ParamVector& d) { return m1(d, area, LinkFunction::exp); },
                           delta);
    }
    const std::size_t k = delta.k();
    const std::size_t s = delta.sigma_index();
    const double D = area.D;
    const double total = delta.sigma_u2 + D;

    Derivatives out;
    out.gradient = VectorXd::Zero(k);
    out.hessian = MatrixXd::Zero(k, k);
    if (D > 0.0) {
        out.gradient(s) = D * D / (total * total);
        out.hessian(s, s) = -2.0 * D * D / (total * total * total);
    }
    return out;
}

VectorXd grad_m1(const ParamVector& delta, const AreaObservation& area, LinkFunction link) {
    return m1_derivatives(delta, area, link).gradient;
}

MatrixXd hess_m1(const ParamVector& delta, const AreaObservation& area, LinkFunction link) {
    return m1_derivatives(delta, area, link).hessian;
}

}  // namespace sae
