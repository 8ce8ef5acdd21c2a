#include "sae/mspe.hpp"

#include <cmath>
#include <string>

namespace sae {

namespace {

void require_area(const AreaDataset& data, std::size_t i) {
    if (i >= data.m()) throw std::out_of_range("area index out of range");
}

AreaMspe naive_with(const ParamVector& delta_hat, const AreaDataset& data, std::size_t i,
                    LinkFunction link, double m2_value) {
    AreaMspe out;
    out.area_id = data[i].area_id;
    out.m1_part = m1(delta_hat, data[i], link);
    out.m2_part = m2_value;
    out.value = out.m1_part + out.m2_part;
    return out;
}

AreaMspe pr_with(const AreaDataset& data, std::size_t i, const PrasadRaoTerms& g) {
    AreaMspe out;
    out.area_id = data[i].area_id;
    out.m1_part = g.g1;
    out.m2_part = g.g2 + g.g3;
    out.bias_correction = -g.g3;
    out.value = out.m1_part - out.bias_correction + out.m2_part;
    return out;
}

AreaMspe jlw_with(const ParamVector& delta_hat, std::span<const ParamVector> jack,
                  const AreaDataset& data, std::size_t i, LinkFunction link, double m2_value) {
    if (jack.size() != data.m()) {
        throw std::invalid_argument("jackknife fits: expected " + std::to_string(data.m()) +
                                    ", got " + std::to_string(jack.size()));
    }
    AreaMspe out;
    out.area_id = data[i].area_id;
    out.m1_part = m1(delta_hat, data[i], link);
    out.m2_part = m2_value;

    double sum = 0.0;
    for (const auto& deleted : jack) sum += m1(deleted, data[i], link) - out.m1_part;
    const double m = static_cast<double>(data.m());
    out.bias_correction = (m - 1.0) / m * sum;
    out.value = out.m1_part - out.bias_correction + out.m2_part;
    return out;
}

AreaMspe new_with(const AreaDataset& data, std::size_t i, const ParamVector& delta_hat,
                  const BiasVarEstimate& bv, LinkFunction link, const TiltOptions& options,
                  double m2_value) {
    const auto& area = data[i];
    const Derivatives d = m1_derivatives(delta_hat, area, link);

    TiltResult tilt{delta_hat, {}};
    tilt.diagnostics.threshold = std::pow(1.0 + std::log(static_cast<double>(data.m())), -2.0);
    try {
        const std::size_t l = tilt_component(d.gradient);
        const ParamVector bar =
            preliminary_tilt(delta_hat, d.gradient, d.hessian, bv, l, options.diag_weight);
        tilt = tilted_estimator(bar, delta_hat, options.space, d.gradient(l), data.m());
        tilt.diagnostics.component = l;
    } catch (const ZeroGradientError&) {
        tilt.diagnostics.zero_gradient = true;
        tilt.diagnostics.below_threshold = true;
        tilt.diagnostics.component = delta_hat.sigma_index();
    }

    AreaMspe out;
    out.area_id = area.area_id;
    out.m1_part = m1(tilt.delta_tilde, area, link);
    out.m2_part = m2_value;
    out.value = out.m1_part + out.m2_part;
    out.tilt = tilt.diagnostics;
    return out;
}

}  // namespace

std::string_view to_string(MspeMethod method) {
    switch (method) {
        case MspeMethod::naive: return "naive";
        case MspeMethod::pr: return "pr";
        case MspeMethod::jlw: return "jlw";
        case MspeMethod::tilted: return "new";
    }
    return "unknown";
}

MspeMethod parse_method(std::string_view name) {
    if (name == "naive") return MspeMethod::naive;
    if (name == "pr") return MspeMethod::pr;
    if (name == "jlw") return MspeMethod::jlw;
    if (name == "new") return MspeMethod::tilted;
    throw std::invalid_argument("unknown MSPE method '" + std::string(name) + "'");
}

std::string_view to_string(DiagWeight weight) {
    return weight == DiagWeight::half ? "half" : "one";
}

DiagWeight parse_diag_weight(std::string_view name) {
    if (name == "half") return DiagWeight::half;
    if (name == "one") return DiagWeight::one;
    throw std::invalid_argument("unknown tilt_diag_weight '" + std::string(name) + "'");
}

std::size_t MspeBreakdown::negative_count() const {
    std::size_t n = 0;
    for (const auto& a : areas) n += a.value < 0.0 ? 1 : 0;
    return n;
}

// -------------------------------------------------------------------------
// Per-area estimators
// -------------------------------------------------------------------------

AreaMspe naive_mspe(const ParamVector& delta_hat, const AreaDataset& data, std::size_t i,
                    LinkFunction link, const EstimatorSpec& est,
                    std::optional<BootstrapBudget> boot) {
    require_area(data, i);
    return naive_with(delta_hat, data, i, link, m2(delta_hat, data, i, link, est, boot));
}

AreaMspe pr_mspe(const ParamVector& delta_hat, const AreaDataset& data, std::size_t i,
                 LinkFunction link, const EstimatorSpec&) {
    require_area(data, i);
    if (link != LinkFunction::identity) {
        throw UnsupportedError("Prasad-Rao correction is only available for the identity link");
    }
    return pr_with(data, i, prasad_rao_terms(delta_hat, data)[i]);
}

AreaMspe jlw_mspe(const ParamVector& delta_hat, std::span<const ParamVector> jack,
                  const AreaDataset& data, std::size_t i, LinkFunction link,
                  const EstimatorSpec& est, std::optional<BootstrapBudget> boot) {
    require_area(data, i);
    if (jack.size() != data.m()) {
        throw std::invalid_argument("jackknife fits: expected " + std::to_string(data.m()) +
                                    ", got " + std::to_string(jack.size()));
    }
    return jlw_with(delta_hat, jack, data, i, link, m2(delta_hat, data, i, link, est, boot));
}

std::size_t tilt_component(const VectorXd& grad) {
    if (!grad.allFinite()) throw std::invalid_argument("gradient is not finite");
    std::size_t best = 0;
    double best_abs = 0.0;
    for (Eigen::Index j = 0; j < grad.size(); ++j) {
        if (std::abs(grad(j)) > best_abs) {
            best_abs = std::abs(grad(j));
            best = static_cast<std::size_t>(j);
        }
    }
    if (best_abs == 0.0) throw ZeroGradientError("all first partial derivatives of M1 are zero");
    return best;
}

ParamVector preliminary_tilt(const ParamVector& delta_hat, const VectorXd& grad,
                             const MatrixXd& hess, const BiasVarEstimate& bv, std::size_t l,
                             DiagWeight weight) {
    const auto k = static_cast<Eigen::Index>(delta_hat.k());
    if (grad.size() != k || hess.rows() != k || hess.cols() != k || bv.b_hat.size() != k ||
        bv.V_hat.rows() != k || bv.V_hat.cols() != k) {
        throw std::invalid_argument("tilt inputs disagree on parameter dimension");
    }
    if (l >= delta_hat.k()) throw std::out_of_range("tilt component out of range");
    if (grad(l) == 0.0) throw ZeroGradientError("tilt component has zero derivative");

    double second = 0.5 * (hess.array() * bv.V_hat.array()).sum();
    if (weight == DiagWeight::one) second += 0.5 * (hess.diagonal().array() * bv.V_hat.diagonal().array()).sum();

    const double correction = grad.dot(bv.b_hat) + second;
    return delta_hat.with_coordinate(l, delta_hat.coordinate(l) - correction / grad(l));
}

TiltResult tilted_estimator(const ParamVector& delta_bar, const ParamVector& delta_hat,
                            const ParamSpace& space, double grad_l, std::size_t m) {
    if (m < 2) throw std::invalid_argument("tilt threshold needs m >= 2");
    TiltResult out;
    auto& diag = out.diagnostics;
    diag.grad_value = grad_l;
    diag.threshold = std::pow(1.0 + std::log(static_cast<double>(m)), -2.0);
    diag.fell_outside_delta = !contains(space, delta_bar);
    diag.below_threshold = !(std::abs(grad_l) >= diag.threshold);
    diag.used_preliminary = !diag.fell_outside_delta && !diag.below_threshold;
    out.delta_tilde = diag.used_preliminary ? delta_bar : delta_hat;
    return out;
}

AreaMspe new_mspe(const AreaDataset& data, std::size_t i, const ParamVector& delta_hat,
                  const BiasVarEstimate& bv, LinkFunction link, const EstimatorSpec& est,
                  const TiltOptions& options, std::optional<BootstrapBudget> boot) {
    require_area(data, i);
    return new_with(data, i, delta_hat, bv, link, options, m2(delta_hat, data, i, link, est, boot));
}

// -------------------------------------------------------------------------
// Whole-dataset evaluation
// -------------------------------------------------------------------------

std::vector<MspeBreakdown> compute_mspe(std::span<const MspeMethod> methods,
                                        const AreaDataset& data, const ParamVector& delta_hat,
                                        const MspeInputs& inputs) {
    bool need_pr = false, need_jack = false, need_tilt = false, need_m2 = false;
    for (MspeMethod method : methods) {
        need_pr |= method == MspeMethod::pr;
        need_jack |= method == MspeMethod::jlw;
        need_tilt |= method == MspeMethod::tilted;
        need_m2 |= method != MspeMethod::pr;
    }
    if (need_pr && inputs.link != LinkFunction::identity) {
        throw UnsupportedError("Prasad-Rao correction is only available for the identity link");
    }
    if (need_tilt && !inputs.bv) throw std::invalid_argument("tilted estimator needs bootstrap bias/variance");

    std::vector<PrasadRaoTerms> terms;
    if (need_pr || (need_m2 && inputs.link == LinkFunction::identity)) {
        terms = prasad_rao_terms(delta_hat, data);
    }
    VectorXd m2_values;
    if (need_m2) {
        if (inputs.link == LinkFunction::identity) {
            m2_values.resize(data.m());
            for (std::size_t i = 0; i < data.m(); ++i) m2_values(i) = terms[i].g2 + terms[i].g3;
        } else {
            m2_values = m2_all(delta_hat, data, inputs.link, inputs.est, inputs.m2_boot);
        }
    }
    std::vector<ParamVector> jack;
    if (need_jack) jack = inputs.jack ? *inputs.jack : jackknife_fits(data, inputs.est);

    std::vector<MspeBreakdown> out;
    out.reserve(methods.size());
    for (MspeMethod method : methods) {
        MspeBreakdown b;
        b.method = method;
        b.areas.reserve(data.m());
        for (std::size_t i = 0; i < data.m(); ++i) {
            switch (method) {
                case MspeMethod::naive:
                    b.areas.push_back(naive_with(delta_hat, data, i, inputs.link, m2_values(i)));
                    break;
                case MspeMethod::pr:
                    b.areas.push_back(pr_with(data, i, terms[i]));
                    break;
                case MspeMethod::jlw:
                    b.areas.push_back(jlw_with(delta_hat, jack, data, i, inputs.link, m2_values(i)));
                    break;
                case MspeMethod::tilted:
                    b.areas.push_back(new_with(data, i, delta_hat, *inputs.bv, inputs.link,
                                               inputs.tilt, m2_values(i)));
                    break;
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

MspeBreakdown compute_mspe(MspeMethod method, const AreaDataset& data,
                           const ParamVector& delta_hat, const MspeInputs& inputs) {
    const MspeMethod one[] = {method};
    return std::move(compute_mspe(one, data, delta_hat, inputs).front());
}

}  // namespace sae
