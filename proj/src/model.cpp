#include "sae/model.hpp"

#include <cmath>
#include <set>
#include <string>

#include "sae/errors.hpp"

namespace sae {

// -------------------------------------------------------------------------
// AreaDataset
// -------------------------------------------------------------------------

AreaDataset::AreaDataset(std::vector<AreaObservation> areas) : areas_(std::move(areas)) {
    if (areas_.empty()) throw DataError("dataset has no areas");
    p_ = static_cast<std::size_t>(areas_.front().x.size());
    if (p_ == 0) throw DataError("covariate dimension p must be at least 1");
    if (areas_.size() < p_ + 2) {
        throw DataError("dataset needs m >= p + 2 areas (m = " + std::to_string(areas_.size()) +
                        ", p = " + std::to_string(p_) + ")");
    }

    std::set<int> ids;
    for (const auto& a : areas_) {
        const std::string where = "area " + std::to_string(a.area_id);
        if (static_cast<std::size_t>(a.x.size()) != p_) {
            throw DataError(where + ": covariate length differs from p = " + std::to_string(p_));
        }
        if (!std::isfinite(a.y)) throw DataError(where + ": y is not finite");
        if (!a.x.allFinite()) throw DataError(where + ": x is not finite");
        if (!std::isfinite(a.D) || a.D < 0.0) throw DataError(where + ": D must be >= 0");
        if (a.n && *a.n <= 0) throw DataError(where + ": n must be positive");
        if (!ids.insert(a.area_id).second) throw DataError(where + ": duplicate area_id");
    }
}

MatrixXd AreaDataset::design_matrix() const {
    MatrixXd X(m(), p_);
    for (std::size_t i = 0; i < m(); ++i) X.row(i) = areas_[i].x.transpose();
    return X;
}

VectorXd AreaDataset::response() const {
    VectorXd y(m());
    for (std::size_t i = 0; i < m(); ++i) y(i) = areas_[i].y;
    return y;
}

VectorXd AreaDataset::sampling_variances() const {
    VectorXd D(m());
    for (std::size_t i = 0; i < m(); ++i) D(i) = areas_[i].D;
    return D;
}

AreaDataset AreaDataset::with_response(const VectorXd& y) const {
    if (static_cast<std::size_t>(y.size()) != m()) throw DataError("response length mismatch");
    auto copy = areas_;
    for (std::size_t i = 0; i < m(); ++i) copy[i].y = y(i);
    return AreaDataset(std::move(copy));
}

AreaDataset AreaDataset::without(std::size_t index) const {
    if (index >= m()) throw std::out_of_range("area index out of range");
    std::vector<AreaObservation> rest;
    rest.reserve(m() - 1);
    for (std::size_t i = 0; i < m(); ++i) {
        if (i != index) rest.push_back(areas_[i]);
    }
    return AreaDataset(std::move(rest));
}

std::optional<std::size_t> AreaDataset::find(int area_id) const {
    for (std::size_t i = 0; i < m(); ++i) {
        if (areas_[i].area_id == area_id) return i;
    }
    return std::nullopt;
}

// -------------------------------------------------------------------------
// ParamVector / ParamSpace
// -------------------------------------------------------------------------

VectorXd ParamVector::flatten() const {
    VectorXd flat(k());
    flat.head(p()) = beta;
    flat(p()) = sigma_u2;
    return flat;
}

ParamVector ParamVector::from_flat(const VectorXd& flat) {
    if (flat.size() < 2) throw std::invalid_argument("flattened parameter needs length >= 2");
    ParamVector d;
    d.beta = flat.head(flat.size() - 1);
    d.sigma_u2 = flat(flat.size() - 1);
    return d;
}

bool ParamVector::finite() const { return beta.allFinite() && std::isfinite(sigma_u2); }

ParamVector ParamVector::with_coordinate(std::size_t j, double value) const {
    ParamVector d = *this;
    if (j < p()) {
        d.beta(j) = value;
    } else if (j == p()) {
        d.sigma_u2 = value;
    } else {
        throw std::out_of_range("parameter coordinate out of range");
    }
    return d;
}

bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.sigma_u2 == b.sigma_u2 && a.beta.size() == b.beta.size() && a.beta == b.beta;
}

bool contains(const ParamSpace& space, const ParamVector& delta) {
    if (!delta.finite()) return false;
    if (delta.sigma_u2 < space.sigma_u2_min) return false;
    for (std::size_t j = 0; j < space.beta_bounds.size() && j < delta.p(); ++j) {
        const auto& bound = space.beta_bounds[j];
        if (bound && (delta.beta(j) < bound->lower || delta.beta(j) > bound->upper)) return false;
    }
    return true;
}

bool ParamSpace::interior(const ParamVector& delta) const {
    if (!contains(*this, delta) || delta.sigma_u2 <= sigma_u2_min) return false;
    for (std::size_t j = 0; j < beta_bounds.size() && j < delta.p(); ++j) {
        const auto& bound = beta_bounds[j];
        if (bound && (delta.beta(j) <= bound->lower || delta.beta(j) >= bound->upper)) return false;
    }
    return true;
}

// -------------------------------------------------------------------------
// Simulation
// -------------------------------------------------------------------------

SimulatedDataset simulate_dataset(const ParamVector& delta_true,
                                  std::span<const AreaDesign> design,
                                  RandomStream& rng) {
    if (!delta_true.finite()) throw std::invalid_argument("simulate_dataset: nonfinite parameters");
    if (delta_true.sigma_u2 < 0.0) throw std::invalid_argument("simulate_dataset: sigma_u2 < 0");
    if (design.empty()) throw std::invalid_argument("simulate_dataset: empty design");

    std::vector<AreaObservation> areas;
    areas.reserve(design.size());
    VectorXd theta(design.size());
    for (std::size_t i = 0; i < design.size(); ++i) {
        const auto& d = design[i];
        if (static_cast<std::size_t>(d.x.size()) != delta_true.p()) {
            throw std::invalid_argument("simulate_dataset: covariate length differs from beta");
        }
        if (!std::isfinite(d.D) || d.D < 0.0) {
            throw std::invalid_argument("simulate_dataset: sampling variance must be >= 0");
        }
        const double mean = d.x.dot(delta_true.beta);
        theta(i) = rng.normal(mean, delta_true.sigma_u2);
        const double y = rng.normal(theta(i), d.D);
        areas.push_back({static_cast<int>(i) + 1, y, d.x, d.D, d.n});
    }
    return {AreaDataset(std::move(areas)), std::move(theta)};
}

}  // namespace sae
