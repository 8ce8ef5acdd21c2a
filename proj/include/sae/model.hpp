#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sae/random.hpp"

namespace sae {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One area of the two-level model: direct estimate y, covariates x and the
/// known sampling variance D of y around the area mean.
struct AreaObservation {
    int area_id = 1;
    double y = 0.0;
    VectorXd x;
    double D = 1.0;
    std::optional<int> n;  // area sample size, only used to derive D
};

/// Ordered collection of areas sharing a covariate dimension p.
///
/// Construction validates: m >= p + 2, identical x lengths, finite values,
/// D >= 0 and distinct area ids. D = 0 is admitted for noiseless designs
/// produced by the simulator; files on disk must carry D > 0.
class AreaDataset {
public:
    explicit AreaDataset(std::vector<AreaObservation> areas);

    std::size_t m() const { return areas_.size(); }
    std::size_t p() const { return p_; }

    const std::vector<AreaObservation>& areas() const { return areas_; }
    const AreaObservation& operator[](std::size_t i) const { return areas_[i]; }

    MatrixXd design_matrix() const;
    VectorXd response() const;
    VectorXd sampling_variances() const;

    /// Same design with a different response vector.
    AreaDataset with_response(const VectorXd& y) const;

    /// Dataset with area `index` deleted.
    AreaDataset without(std::size_t index) const;

    /// Index of the area carrying `area_id`, if present.
    std::optional<std::size_t> find(int area_id) const;

private:
    std::vector<AreaObservation> areas_;
    std::size_t p_ = 0;
};

/// Model parameters: regression coefficients followed by the random-effect
/// variance. The flattened order (beta_1..beta_p, sigma_u2) is the
/// coordinate system used by derivatives, bootstrap moments and the tilt.
struct ParamVector {
    VectorXd beta;
    double sigma_u2 = 0.0;

    std::size_t p() const { return static_cast<std::size_t>(beta.size()); }
    std::size_t k() const { return p() + 1; }
    std::size_t sigma_index() const { return p(); }

    VectorXd flatten() const;
    static ParamVector from_flat(const VectorXd& flat);

    bool finite() const;
    double coordinate(std::size_t j) const { return j < p() ? beta(j) : sigma_u2; }
    ParamVector with_coordinate(std::size_t j, double value) const;
};

bool operator==(const ParamVector& a, const ParamVector& b);

/// The admissible parameter set: sigma_u2 >= sigma_u2_min plus optional
/// per-coefficient boxes.
struct ParamSpace {
    struct Bound {
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
    };

    double sigma_u2_min = 0.0;
    std::vector<std::optional<Bound>> beta_bounds;  // empty => unbounded

    bool interior(const ParamVector& delta) const;
};

bool contains(const ParamSpace& space, const ParamVector& delta);

/// Covariates and sampling variance of one simulated area.
struct AreaDesign {
    VectorXd x;
    double D = 1.0;
    std::optional<int> n;
};

struct SimulatedDataset {
    AreaDataset data;
    VectorXd theta;  // true area means; never passed to estimators
};

/// Draws theta_i = x_i'beta + u_i and y_i = theta_i + e_i with
/// u_i ~ N(0, sigma_u2), e_i ~ N(0, D_i), all independent. Area ids are 1..m.
SimulatedDataset simulate_dataset(const ParamVector& delta_true,
                                  std::span<const AreaDesign> design,
                                  RandomStream& rng);

}  // namespace sae
