#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "eitshape/jacobian.hpp"
#include "eitshape/mesh.hpp"

namespace eitshape {

/// Gaussian prior with dense SPD covariance; all evaluations go through the
/// stored Cholesky factor, never an explicit inverse.
class GaussianPrior {
public:
    GaussianPrior() = default;
    GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd cov);

    const Eigen::VectorXd& mean() const { return mean_; }
    int dim() const { return static_cast<int>(mean_.size()); }

    /// Gamma^{-1} v by Cholesky back-substitution.
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const;
    /// Gamma^{-1} as a matrix (for the Gauss-Newton normal equations).
    Eigen::MatrixXd inverse() const;
    /// (x - mean)' Gamma^{-1} (x - mean).
    double mahalanobis(const Eigen::VectorXd& x) const;

private:
    Eigen::VectorXd mean_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Standard deviations a_j of the diagonal shape-coefficient prior: decay
/// a_j = l^{-s} a with harmonic index l within each of the cosine and sine
/// groups; the constant coefficient (l = 0) uses decay factor 1.
Eigen::VectorXd shape_prior_stddev(int order, double a, double s);

/// Diagonal Gaussian prior from per-coefficient standard deviations.
GaussianPrior diagonal_prior(Eigen::VectorXd mean, const Eigen::VectorXd& stddev);

/// Isotropic Gaussian prior with standard deviation tau (electrode angles).
GaussianPrior isotropic_prior(Eigen::VectorXd mean, double tau);

/// Squared-exponential smoothness covariance over the reconstruction grid
/// nodes: cov(i,j) = point_std^2 exp(-|x_i - x_j|^2 / (2 corr_len^2)).
/// Diagonal entries equal point_std^2 exactly.
Eigen::MatrixXd squared_exponential_cov(const ReconGrid& grid, double point_std,
                                        double corr_len);

/// Per-entry variances of the measurement noise: c1^2 |U|^2 plus c2^2 times
/// the squared maximum voltage spread within the entry's drive.
Eigen::VectorXd noise_variances(const Eigen::VectorXd& clean, int m_count,
                                double c1 = 0.01, double c2 = 0.001);

/// The three Gaussian priors of the MAP functional.
struct PriorSet {
    GaussianPrior sigma;
    GaussianPrior alpha;
    GaussianPrior theta;
};

struct Regularizer {
    double value = 0.0;
    Eigen::VectorXd grad_sigma, grad_alpha, grad_theta;
};

/// Sum of the three Mahalanobis penalty terms and its gradient blocks.
Regularizer regularizer(const ModelState& state, const PriorSet& priors);

}  // namespace eitshape
