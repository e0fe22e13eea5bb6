#include "eitshape/priors.hpp"

#include <cmath>
#include <stdexcept>

namespace eitshape {

GaussianPrior::GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)) {
    if (cov.rows() != mean_.size() || cov.cols() != mean_.size())
        throw std::invalid_argument("GaussianPrior: covariance size mismatch");
    // tiny relative jitter keeps the factorization of smooth kernels stable
    const double jitter = 1e-10 * cov.diagonal().maxCoeff();
    llt_.compute(cov + jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
    if (llt_.info() != Eigen::Success)
        throw std::runtime_error("GaussianPrior: covariance not positive definite");
}

Eigen::VectorXd GaussianPrior::apply_inverse(const Eigen::VectorXd& v) const {
    return llt_.solve(v);
}

Eigen::MatrixXd GaussianPrior::inverse() const {
    return llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

double GaussianPrior::mahalanobis(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd d = x - mean_;
    return d.dot(llt_.solve(d));
}

Eigen::VectorXd shape_prior_stddev(int order, double a, double s) {
    if (a <= 0.0 || s <= 0.0)
        throw std::invalid_argument("shape_prior_stddev: a and s must be positive");
    Eigen::VectorXd sd(2 * order + 1);
    sd[0] = a;  // constant coefficient: decay factor 1
    for (int l = 1; l <= order; ++l) {
        const double v = std::pow(static_cast<double>(l), -s) * a;
        sd[l] = v;          // cosine group
        sd[order + l] = v;  // sine group
    }
    return sd;
}

GaussianPrior diagonal_prior(Eigen::VectorXd mean, const Eigen::VectorXd& stddev) {
    if (stddev.size() != mean.size())
        throw std::invalid_argument("diagonal_prior: size mismatch");
    return GaussianPrior(std::move(mean),
                         stddev.array().square().matrix().asDiagonal());
}

GaussianPrior isotropic_prior(Eigen::VectorXd mean, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("isotropic_prior: tau must be positive");
    const int n = static_cast<int>(mean.size());
    return GaussianPrior(std::move(mean),
                         (tau * tau) * Eigen::MatrixXd::Identity(n, n));
}

Eigen::MatrixXd squared_exponential_cov(const ReconGrid& grid, double point_std,
                                        double corr_len) {
    if (point_std <= 0.0 || corr_len <= 0.0)
        throw std::invalid_argument("squared_exponential_cov: parameters must be positive");
    const int k = grid.num_nodes();
    Eigen::MatrixXd cov(k, k);
    const double var = point_std * point_std;
    const double inv2l2 = 1.0 / (2.0 * corr_len * corr_len);
    for (int i = 0; i < k; ++i) {
        cov(i, i) = var;
        for (int j = i + 1; j < k; ++j) {
            const double d2 =
                (grid.mesh().vertices[i] - grid.mesh().vertices[j]).squaredNorm();
            cov(i, j) = cov(j, i) = var * std::exp(-d2 * inv2l2);
        }
    }
    return cov;
}

Eigen::VectorXd noise_variances(const Eigen::VectorXd& clean, int m_count, double c1,
                                double c2) {
    if (clean.size() % m_count != 0)
        throw std::invalid_argument("noise_variances: data length not a multiple of M");
    const int drives = static_cast<int>(clean.size()) / m_count;
    Eigen::VectorXd var(clean.size());
    for (int j = 0; j < drives; ++j) {
        const auto block = clean.segment(j * m_count, m_count);
        const double spread = block.maxCoeff() - block.minCoeff();
        for (int m = 0; m < m_count; ++m) {
            const double u = block[m];
            var[j * m_count + m] = c1 * c1 * u * u + c2 * c2 * spread * spread;
        }
    }
    return var;
}

Regularizer regularizer(const ModelState& state, const PriorSet& priors) {
    Regularizer r;
    r.value = priors.sigma.mahalanobis(state.sigma) +
              priors.alpha.mahalanobis(state.alpha) +
              priors.theta.mahalanobis(state.theta);
    r.grad_sigma = 2.0 * priors.sigma.apply_inverse(state.sigma - priors.sigma.mean());
    r.grad_alpha = 2.0 * priors.alpha.apply_inverse(state.alpha - priors.alpha.mean());
    r.grad_theta = 2.0 * priors.theta.apply_inverse(state.theta - priors.theta.mean());
    return r;
}

}  // namespace eitshape
