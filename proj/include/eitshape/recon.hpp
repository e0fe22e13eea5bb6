#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eitshape/jacobian.hpp"
#include "eitshape/phantoms.hpp"
#include "eitshape/priors.hpp"

namespace eitshape {

/// Golden-section minimization on [a, b] for a unimodal function; the
/// interval is shrunk by the golden ratio until its length drops below tol,
/// and the midpoint is returned. `iterations` (optional) receives the number
/// of interval reductions.
double golden_section(const std::function<double(double)>& f, double a, double b,
                      double tol, int* iterations = nullptr);

/// Regularized Gauss-Newton normal equations on pre-weighted quantities:
/// (Jw' Jw + prior_inv + lambda I) delta = -(Jw' rw + prior_inv_times_offset),
/// where Jw and rw carry the Gamma_eta^{-1/2} weighting and
/// prior_inv_times_offset = Gamma_prior^{-1} (x - x_star).
Eigen::VectorXd gauss_newton_direction(const Eigen::MatrixXd& jw,
                                       const Eigen::VectorXd& rw,
                                       const Eigen::MatrixXd& prior_inv,
                                       const Eigen::VectorXd& prior_inv_times_offset,
                                       double lambda = 0.0);

enum class ReconMode { simultaneous, fixed_geometry_truth, fixed_geometry_guess };

struct ReconOptions {
    // model
    int fourier_order = 15;
    double width = 0.3;
    double h_target = 0.0;  // <= 0: perimeter / 200
    Eigen::VectorXd z;      // empty: all ones
    // priors
    double prior_a = 1.0;
    double prior_s = 1.0;
    double tau = 2.0 * StarCurve::pi() / 16.0;
    double corr_len = 0.6;
    double s_sigma_rel = 0.5;  // pointwise sigma std = rel * sigma_star
    // optimization
    int stage1_max_iter = 25;
    int stage2_max_iter = 30;
    double phi_rel_tol = 1e-4;
    // stage 1 stops once misfit <= stage1_discrepancy * (number of
    // measurements); set to 0 to run stage 1 to full convergence
    double stage1_discrepancy = 1.0;
    double line_tol = 1e-3;
    double sigma_min = 1e-3;
    bool skip_stage1 = false;        // single-stage variant
    double sigma_star_fixed = 0.0;   // > 0: known homogeneous value, skip the fit
    ReconMode mode = ReconMode::simultaneous;
    // initial guess (empty: circle of radius 2.7, equispaced electrodes)
    Eigen::VectorXd alpha0;
    Eigen::VectorXd theta0;
    // frozen geometry for fixed_geometry_truth
    Eigen::VectorXd truth_alpha;
    Eigen::VectorXd truth_theta;
    // optional observer invoked after each accepted step (stage, iteration, state)
    std::function<void(int, int, const ModelState&)> observer;
};

struct IterationRecord {
    int stage = 0;
    int iteration = 0;
    double phi = 0.0;
    double step_length = 0.0;  // accepted line-search parameter t
    double step_norm = 0.0;
    double lambda = 0.0;
    bool accepted = false;
};

struct ReconResult {
    ModelState state;
    double sigma_star = 0.0;
    double phi_final = 0.0;
    double misfit_final = 0.0;  // weighted data misfit term of phi_final
    int stage1_iterations = 0;
    int stage2_iterations = 0;
    bool warning = false;  // line search failed to decrease the objective
    std::vector<IterationRecord> history;
};

/// Two-stage MAP reconstruction driver over a fixed admittivity grid.
class ReconEngine {
public:
    ReconEngine(DataSet data, const ReconGrid& grid, ReconOptions opt);

    /// MAP functional at a state under the current priors; infinite for
    /// states violating positivity or electrode layout validity.
    double objective(const ModelState& state, double* misfit = nullptr) const;

    /// Constant-admittivity fit of the weighted misfit at the initial
    /// geometry: golden section over log sigma in [1e-2, 1e2].
    double fit_sigma_star() const;

    ReconResult run();

    const ModelConfig& model_config() const { return config_; }
    const PriorSet& priors() const { return priors_; }
    const ReconOptions& options() const { return opt_; }

private:
    struct StageSettings;
    void build_priors(double sigma_star, const Eigen::VectorXd& alpha_mean,
                      const Eigen::VectorXd& theta_mean);
    int iterate_stage(const StageSettings& settings, ModelState& state,
                      ReconResult& result);

    DataSet data_;
    const ReconGrid& grid_;
    ReconOptions opt_;
    ModelConfig config_;
    Eigen::VectorXd inv_std_;  // Gamma_eta^{-1/2} diagonal
    PriorSet priors_;
};

}  // namespace eitshape
