#include "eitshape/recon.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace eitshape {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double golden_section(const std::function<double(double)>& f, double a, double b,
                      double tol, int* iterations) {
    if (!(b > a)) throw std::invalid_argument("golden_section: empty bracket");
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c);
    double fd = f(d);
    int n = 0;
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
        ++n;
    }
    if (iterations) *iterations = n;
    return 0.5 * (a + b);
}

Eigen::VectorXd gauss_newton_direction(const Eigen::MatrixXd& jw,
                                       const Eigen::VectorXd& rw,
                                       const Eigen::MatrixXd& prior_inv,
                                       const Eigen::VectorXd& prior_inv_times_offset,
                                       double lambda) {
    Eigen::MatrixXd h = jw.transpose() * jw + prior_inv;
    if (lambda > 0.0) h.diagonal().array() += lambda;
    const Eigen::VectorXd g = jw.transpose() * rw + prior_inv_times_offset;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("gauss_newton_direction: normal equations not solvable");
    return ldlt.solve(-g);
}

struct ReconEngine::StageSettings {
    int stage = 1;
    bool active_sigma = false;
    bool active_geometry = false;
    bool levenberg_marquardt = false;
    // recentre the geometry prior means at the current iterate before every
    // step, so the penalty acts on the step rather than on the distance from
    // the initial guess (proximal damping); the iteration then stops on its
    // own once the achievable misfit decrease drops below the step penalty
    bool recenter_prior = false;
    // stop once the weighted misfit drops to this value (discrepancy
    // principle); 0 disables the check
    double discrepancy = 0.0;
    // scale of the initial Levenberg-Marquardt shift relative to the mean
    // diagonal of the normal matrix
    double lambda0_factor = 1e-2;
    int max_iter = 25;
};

ReconEngine::ReconEngine(DataSet data, const ReconGrid& grid, ReconOptions opt)
    : data_(std::move(data)), grid_(grid), opt_(std::move(opt)) {
    const int m = data_.m_count;
    if (m < 2 || data_.voltages.size() != m * (m - 1))
        throw std::invalid_argument("ReconEngine: data size inconsistent with M");
    if (data_.noise_var.size() != data_.voltages.size() ||
        data_.noise_var.minCoeff() <= 0.0)
        throw std::invalid_argument("ReconEngine: invalid noise covariance");

    if (opt_.z.size() == 0) opt_.z = Eigen::VectorXd::Ones(m);
    if (opt_.alpha0.size() == 0) {
        opt_.alpha0 = Eigen::VectorXd::Zero(2 * opt_.fourier_order + 1);
        opt_.alpha0[0] = 2.7;
    }
    if (opt_.theta0.size() == 0) {
        opt_.theta0 = Eigen::VectorXd(m);
        for (int k = 0; k < m; ++k) opt_.theta0[k] = 2.0 * StarCurve::pi() * k / m;
    }

    config_.m_count = m;
    config_.fourier_order = opt_.fourier_order;
    config_.width = opt_.width;
    config_.h_target = opt_.h_target;
    config_.z = opt_.z;
    config_.provenance = "recon";

    inv_std_ = data_.noise_var.array().rsqrt();
}

void ReconEngine::build_priors(double sigma_star, const Eigen::VectorXd& alpha_mean,
                               const Eigen::VectorXd& theta_mean) {
    priors_.sigma = GaussianPrior(
        Eigen::VectorXd::Constant(grid_.num_nodes(), sigma_star),
        squared_exponential_cov(grid_, opt_.s_sigma_rel * sigma_star, opt_.corr_len));
    priors_.alpha = diagonal_prior(
        alpha_mean, shape_prior_stddev(opt_.fourier_order, opt_.prior_a, opt_.prior_s));
    priors_.theta = isotropic_prior(theta_mean, opt_.tau);
}

double ReconEngine::objective(const ModelState& state, double* misfit) const {
    if (state.sigma.minCoeff() < opt_.sigma_min) return kInf;
    try {
        const ForwardEval fe(config_, state, grid_);
        const Eigen::VectorXd rw =
            (fe.measurement - data_.voltages).cwiseProduct(inv_std_);
        const double m = rw.squaredNorm();
        if (misfit) *misfit = m;
        return m + regularizer(state, priors_).value;
    } catch (const std::exception&) {
        return kInf;  // invalid layout / degenerate geometry during a trial step
    }
}

double ReconEngine::fit_sigma_star() const {
    // fixed initial geometry, one mesh; only the admittivity varies
    const FourierBoundary boundary(opt_.fourier_order, opt_.alpha0);
    const ElectrodeLayout layout(opt_.theta0, opt_.width);
    const ElectrodeArcs arcs = electrode_arcs(boundary, layout);
    MeshOptions mo;
    mo.h_target = opt_.h_target > 0.0 ? opt_.h_target : boundary.perimeter() / 200.0;
    mo.provenance = config_.provenance;
    const Mesh2D mesh = build_mesh(boundary, arcs, mo);
    const P2Space space(mesh);

    auto misfit_of_log = [&](double x) {
        const double sigma = std::exp(x);
        const Eigen::VectorXd nodal =
            Eigen::VectorXd::Constant(mesh.vertices.size(), sigma);
        const CemSystem system(space, nodal, ContactImpedances(opt_.z));
        const Eigen::VectorXd u =
            system.solve_all(DriveBasis::standard(config_.m_count)).measurement_vector();
        return ((u - data_.voltages).cwiseProduct(inv_std_)).squaredNorm();
    };
    const double x =
        golden_section(misfit_of_log, std::log(1e-2), std::log(1e2), 1e-3);
    return std::exp(x);
}

int ReconEngine::iterate_stage(const StageSettings& set, ModelState& state,
                               ReconResult& result) {
    const int k = static_cast<int>(state.sigma.size());
    const int na = static_cast<int>(state.alpha.size());
    const int m = static_cast<int>(state.theta.size());
    const int n_sigma = set.active_sigma ? k : 0;
    const int n_geom = set.active_geometry ? na + m : 0;
    const int n = n_sigma + n_geom;

    auto apply_step = [&](const ModelState& base, const Eigen::VectorXd& delta,
                          double t) {
        ModelState out = base;
        int off = 0;
        if (set.active_sigma) {
            out.sigma += t * delta.segment(0, k);
            off = k;
        }
        if (set.active_geometry) {
            out.alpha += t * delta.segment(off, na);
            out.theta += t * delta.segment(off + na, m);
        }
        return out;
    };

    double phi_cur = objective(state, nullptr);
    double lambda = -1.0;  // initialized from the first normal matrix
    int iters = 0;

    for (int iter = 1; iter <= set.max_iter; ++iter) {
        if (set.recenter_prior) {
            priors_.alpha = diagonal_prior(
                state.alpha,
                shape_prior_stddev(opt_.fourier_order, opt_.prior_a, opt_.prior_s));
            priors_.theta = isotropic_prior(state.theta, opt_.tau);
        }
        const ForwardEval fe(config_, state, grid_);
        const JacobianBlocks jb = assemble_jacobians(fe, grid_);
        const Eigen::VectorXd rw =
            (fe.measurement - data_.voltages).cwiseProduct(inv_std_);

        Eigen::MatrixXd jw(rw.size(), n);
        Eigen::MatrixXd prior_inv = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
        const Regularizer reg = regularizer(state, priors_);
        if (set.recenter_prior) phi_cur = rw.squaredNorm() + reg.value;
        if (set.discrepancy > 0.0 && rw.squaredNorm() <= set.discrepancy) break;
        int off = 0;
        if (set.active_sigma) {
            jw.middleCols(0, k) = inv_std_.asDiagonal() * jb.J_sigma;
            prior_inv.block(0, 0, k, k) = priors_.sigma.inverse();
            offset.segment(0, k) = 0.5 * reg.grad_sigma;
            off = k;
        }
        if (set.active_geometry) {
            jw.middleCols(off, na) = inv_std_.asDiagonal() * jb.J_alpha;
            jw.middleCols(off + na, m) = inv_std_.asDiagonal() * jb.J_theta;
            prior_inv.block(off, off, na, na) = priors_.alpha.inverse();
            prior_inv.block(off + na, off + na, m, m) =
                (1.0 / (opt_.tau * opt_.tau)) * Eigen::MatrixXd::Identity(m, m);
            offset.segment(off, na) = 0.5 * reg.grad_alpha;
            offset.segment(off + na, m) = 0.5 * reg.grad_theta;
        }

        double lm_seed = 0.0;
        if (set.levenberg_marquardt) {
            const double trace =
                (jw.transpose() * jw + prior_inv).trace();
            lm_seed = 1e-2 * trace / n;
            if (lambda < 0.0) lambda = set.lambda0_factor * trace / n;
        }

        bool accepted = false;
        double phi_new = kInf, t_best = 0.0;
        Eigen::VectorXd delta;
        const int max_attempts = set.levenberg_marquardt ? 8 : 1;
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            const double lm = set.levenberg_marquardt ? lambda : 0.0;
            delta = gauss_newton_direction(jw, rw, prior_inv, offset, lm);
            auto phi_of_t = [&](double t) {
                return objective(apply_step(state, delta, t), nullptr);
            };
            const double t = golden_section(phi_of_t, 0.0, 2.0, opt_.line_tol);
            const double phi_t = phi_of_t(t);
            if (phi_t < phi_cur) {
                accepted = true;
                phi_new = phi_t;
                t_best = t;
                if (set.levenberg_marquardt) lambda /= 10.0;
                break;
            }
            phi_new = std::min(phi_new, phi_t);
            if (set.levenberg_marquardt) lambda = lambda > 0.0 ? lambda * 10.0 : lm_seed;
        }

        IterationRecord rec;
        rec.stage = set.stage;
        rec.iteration = iter;
        rec.lambda = set.levenberg_marquardt ? lambda : 0.0;
        rec.accepted = accepted;

        if (!accepted) {
            // at a minimizer the line search cannot decrease the objective;
            // treat a sub-tolerance stall as clean convergence
            const bool stalled =
                std::isfinite(phi_new) &&
                (phi_new - phi_cur) <= opt_.phi_rel_tol * std::abs(phi_cur);
            if (!stalled) result.warning = true;
            rec.phi = phi_cur;
            result.history.push_back(rec);
            ++iters;
            break;
        }

        state = apply_step(state, delta, t_best);
        if (opt_.observer) opt_.observer(set.stage, iter, state);
        rec.phi = phi_new;
        rec.step_length = t_best;
        rec.step_norm = t_best * delta.norm();
        result.history.push_back(rec);
        ++iters;

        const double rel_drop = (phi_cur - phi_new) / std::abs(phi_cur);
        phi_cur = phi_new;
        if (rel_drop < opt_.phi_rel_tol) break;
    }
    return iters;
}

ReconResult ReconEngine::run() {
    ReconResult result;
    result.sigma_star =
        opt_.sigma_star_fixed > 0.0 ? opt_.sigma_star_fixed : fit_sigma_star();

    ModelState state;
    state.sigma = Eigen::VectorXd::Constant(grid_.num_nodes(), result.sigma_star);
    state.alpha = opt_.alpha0;
    state.theta = opt_.theta0;

    if (opt_.mode == ReconMode::fixed_geometry_truth) {
        if (opt_.truth_alpha.size() == 0 || opt_.truth_theta.size() == 0)
            throw std::invalid_argument("ReconEngine: truth geometry not provided");
        state.alpha = opt_.truth_alpha;
        state.theta = opt_.truth_theta;
    }

    if (opt_.mode == ReconMode::simultaneous && !opt_.skip_stage1) {
        build_priors(result.sigma_star, opt_.alpha0, opt_.theta0);
        // proximal Gauss-Newton with a noise-level stop: the quasi-flat
        // geometry directions should not absorb the noise realization before
        // the admittivity enters in stage 2
        StageSettings s1;
        s1.stage = 1;
        s1.active_geometry = true;
        s1.recenter_prior = true;
        s1.levenberg_marquardt = true;  // shift engages only after a rejected step
        s1.lambda0_factor = 0.0;
        s1.discrepancy = opt_.stage1_discrepancy *
                         static_cast<double>(data_.voltages.size());
        s1.max_iter = opt_.stage1_max_iter;
        result.stage1_iterations = iterate_stage(s1, state, result);
    }

    // stage-2 prior means: the current geometry (stage-1 output, the frozen
    // truth/guess, or the plain initial guess in the single-stage variant)
    build_priors(result.sigma_star, state.alpha, state.theta);

    StageSettings s2;
    s2.stage = 2;
    s2.active_sigma = true;
    s2.active_geometry = opt_.mode == ReconMode::simultaneous;
    s2.max_iter = opt_.stage2_max_iter;
    result.stage2_iterations = iterate_stage(s2, state, result);

    result.state = state;
    result.phi_final = objective(state, &result.misfit_final);
    return result;
}

}  // namespace eitshape
