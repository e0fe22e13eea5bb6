// eit: command-line front end for simulation, reconstruction, Jacobian
// verification, and figure emission.
//
// Exit codes: 0 success, 1 validation error, 2 numeric failure,
// 3 verification-threshold breach.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "eitshape/io.hpp"
#include "eitshape/jacobian.hpp"
#include "eitshape/phantoms.hpp"
#include "eitshape/recon.hpp"

namespace fs = std::filesystem;
using namespace eitshape;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitThreshold = 3;

struct CommonArgs {
    std::string config_path;
    std::string phantom;
    std::string data_path;
    std::string output_dir;
    std::string mode;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "run configuration JSON file");
    cmd->add_option("--phantom", a.phantom, "phantom id (exp1|exp2|exp3)");
    cmd->add_option("--data", a.data_path, "measurement CSV (reconstruct)");
    cmd->add_option("--out", a.output_dir, "output directory");
    cmd->add_option("--mode", a.mode,
                    "simultaneous|fixed_geometry_truth|fixed_geometry_guess");
    cmd->add_option("--seed", a.seed, "RNG seed")->each([&a](const std::string&) {
        a.seed_set = true;
    });
    cmd->add_flag("--force", a.force, "overwrite existing output files");
}

/// Loads the config file (if any), applies command-line overrides, and
/// resolves the output directory against $EITSHAPE_OUT_ROOT.
RunConfig resolve_config(const CommonArgs& a) {
    RunConfig c =
        a.config_path.empty() ? RunConfig() : RunConfig::from_file(a.config_path);
    if (!a.phantom.empty()) c.phantom = a.phantom;
    if (!a.data_path.empty()) c.data_path = a.data_path;
    if (!a.output_dir.empty()) c.output_dir = a.output_dir;
    if (!a.mode.empty()) c.mode = a.mode;
    if (a.seed_set) c.seed = a.seed;
    c.recon_mode();  // validate
    const char* root = std::getenv("EITSHAPE_OUT_ROOT");
    if (root && *root && fs::path(c.output_dir).is_relative())
        c.output_dir = (fs::path(root) / c.output_dir).string();
    return c;
}

std::string out_path(const RunConfig& c, const std::string& name) {
    return (fs::path(c.output_dir) / name).string();
}

int cmd_simulate(const CommonArgs& args) {
    const RunConfig config = resolve_config(args);
    const Phantom phantom = make_phantom(config.phantom, config.seed);
    const DataSet data =
        simulate(phantom, config.seed, config.sim_h_target, config.c1, config.c2);

    const std::string csv =
        out_path(config, config.phantom + "_seed" + std::to_string(config.seed) + ".csv");
    write_dataset(data, phantom, csv, config.hash(), args.force);

    const double perimeter = phantom.boundary->perimeter();
    const double noise_level =
        std::sqrt(data.noise_var.mean()) / data.clean.cwiseAbs().maxCoeff();
    std::printf("wrote %s (%d rows)\n", csv.c_str(),
                static_cast<int>(data.voltages.size()));
    std::printf("perimeter        %.6f\n", perimeter);
    std::printf("coverage         %.6f\n",
                phantom.m_count * phantom.width / perimeter);
    std::printf("noise level      %.3e (mean std / max |U|)\n", noise_level);
    std::printf("config hash      %s\n", config.hash().c_str());
    return kExitOk;
}

int cmd_reconstruct(const CommonArgs& args) {
    const RunConfig config = resolve_config(args);
    if (config.data_path.empty())
        throw std::invalid_argument("reconstruct: --data (or data_path) is required");

    double sidecar_width = 0.0;
    DataSet data = read_dataset(config.data_path, &sidecar_width);
    if (data.m_count != config.m_count)
        throw std::invalid_argument(
            "reconstruct: data has M=" + std::to_string(data.m_count) +
            " but config requests M=" + std::to_string(config.m_count));

    // ground truth, when the data came from a known phantom
    std::unique_ptr<Phantom> truth;
    if (!data.phantom_id.empty())
        truth = std::make_unique<Phantom>(make_phantom(data.phantom_id, data.seed));

    double width = config.width;
    if (width <= 0.0) width = sidecar_width;
    if (width <= 0.0 && truth) width = truth->width;
    if (width <= 0.0)
        throw std::invalid_argument(
            "reconstruct: electrode width unknown (no sidecar); set \"width\"");

    ReconOptions opt = config.recon_options(width);
    if (opt.mode == ReconMode::fixed_geometry_truth) {
        if (!truth)
            throw std::invalid_argument(
                "reconstruct: fixed_geometry_truth needs phantom provenance");
        opt.truth_alpha = fourier_project(
            [&](double phi) { return truth->boundary->radius(phi); },
            config.fourier_order);
        opt.truth_theta = truth->electrode_angles;
    }

    const ReconGrid grid(config.grid_radius, config.grid_h);
    ReconEngine engine(data, grid, opt);
    const ReconResult res = engine.run();

    RunReport report;
    report.config_hash = config.hash();
    report.mode = config.mode;
    report.sigma_star = res.sigma_star;
    report.phi_final = res.phi_final;
    report.misfit_final = res.misfit_final;
    report.stage1_iterations = res.stage1_iterations;
    report.stage2_iterations = res.stage2_iterations;
    report.warning = res.warning;

    const FourierBoundary recon_boundary(config.fourier_order, res.state.alpha);
    if (truth) {
        report.hausdorff = hausdorff_distance(*truth->boundary, recon_boundary);
        report.area_mismatch =
            boundary_area_mismatch(*truth->boundary, recon_boundary);
        report.sigma_rel_l2 = sigma_relative_l2_error(
            grid, res.state.sigma, *truth->boundary, truth->admittivity);
    }

    // artifacts: run log, final state, figures, report
    std::string log;
    for (const IterationRecord& r : res.history)
        log += nlohmann::json{{"stage", r.stage},
                              {"iteration", r.iteration},
                              {"phi", r.phi},
                              {"step_length", r.step_length},
                              {"step_norm", r.step_norm},
                              {"lambda", r.lambda},
                              {"accepted", r.accepted}}
                   .dump() +
               "\n";
    const std::string log_path = out_path(config, "runlog.jsonl");
    write_text_file(log_path, log, args.force);
    report.artifacts.push_back(log_path);

    nlohmann::json state{{"config_hash", config.hash()},
                         {"sigma_star", res.sigma_star},
                         {"alpha", std::vector<double>(res.state.alpha.begin(),
                                                       res.state.alpha.end())},
                         {"theta", std::vector<double>(res.state.theta.begin(),
                                                       res.state.theta.end())},
                         {"sigma", std::vector<double>(res.state.sigma.begin(),
                                                       res.state.sigma.end())}};
    const std::string state_path = out_path(config, "state.json");
    write_text_file(state_path, state.dump(2) + "\n", args.force);
    report.artifacts.push_back(state_path);

    // final-geometry forward evaluation provides the mesh for the heat map
    const ForwardEval fe(engine.model_config(), res.state, grid);
    const double vmax = std::max(2.0 * res.sigma_star, res.state.sigma.maxCoeff());
    const std::string heat =
        svg_heatmap(fe.mesh, fe.sigma_mesh, 0.0, vmax, config.hash());
    const std::string heat_path = out_path(config, "admittivity.svg");
    write_text_file(heat_path, heat, args.force);
    report.artifacts.push_back(heat_path);

    const std::string overlay =
        svg_boundary_overlay(truth ? truth->boundary.get() : nullptr, recon_boundary,
                             &fe.arcs, config.hash());
    const std::string overlay_path = out_path(config, "boundary.svg");
    write_text_file(overlay_path, overlay, args.force);
    report.artifacts.push_back(overlay_path);

    const std::string hist_path = out_path(config, "history.svg");
    write_text_file(hist_path, svg_phi_history(res.history, config.hash()),
                    args.force);
    report.artifacts.push_back(hist_path);

    const std::string report_path = out_path(config, "report.json");
    write_text_file(report_path, report.to_json().dump(2) + "\n", args.force);

    std::printf("mode             %s\n", config.mode.c_str());
    std::printf("sigma_star       %.6f\n", res.sigma_star);
    std::printf("phi_final        %.17g\n", res.phi_final);
    std::printf("misfit_final     %.6f\n", res.misfit_final);
    std::printf("iterations       stage1 %d, stage2 %d\n", res.stage1_iterations,
                res.stage2_iterations);
    if (truth) {
        std::printf("hausdorff        %.6f\n", report.hausdorff);
        std::printf("area mismatch    %.6f\n", report.area_mismatch);
        std::printf("sigma rel L2     %.6f\n", report.sigma_rel_l2);
    }
    if (res.warning)
        std::printf("warning: a stage stopped without clean convergence\n");
    std::printf("report           %s\n", report_path.c_str());
    return kExitOk;
}

int cmd_check_jacobians(const CommonArgs& args) {
    (void)resolve_config(args);  // validates config syntax if provided

    // documented coarse verification case: 8 electrodes, wavy order-2
    // boundary, perturbed angles, smooth admittivity bump
    ModelConfig c;
    c.m_count = 8;
    c.fourier_order = 2;
    c.width = 0.3;
    c.h_target = 0.22;
    c.z = Eigen::VectorXd::Constant(8, 0.8);
    c.provenance = "check";
    ModelState st;
    st.alpha = Eigen::VectorXd(5);
    st.alpha << 2.0, 0.25, 0.15, 0.12, -0.08;
    st.theta = Eigen::VectorXd(8);
    for (int m = 0; m < 8; ++m)
        st.theta[m] = 2.0 * StarCurve::pi() * m / 8 + 0.05 * std::sin(m + 1.0);
    const ReconGrid grid(3.0, 0.45);
    st.sigma.resize(grid.num_nodes());
    for (int k = 0; k < grid.num_nodes(); ++k) {
        const Vec2& p = grid.mesh().vertices[k];
        st.sigma[k] = 1.0 + 0.8 * std::exp(-(p - Vec2(0.5, -0.3)).squaredNorm());
    }

    const ForwardEval fe(c, st, grid);
    const JacobianBlocks jb = assemble_jacobians(fe, grid);

    bool breach = false;
    std::printf("%-8s %-6s %14s %14s %10s  %s\n", "block", "index", "analytic",
                "oracle", "rel err", "status");
    auto row = [&](const char* block, int index, const Eigen::VectorXd& analytic,
                   const Eigen::VectorXd& oracle, double tol) {
        const double err = (analytic - oracle).norm() / oracle.norm();
        const bool ok = err < tol;
        breach = breach || !ok;
        std::printf("%-8s %-6d %14.6e %14.6e %10.2e  %s\n", block, index,
                    analytic.norm(), oracle.norm(), err, ok ? "ok" : "FAIL");
    };

    int tested = 0;
    for (int k = 0; k < grid.num_nodes() && tested < 4; ++k) {
        if (grid.mesh().vertices[k].norm() > 1.2) continue;
        if (jb.J_sigma.col(k).norm() < 1e-8) continue;
        row("sigma", k, jb.J_sigma.col(k),
            fd_oracle(c, st, grid, ParamBlock::sigma, k, 1e-5), 1e-3);
        ++tested;
    }
    for (int l = 0; l < 5; ++l)
        row("alpha", l, jb.J_alpha.col(l),
            fd_oracle(c, st, grid, ParamBlock::alpha, l, 1e-4), 1e-2);
    for (int m : {0, 3, 6})
        row("theta", m, jb.J_theta.col(m),
            fd_oracle(c, st, grid, ParamBlock::theta, m, 1e-4), 1e-2);

    // quadratic-remainder (Taylor) order for shape directions
    double min_order = 1e300;
    for (int l : {0, 1, 4}) {
        double prev_rem = 0.0, prev_eps = 0.0;
        for (double eps : {1e-2, 5e-3, 2.5e-3}) {
            ModelState ns = st;
            ns.alpha[l] += eps;
            const Eigen::VectorXd pred = fe.measurement + eps * jb.J_alpha.col(l);
            const double rem = (morphed_measurement(fe, grid, ns) - pred).norm();
            if (prev_rem > 0.0)
                min_order = std::min(
                    min_order, std::log(prev_rem / rem) / std::log(prev_eps / eps));
            prev_rem = rem;
            prev_eps = eps;
        }
    }
    const bool taylor_ok = min_order >= 1.8;
    breach = breach || !taylor_ok;
    std::printf("shape Taylor remainder order: %.3f (threshold 1.8) %s\n", min_order,
                taylor_ok ? "ok" : "FAIL");

    return breach ? kExitThreshold : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "eit: admittivity / boundary-shape / electrode-position reconstruction "
        "under the complete electrode model"};
    app.require_subcommand(1);

    CommonArgs sim_args, rec_args, chk_args;
    CLI::App* sim = app.add_subcommand(
        "simulate", "generate noisy measurement data for a phantom");
    add_common(sim, sim_args);
    CLI::App* rec = app.add_subcommand(
        "reconstruct", "run the two-stage reconstruction on a data file");
    add_common(rec, rec_args);
    CLI::App* chk = app.add_subcommand(
        "check-jacobians", "verify analytic Jacobians against finite differences");
    add_common(chk, chk_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sim_args);
        if (rec->parsed()) return cmd_reconstruct(rec_args);
        if (chk->parsed()) return cmd_check_jacobians(chk_args);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    }
    return kExitValidation;
}
