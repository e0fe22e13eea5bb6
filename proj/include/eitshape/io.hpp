#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitshape/phantoms.hpp"
#include "eitshape/recon.hpp"

namespace eitshape {

/// Complete configuration of one simulation or reconstruction run. Every
/// field has a documented default (see README); JSON loading rejects unknown
/// keys so typos cannot silently fall back to defaults.
struct RunConfig {
    // data source / sink
    std::string phantom = "exp1";  // exp1 | exp2 | exp3
    std::string data_path;         // reconstruct: CSV produced by simulate
    std::string output_dir = "out";
    std::uint64_t seed = 1;        // phantom perturbation and noise stream

    // model discretization
    int m_count = 16;
    int fourier_order = 15;
    double width = 0.0;        // <= 0: the phantom's documented default
    double h_target = 0.0;     // recon mesh spacing; <= 0: perimeter / 200
    double sim_h_target = 0.0; // simulation mesh spacing; <= 0: perimeter / 500
    double grid_radius = 4.0;  // admittivity grid radius
    double grid_h = 0.35;      // admittivity grid spacing
    double z = 1.0;            // common contact impedance

    // priors
    double prior_a = 1.0;
    double prior_s = 1.0;
    double tau = 2.0 * StarCurve::pi() / 16.0;
    double corr_len = 0.6;
    double s_sigma_rel = 0.5;

    // noise model
    double c1 = 0.01;
    double c2 = 0.001;

    // optimization
    int stage1_max_iter = 25;
    int stage2_max_iter = 30;
    double phi_rel_tol = 1e-4;
    double line_tol = 1e-3;
    double sigma_min = 1e-3;
    bool skip_stage1 = false;
    double sigma_star_fixed = 0.0;  // > 0: known homogeneous admittivity
    double alpha0_radius = 2.7;     // initial boundary guess: circle radius
    std::string mode = "simultaneous";  // | fixed_geometry_truth | fixed_geometry_guess

    /// Throws std::invalid_argument on unknown keys or malformed values.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);

    nlohmann::json to_json() const;
    /// 16-hex-digit FNV-1a hash of the canonical JSON serialization; stamped
    /// into every output artifact.
    std::string hash() const;

    ReconMode recon_mode() const;  // throws on an unknown mode string
    /// Engine options with the electrode width resolved to a concrete value.
    ReconOptions recon_options(double resolved_width) const;
};

/// Final metrics of a reconstruction run. Truth-comparison fields are
/// negative when no ground truth is available (external data).
struct RunReport {
    std::string config_hash;
    std::string mode;
    double sigma_star = 0.0;
    double phi_final = 0.0;
    double misfit_final = 0.0;
    int stage1_iterations = 0;
    int stage2_iterations = 0;
    bool warning = false;      // a stage ended without clean convergence
    double hausdorff = -1.0;   // symmetric Hausdorff distance to the true boundary
    double area_mismatch = -1.0;  // area of the boundary symmetric difference
    double sigma_rel_l2 = -1.0;   // relative L2 admittivity error on the true domain
    std::vector<std::string> artifacts;  // paths of emitted files

    nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// file primitives

/// Shortest decimal form with 17 significant digits (round-trip exact).
std::string format_sig17(double v);

/// Writes `content`; refuses to overwrite an existing file unless `force`.
void write_text_file(const std::string& path, const std::string& content, bool force);

std::string read_text_file(const std::string& path);

/// Appends one compact JSON object plus newline (JSONL log).
void append_jsonl(const std::string& path, const nlohmann::json& line);

// ---------------------------------------------------------------------------
// measurement data

/// CSV serialization, header "drive_j,electrode_m,voltage,noise_std",
/// one row per measurement in drive-major order, 1-based indices,
/// 17-significant-digit values. Byte-deterministic.
std::string dataset_csv(const DataSet& d);

DataSet parse_dataset_csv(const std::string& text);

/// Sidecar metadata written next to the CSV (same stem, .json).
nlohmann::json dataset_sidecar(const DataSet& d, const Phantom& phantom,
                               const std::string& config_hash);

/// Writes CSV plus sidecar; returns the sidecar path.
std::string write_dataset(const DataSet& d, const Phantom& phantom,
                          const std::string& csv_path, const std::string& config_hash,
                          bool force);

/// Reads a CSV (and its sidecar when present, filling phantom_id / seed /
/// mesh_h; *width receives the sidecar electrode width or 0).
DataSet read_dataset(const std::string& csv_path, double* width = nullptr);

// ---------------------------------------------------------------------------
// meshes and figures (SVG strings; write with write_text_file)

nlohmann::json mesh_json(const Mesh2D& mesh);

std::string svg_mesh(const Mesh2D& mesh, const std::string& config_hash);

/// True boundary (red, solid; optional) vs reconstructed boundary (blue,
/// dashed) with the reconstructed electrode arcs in black.
std::string svg_boundary_overlay(const StarCurve* truth, const StarCurve& recon,
                                 const ElectrodeArcs* arcs,
                                 const std::string& config_hash);

/// Per-triangle filled heat map of a P1 vertex field. Fixed linear color
/// scale over [vmin, vmax] through the five documented anchor colors
/// (dark violet - blue - teal - green - yellow); values are clamped.
std::string svg_heatmap(const Mesh2D& mesh, const Eigen::VectorXd& vertex_values,
                        double vmin, double vmax, const std::string& config_hash);

/// Objective history on a log10 axis, stage-2 onset marked.
std::string svg_phi_history(const std::vector<IterationRecord>& history,
                            const std::string& config_hash);

// ---------------------------------------------------------------------------
// truth-comparison metrics

/// Symmetric Hausdorff distance between two closed curves, dense sampling.
double hausdorff_distance(const StarCurve& a, const StarCurve& b, int samples = 720);

/// Area of the symmetric difference of the two enclosed star-shaped regions
/// (shared center): 1/2 int |r_a^2 - r_b^2| dphi.
double boundary_area_mismatch(const StarCurve& a, const StarCurve& b,
                              int samples = 4096);

/// || sigma - sigma_true ||_L2(D_true) / || sigma_true ||_L2(D_true), with the
/// reconstructed field interpolated off the grid; polar tensor quadrature
/// over the true domain.
double sigma_relative_l2_error(const ReconGrid& grid, const Eigen::VectorXd& sigma,
                               const StarCurve& truth,
                               const std::function<double(const Vec2&)>& truth_field);

}  // namespace eitshape
