#include "eitshape/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eitshape {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string sidecar_path(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    p.replace_extension(".json");
    return p.string();
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("run config: expected a JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "phantom") c.phantom = value.get<std::string>();
            else if (key == "data_path") c.data_path = value.get<std::string>();
            else if (key == "output_dir") c.output_dir = value.get<std::string>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "m_count") c.m_count = value.get<int>();
            else if (key == "fourier_order") c.fourier_order = value.get<int>();
            else if (key == "width") c.width = value.get<double>();
            else if (key == "h_target") c.h_target = value.get<double>();
            else if (key == "sim_h_target") c.sim_h_target = value.get<double>();
            else if (key == "grid_radius") c.grid_radius = value.get<double>();
            else if (key == "grid_h") c.grid_h = value.get<double>();
            else if (key == "z") c.z = value.get<double>();
            else if (key == "prior_a") c.prior_a = value.get<double>();
            else if (key == "prior_s") c.prior_s = value.get<double>();
            else if (key == "tau") c.tau = value.get<double>();
            else if (key == "corr_len") c.corr_len = value.get<double>();
            else if (key == "s_sigma_rel") c.s_sigma_rel = value.get<double>();
            else if (key == "c1") c.c1 = value.get<double>();
            else if (key == "c2") c.c2 = value.get<double>();
            else if (key == "stage1_max_iter") c.stage1_max_iter = value.get<int>();
            else if (key == "stage2_max_iter") c.stage2_max_iter = value.get<int>();
            else if (key == "phi_rel_tol") c.phi_rel_tol = value.get<double>();
            else if (key == "line_tol") c.line_tol = value.get<double>();
            else if (key == "sigma_min") c.sigma_min = value.get<double>();
            else if (key == "skip_stage1") c.skip_stage1 = value.get<bool>();
            else if (key == "sigma_star_fixed") c.sigma_star_fixed = value.get<double>();
            else if (key == "alpha0_radius") c.alpha0_radius = value.get<double>();
            else if (key == "mode") c.mode = value.get<std::string>();
            else
                throw std::invalid_argument("run config: unknown key \"" + key + "\"");
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("run config: bad value for \"" + key +
                                        "\": " + e.what());
        }
    }
    if (c.m_count < 2) throw std::invalid_argument("run config: m_count must be >= 2");
    if (c.fourier_order < 0)
        throw std::invalid_argument("run config: fourier_order must be >= 0");
    if (c.grid_radius <= 0.0 || c.grid_h <= 0.0)
        throw std::invalid_argument("run config: grid dimensions must be positive");
    if (c.z <= 0.0) throw std::invalid_argument("run config: z must be positive");
    c.recon_mode();  // validate the mode string
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("run config " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{{"phantom", phantom},
                          {"data_path", data_path},
                          {"output_dir", output_dir},
                          {"seed", seed},
                          {"m_count", m_count},
                          {"fourier_order", fourier_order},
                          {"width", width},
                          {"h_target", h_target},
                          {"sim_h_target", sim_h_target},
                          {"grid_radius", grid_radius},
                          {"grid_h", grid_h},
                          {"z", z},
                          {"prior_a", prior_a},
                          {"prior_s", prior_s},
                          {"tau", tau},
                          {"corr_len", corr_len},
                          {"s_sigma_rel", s_sigma_rel},
                          {"c1", c1},
                          {"c2", c2},
                          {"stage1_max_iter", stage1_max_iter},
                          {"stage2_max_iter", stage2_max_iter},
                          {"phi_rel_tol", phi_rel_tol},
                          {"line_tol", line_tol},
                          {"sigma_min", sigma_min},
                          {"skip_stage1", skip_stage1},
                          {"sigma_star_fixed", sigma_star_fixed},
                          {"alpha0_radius", alpha0_radius},
                          {"mode", mode}};
}

std::string RunConfig::hash() const { return hex16(fnv1a(to_json().dump())); }

ReconMode RunConfig::recon_mode() const {
    if (mode == "simultaneous") return ReconMode::simultaneous;
    if (mode == "fixed_geometry_truth") return ReconMode::fixed_geometry_truth;
    if (mode == "fixed_geometry_guess") return ReconMode::fixed_geometry_guess;
    throw std::invalid_argument("run config: unknown mode \"" + mode + "\"");
}

ReconOptions RunConfig::recon_options(double resolved_width) const {
    ReconOptions o;
    o.fourier_order = fourier_order;
    o.width = resolved_width;
    o.h_target = h_target;
    o.z = Eigen::VectorXd::Constant(m_count, z);
    o.prior_a = prior_a;
    o.prior_s = prior_s;
    o.tau = tau;
    o.corr_len = corr_len;
    o.s_sigma_rel = s_sigma_rel;
    o.stage1_max_iter = stage1_max_iter;
    o.stage2_max_iter = stage2_max_iter;
    o.phi_rel_tol = phi_rel_tol;
    o.line_tol = line_tol;
    o.sigma_min = sigma_min;
    o.skip_stage1 = skip_stage1;
    o.sigma_star_fixed = sigma_star_fixed;
    o.mode = recon_mode();
    o.alpha0 = Eigen::VectorXd::Zero(2 * fourier_order + 1);
    o.alpha0[0] = alpha0_radius;
    return o;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json j{{"config_hash", config_hash},
                     {"mode", mode},
                     {"sigma_star", sigma_star},
                     {"phi_final", phi_final},
                     {"misfit_final", misfit_final},
                     {"stage1_iterations", stage1_iterations},
                     {"stage2_iterations", stage2_iterations},
                     {"warning", warning},
                     {"artifacts", artifacts}};
    if (hausdorff >= 0.0) j["hausdorff"] = hausdorff;
    if (area_mismatch >= 0.0) j["area_mismatch"] = area_mismatch;
    if (sigma_rel_l2 >= 0.0) j["sigma_rel_l2"] = sigma_rel_l2;
    return j;
}

// ---------------------------------------------------------------------------
// file primitives

std::string format_sig17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content, bool force) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (!force && fs::exists(p))
        throw std::invalid_argument("refusing to overwrite existing file " + path +
                                    " (pass force)");
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void append_jsonl(const std::string& path, const nlohmann::json& line) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + path + " for appending");
    out << line.dump() << "\n";
}

// ---------------------------------------------------------------------------
// measurement data

std::string dataset_csv(const DataSet& d) {
    const int m = d.m_count;
    if (m < 2 || d.voltages.size() != m * (m - 1) ||
        d.noise_var.size() != d.voltages.size())
        throw std::invalid_argument("dataset_csv: inconsistent DataSet");
    std::ostringstream out;
    out << "drive_j,electrode_m,voltage,noise_std\n";
    for (int j = 0; j < m - 1; ++j)
        for (int e = 0; e < m; ++e) {
            const int row = j * m + e;
            out << (j + 1) << ',' << (e + 1) << ',' << format_sig17(d.voltages[row])
                << ',' << format_sig17(std::sqrt(d.noise_var[row])) << '\n';
        }
    return out.str();
}

DataSet parse_dataset_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "drive_j,electrode_m,voltage,noise_std")
        throw std::runtime_error("dataset CSV: bad or missing header");

    std::vector<double> volt, stddev;
    std::vector<int> drive, elec;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string f0, f1, f2, f3;
        if (!std::getline(row, f0, ',') || !std::getline(row, f1, ',') ||
            !std::getline(row, f2, ',') || !std::getline(row, f3))
            throw std::runtime_error("dataset CSV line " + std::to_string(lineno) +
                                     ": expected 4 fields");
        try {
            drive.push_back(std::stoi(f0));
            elec.push_back(std::stoi(f1));
            volt.push_back(std::stod(f2));
            stddev.push_back(std::stod(f3));
        } catch (const std::exception&) {
            throw std::runtime_error("dataset CSV line " + std::to_string(lineno) +
                                     ": malformed number");
        }
    }
    const std::size_t n = volt.size();
    // n = M (M - 1)
    const int m = static_cast<int>(std::lround(0.5 * (1.0 + std::sqrt(1.0 + 4.0 * n))));
    if (m < 2 || static_cast<std::size_t>(m) * (m - 1) != n)
        throw std::runtime_error("dataset CSV: row count is not M(M-1)");

    DataSet d;
    d.m_count = m;
    d.voltages.resize(n);
    d.noise_var.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int exp_drive = static_cast<int>(i) / m + 1;
        const int exp_elec = static_cast<int>(i) % m + 1;
        if (drive[i] != exp_drive || elec[i] != exp_elec)
            throw std::runtime_error("dataset CSV: rows out of drive-major order");
        if (!(stddev[i] > 0.0))
            throw std::runtime_error("dataset CSV: noise_std must be positive");
        d.voltages[i] = volt[i];
        d.noise_var[i] = stddev[i] * stddev[i];
    }
    return d;
}

nlohmann::json dataset_sidecar(const DataSet& d, const Phantom& phantom,
                               const std::string& config_hash) {
    const double perimeter = phantom.boundary->perimeter();
    return nlohmann::json{{"phantom", d.phantom_id},
                          {"seed", d.seed},
                          {"m_count", d.m_count},
                          {"mesh_h", d.mesh_h},
                          {"width", phantom.width},
                          {"coverage", phantom.m_count * phantom.width / perimeter},
                          {"perimeter", perimeter},
                          {"config_hash", config_hash}};
}

std::string write_dataset(const DataSet& d, const Phantom& phantom,
                          const std::string& csv_path, const std::string& config_hash,
                          bool force) {
    write_text_file(csv_path, dataset_csv(d), force);
    const std::string side = sidecar_path(csv_path);
    write_text_file(side, dataset_sidecar(d, phantom, config_hash).dump(2) + "\n", force);
    return side;
}

DataSet read_dataset(const std::string& csv_path, double* width) {
    DataSet d = parse_dataset_csv(read_text_file(csv_path));
    if (width) *width = 0.0;
    const std::string side = sidecar_path(csv_path);
    if (std::filesystem::exists(side)) {
        const nlohmann::json j = nlohmann::json::parse(read_text_file(side));
        d.phantom_id = j.value("phantom", std::string());
        d.seed = j.value("seed", std::uint64_t(0));
        d.mesh_h = j.value("mesh_h", 0.0);
        if (j.contains("m_count") && j["m_count"].get<int>() != d.m_count)
            throw std::runtime_error("dataset sidecar: m_count disagrees with CSV");
        if (width) *width = j.value("width", 0.0);
    }
    return d;
}

// ---------------------------------------------------------------------------
// meshes and figures

nlohmann::json mesh_json(const Mesh2D& mesh) {
    nlohmann::json verts = nlohmann::json::array();
    for (const Vec2& v : mesh.vertices) verts.push_back({v.x(), v.y()});
    nlohmann::json tris = nlohmann::json::array();
    for (const auto& t : mesh.triangles) tris.push_back({t[0], t[1], t[2]});
    nlohmann::json edges = nlohmann::json::array();
    for (const BoundaryEdge& e : mesh.boundary_edges)
        edges.push_back({{"v0", e.v0}, {"v1", e.v1}, {"tag", e.tag}});
    return nlohmann::json{{"vertices", verts},
                          {"triangles", tris},
                          {"boundary_edges", edges},
                          {"num_boundary_vertices", mesh.num_boundary_vertices},
                          {"provenance", mesh.provenance}};
}

namespace {

/// SVG scene in world coordinates with the y axis flipped to mathematical
/// orientation. Stroke widths are given in world units.
class SvgScene {
public:
    SvgScene(double minx, double miny, double maxx, double maxy,
             const std::string& config_hash) {
        const double mx = 0.05 * std::max(maxx - minx, maxy - miny);
        minx -= mx; maxx += mx; miny -= mx; maxy += mx;
        width_ = maxx - minx;
        height_ = maxy - miny;
        unit_ = std::max(width_, height_);
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
             << "viewBox=\"" << minx << ' ' << -maxy << ' ' << width_ << ' '
             << height_ << "\">\n";
        out_ << "<!-- config " << config_hash << " -->\n";
        out_ << "<rect x=\"" << minx << "\" y=\"" << -maxy << "\" width=\"" << width_
             << "\" height=\"" << height_ << "\" fill=\"white\"/>\n";
    }

    void polyline(const std::vector<Vec2>& pts, const std::string& color,
                  double stroke_rel, bool closed, bool dashed = false) {
        out_ << "<path d=\"";
        for (std::size_t i = 0; i < pts.size(); ++i)
            out_ << (i == 0 ? 'M' : 'L') << pts[i].x() << ' ' << -pts[i].y() << ' ';
        if (closed) out_ << 'Z';
        out_ << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
             << stroke_rel * unit_ << "\"";
        if (dashed)
            out_ << " stroke-dasharray=\"" << 0.02 * unit_ << ' ' << 0.012 * unit_
                 << "\"";
        out_ << "/>\n";
    }

    void polygon(const Vec2& a, const Vec2& b, const Vec2& c, const std::string& fill) {
        out_ << "<path d=\"M" << a.x() << ' ' << -a.y() << " L" << b.x() << ' '
             << -b.y() << " L" << c.x() << ' ' << -c.y() << " Z\" fill=\"" << fill
             << "\" stroke=\"" << fill << "\" stroke-width=\"" << 0.0005 * unit_
             << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, const std::string& color) {
        out_ << "<text x=\"" << x << "\" y=\"" << -y << "\" font-size=\""
             << 0.035 * unit_ << "\" fill=\"" << color
             << "\" font-family=\"sans-serif\">" << s << "</text>\n";
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

    double unit() const { return unit_; }

private:
    std::ostringstream out_;
    double width_ = 1.0, height_ = 1.0, unit_ = 1.0;
};

std::vector<Vec2> sample_curve(const StarCurve& c, int n) {
    std::vector<Vec2> pts(n);
    for (int i = 0; i < n; ++i)
        pts[i] = c.point(2.0 * StarCurve::pi() * i / n);
    return pts;
}

void expand_bbox(const std::vector<Vec2>& pts, double& minx, double& miny,
                 double& maxx, double& maxy) {
    for (const Vec2& p : pts) {
        minx = std::min(minx, p.x());
        maxx = std::max(maxx, p.x());
        miny = std::min(miny, p.y());
        maxy = std::max(maxy, p.y());
    }
}

/// Five-anchor perceptual color ramp (dark violet to yellow), t in [0, 1].
std::string ramp_color(double t) {
    static const int anchors[5][3] = {
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    t = std::min(1.0, std::max(0.0, t));
    const double x = t * 4.0;
    const int k = std::min(3, static_cast<int>(x));
    const double f = x - k;
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                  static_cast<int>(anchors[k][0] + f * (anchors[k + 1][0] - anchors[k][0])),
                  static_cast<int>(anchors[k][1] + f * (anchors[k + 1][1] - anchors[k][1])),
                  static_cast<int>(anchors[k][2] + f * (anchors[k + 1][2] - anchors[k][2])));
    return buf;
}

}  // namespace

std::string svg_mesh(const Mesh2D& mesh, const std::string& config_hash) {
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    expand_bbox(mesh.vertices, minx, miny, maxx, maxy);
    SvgScene svg(minx, miny, maxx, maxy, config_hash);
    for (const auto& t : mesh.triangles)
        svg.polyline({mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]},
                     "#888888", 0.0008, true);
    for (const BoundaryEdge& e : mesh.boundary_edges)
        svg.polyline({mesh.vertices[e.v0], mesh.vertices[e.v1]},
                     e.tag >= 0 ? "black" : "#cc4444", e.tag >= 0 ? 0.006 : 0.002,
                     false);
    return svg.finish();
}

std::string svg_boundary_overlay(const StarCurve* truth, const StarCurve& recon,
                                 const ElectrodeArcs* arcs,
                                 const std::string& config_hash) {
    const int n = 512;
    const std::vector<Vec2> rec = sample_curve(recon, n);
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    expand_bbox(rec, minx, miny, maxx, maxy);
    std::vector<Vec2> tru;
    if (truth) {
        tru = sample_curve(*truth, n);
        expand_bbox(tru, minx, miny, maxx, maxy);
    }
    SvgScene svg(minx, miny, maxx, maxy, config_hash);
    if (truth) {
        svg.polyline(tru, "red", 0.004, true);
        svg.text(minx, maxy - 0.02 * svg.unit(), "true boundary", "red");
    }
    svg.polyline(rec, "blue", 0.004, true, true);
    svg.text(minx, maxy - 0.06 * svg.unit(), "reconstruction", "blue");
    if (arcs) {
        for (std::size_t m = 0; m < arcs->start.size(); ++m) {
            std::vector<Vec2> arc;
            for (int i = 0; i <= 16; ++i)
                arc.push_back(recon.point(arcs->start[m] +
                                          (arcs->end[m] - arcs->start[m]) * i / 16.0));
            svg.polyline(arc, "black", 0.012, false);
        }
    }
    return svg.finish();
}

std::string svg_heatmap(const Mesh2D& mesh, const Eigen::VectorXd& vertex_values,
                        double vmin, double vmax, const std::string& config_hash) {
    if (vertex_values.size() != static_cast<int>(mesh.vertices.size()))
        throw std::invalid_argument("svg_heatmap: one value per vertex required");
    if (!(vmax > vmin)) throw std::invalid_argument("svg_heatmap: empty color range");
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    expand_bbox(mesh.vertices, minx, miny, maxx, maxy);
    SvgScene svg(minx, miny, maxx, maxy, config_hash);
    for (const auto& t : mesh.triangles) {
        const double mean =
            (vertex_values[t[0]] + vertex_values[t[1]] + vertex_values[t[2]]) / 3.0;
        svg.polygon(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]],
                    ramp_color((mean - vmin) / (vmax - vmin)));
    }
    svg.text(minx, miny + 0.01 * svg.unit(),
             "scale " + format_sig17(vmin) + " .. " + format_sig17(vmax), "black");
    return svg.finish();
}

std::string svg_phi_history(const std::vector<IterationRecord>& history,
                            const std::string& config_hash) {
    std::vector<double> logphi;
    int stage2_start = -1;
    for (const IterationRecord& r : history) {
        if (r.stage == 2 && stage2_start < 0)
            stage2_start = static_cast<int>(logphi.size());
        logphi.push_back(std::log10(std::max(r.phi, 1e-300)));
    }
    const int n = static_cast<int>(logphi.size());
    double lo = 0.0, hi = 1.0;
    if (n > 0) {
        lo = *std::min_element(logphi.begin(), logphi.end());
        hi = *std::max_element(logphi.begin(), logphi.end());
        if (hi - lo < 1e-9) hi = lo + 1.0;
    }
    SvgScene svg(0.0, lo, std::max(n - 1, 1) * 1.0, hi, config_hash);
    // frame
    svg.polyline({{0.0, lo}, {std::max(n - 1, 1) * 1.0, lo},
                  {std::max(n - 1, 1) * 1.0, hi}, {0.0, hi}},
                 "#aaaaaa", 0.002, true);
    std::vector<Vec2> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(i, logphi[i]);
    if (!pts.empty()) svg.polyline(pts, "blue", 0.004, false);
    if (stage2_start > 0)
        svg.polyline({{stage2_start - 0.5, lo}, {stage2_start - 0.5, hi}}, "#888888",
                     0.002, false, true);
    svg.text(0.0, hi + 0.01 * svg.unit(), "log10 objective per iteration", "black");
    return svg.finish();
}

// ---------------------------------------------------------------------------
// metrics

double hausdorff_distance(const StarCurve& a, const StarCurve& b, int samples) {
    const std::vector<Vec2> pa = sample_curve(a, samples);
    const std::vector<Vec2> pb = sample_curve(b, samples);
    auto one_sided = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
        double worst = 0.0;
        for (const Vec2& p : from) {
            double best = 1e300;
            for (const Vec2& q : to) best = std::min(best, (p - q).squaredNorm());
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(one_sided(pa, pb), one_sided(pb, pa));
}

double boundary_area_mismatch(const StarCurve& a, const StarCurve& b, int samples) {
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double phi = 2.0 * StarCurve::pi() * i / samples;
        const double ra = a.radius(phi), rb = b.radius(phi);
        acc += 0.5 * std::abs(ra * ra - rb * rb);
    }
    return acc * 2.0 * StarCurve::pi() / samples;
}

double sigma_relative_l2_error(const ReconGrid& grid, const Eigen::VectorXd& sigma,
                               const StarCurve& truth,
                               const std::function<double(const Vec2&)>& truth_field) {
    const int nphi = 512, nr = 64;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < nphi; ++i) {
        const double phi = 2.0 * StarCurve::pi() * (i + 0.5) / nphi;
        const double r = truth.radius(phi);
        const double dr = r / nr;
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < nr; ++k) {
            const double rho = (k + 0.5) * dr;
            const Vec2 p(rho * c, rho * s);
            const auto loc = grid.locate(p);
            const auto& tri = grid.mesh().triangles[loc.triangle];
            double rec = 0.0;
            for (int v = 0; v < 3; ++v) rec += loc.bary[v] * sigma[tri[v]];
            const double tru = truth_field(p);
            const double w = rho * dr;
            num += w * (rec - tru) * (rec - tru);
            den += w * tru * tru;
        }
    }
    return std::sqrt(num / den);
}

}  // namespace eitshape
