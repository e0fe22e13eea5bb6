#include "eitshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>

namespace eitshape {

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

// Deterministic tiny jitter to break lattice cocircularity.
double hash_unit(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return static_cast<double>(k % 2000001) / 1000000.0 - 1.0;  // [-1, 1]
}

struct CircumCache {
    double cx, cy, r2;
};

CircumCache circumcircle(const Vec2& a, const Vec2& b, const Vec2& c) {
    const long double ax = a.x(), ay = a.y();
    const long double bx = b.x() - ax, by = b.y() - ay;
    const long double cx = c.x() - ax, cy = c.y() - ay;
    const long double d = 2.0L * (bx * cy - by * cx);
    const long double b2 = bx * bx + by * by;
    const long double c2 = cx * cx + cy * cy;
    const long double ux = (cy * b2 - by * c2) / d;
    const long double uy = (bx * c2 - cx * b2) / d;
    CircumCache cc;
    cc.cx = static_cast<double>(ax + ux);
    cc.cy = static_cast<double>(ay + uy);
    cc.r2 = static_cast<double>(ux * ux + uy * uy);
    return cc;
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly, int n) {
    // crossing number over the first n vertices forming a closed loop
    bool inside = false;
    for (int i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& vi = poly[i];
        const Vec2& vj = poly[j];
        if (((vi.y() > p.y()) != (vj.y() > p.y())) &&
            (p.x() < (vj.x() - vi.x()) * (p.y() - vi.y()) / (vj.y() - vi.y()) + vi.x()))
            inside = !inside;
    }
    return inside;
}

double dist_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double t = std::clamp(ab.dot(p - a) / ab.squaredNorm(), 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

struct BoundarySample {
    std::vector<Vec2> points;
    std::vector<double> phi;
    std::vector<int> edge_tags;  // tag of edge (i, i+1 mod n)
};

// Splits each boundary interval into equal-arc-length segments of size
// <= h_target; interval endpoints (electrode endpoints) become vertices.
BoundarySample sample_boundary(const StarCurve& curve, const std::vector<double>& knots,
                               const std::vector<int>& tags, double h_target) {
    BoundarySample bs;
    const int n_int = static_cast<int>(tags.size());
    for (int k = 0; k < n_int; ++k) {
        const double a = knots[k];
        const double b = knots[k + 1];
        const double len = curve.arclength(a, b);
        const int n = std::max(1, static_cast<int>(std::ceil(len / h_target - 1e-9)));
        double phi = a;
        for (int i = 0; i < n; ++i) {
            bs.points.push_back(curve.point(phi));
            bs.phi.push_back(phi);
            bs.edge_tags.push_back(tags[k]);
            phi = (i + 1 == n) ? b : curve.terminal_angle(phi, len / n);
        }
    }
    return bs;
}

}  // namespace

double Mesh2D::triangle_area(int t) const {
    const auto& tri = triangles[t];
    return signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

double Mesh2D::total_area() const {
    double a = 0.0;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) a += triangle_area(t);
    return a;
}

double Mesh2D::min_angle_deg() const {
    double worst = 180.0;
    for (const auto& tri : triangles) {
        for (int i = 0; i < 3; ++i) {
            const Vec2& a = vertices[tri[i]];
            const Vec2& b = vertices[tri[(i + 1) % 3]];
            const Vec2& c = vertices[tri[(i + 2) % 3]];
            const Vec2 u = b - a, v = c - a;
            const double ang =
                std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
            worst = std::min(worst, ang * 180.0 / StarCurve::pi());
        }
    }
    return worst;
}

int Mesh2D::boundary_vertex_at(double phi) const {
    for (int i = 0; i < num_boundary_vertices; ++i) {
        if (std::abs(boundary_phi[i] - phi) < 1e-9) return i;
    }
    return -1;
}

std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 3) throw std::invalid_argument("delaunay: need at least 3 points");

    Vec2 lo = points[0], hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double span = std::max((hi - lo).maxCoeff(), 1e-12);
    const Vec2 mid = 0.5 * (lo + hi);

    std::vector<Vec2> pts = points;
    pts.push_back(mid + Vec2(-40.0 * span, -20.0 * span));
    pts.push_back(mid + Vec2(40.0 * span, -20.0 * span));
    pts.push_back(mid + Vec2(0.0, 40.0 * span));

    struct Tri {
        std::array<int, 3> v;
        CircumCache cc;
        bool alive;
    };
    std::vector<Tri> tris;
    auto add_tri = [&](int a, int b, int c) {
        if (signed_area(pts[a], pts[b], pts[c]) < 0.0) std::swap(b, c);
        tris.push_back({{a, b, c}, circumcircle(pts[a], pts[b], pts[c]), true});
    };
    add_tri(n, n + 1, n + 2);

    // exact-ish in-circle predicate for the near-degenerate cases the cached
    // circumcircle cannot decide (long double determinant, CCW triangle)
    auto in_circle = [&](const Tri& t, const Vec2& p) -> bool {
        const double dx = p.x() - t.cc.cx;
        const double dy = p.y() - t.cc.cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 < t.cc.r2 * (1.0 - 1e-7)) return true;
        if (d2 > t.cc.r2 * (1.0 + 1e-7)) return false;
        const Vec2& a = pts[t.v[0]];
        const Vec2& b = pts[t.v[1]];
        const Vec2& c = pts[t.v[2]];
        const long double adx = a.x() - p.x(), ady = a.y() - p.y();
        const long double bdx = b.x() - p.x(), bdy = b.y() - p.y();
        const long double cdx = c.x() - p.x(), cdy = c.y() - p.y();
        const long double det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) -
                                (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady) +
                                (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
        return det > 0.0L;
    };

    // deterministic shuffled insertion order avoids the pathological
    // incremental configurations of curve-ordered point streams
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    for (int i = n - 1; i > 0; --i) {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        const int j = static_cast<int>((state >> 33) % static_cast<std::uint64_t>(i + 1));
        std::swap(order[i], order[j]);
    }

    std::vector<int> bad;
    for (int ip : order) {
        const Vec2& p = pts[ip];
        bad.clear();
        for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
            if (!tris[t].alive) continue;
            if (in_circle(tris[t], p)) bad.push_back(t);
        }
        // cavity boundary: edges used exactly once among bad triangles
        std::map<std::pair<int, int>, int> edge_count;
        for (int t : bad) {
            const auto& v = tris[t].v;
            for (int e = 0; e < 3; ++e) {
                int a = v[e], b = v[(e + 1) % 3];
                auto key = std::minmax(a, b);
                edge_count[{key.first, key.second}]++;
            }
            tris[t].alive = false;
        }
        for (int t : bad) {
            const std::array<int, 3> v = tris[t].v;  // copy: add_tri may reallocate
            for (int e = 0; e < 3; ++e) {
                int a = v[e], b = v[(e + 1) % 3];
                auto key = std::minmax(a, b);
                if (edge_count[{key.first, key.second}] == 1) add_tri(ip, a, b);
            }
        }
    }

    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris) {
        if (!t.alive) continue;
        if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
        out.push_back(t.v);
    }
    return out;
}

namespace {

Mesh2D build_from_boundary(const StarCurve& curve, const BoundarySample& bs,
                           const MeshOptions& opt) {
    const int nb = static_cast<int>(bs.points.size());
    if (nb < 8) throw std::runtime_error("build_mesh: boundary sampling too coarse");

    Vec2 lo = bs.points[0], hi = bs.points[0];
    for (const auto& p : bs.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }

    const double h = opt.h_target;
    const std::array<double, 3> margins = {0.70, 0.55, 0.90};
    std::string last_error = "build_mesh: no attempt made";

    for (double margin : margins) {
        std::vector<Vec2> pts = bs.points;
        // hexagonal interior lattice
        const double dy = h * std::sqrt(3.0) / 2.0;
        int row = 0;
        for (double y = lo.y() + 0.4 * h; y < hi.y(); y += dy, ++row) {
            const double x0 = lo.x() + ((row % 2) ? 0.5 * h : 0.0);
            int col = 0;
            for (double x = x0; x < hi.x(); x += h, ++col) {
                Vec2 p(x, y);
                p.x() += 1e-5 * h * hash_unit(static_cast<std::uint64_t>(row) * 92821u + col);
                p.y() += 1e-5 * h * hash_unit(static_cast<std::uint64_t>(col) * 68917u + row + 7u);
                if (!point_in_polygon(p, bs.points, nb)) continue;
                double dmin = 1e300;
                for (int i = 0; i < nb; ++i)
                    dmin = std::min(dmin,
                                    dist_to_segment(p, bs.points[i], bs.points[(i + 1) % nb]));
                if (dmin < margin * h) continue;
                pts.push_back(p);
            }
        }

        std::vector<std::array<int, 3>> tris;
        try {
            tris = delaunay_triangulate(pts);
        } catch (const std::exception& e) {
            last_error = e.what();
            continue;
        }

        // keep triangles inside the boundary polygon
        std::vector<std::array<int, 3>> kept;
        for (const auto& t : tris) {
            const Vec2 c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
            if (point_in_polygon(c, bs.points, nb)) kept.push_back(t);
        }

        // all boundary polyline segments must appear as edges
        std::set<std::pair<int, int>> edges;
        for (const auto& t : kept)
            for (int e = 0; e < 3; ++e) {
                auto key = std::minmax(t[e], t[(e + 1) % 3]);
                edges.insert({key.first, key.second});
            }
        bool boundary_ok = true;
        for (int i = 0; i < nb; ++i) {
            const int j = (i + 1) % nb;
            const auto key = std::minmax(i, j);
            if (!edges.count({key.first, key.second})) {
                boundary_ok = false;
                break;
            }
        }
        if (!boundary_ok) {
            last_error = "build_mesh: boundary edge lost in triangulation";
            continue;
        }

        // Laplacian smoothing of interior vertices, fixed connectivity
        std::vector<std::vector<int>> nbrs(pts.size());
        for (const auto& t : kept)
            for (int e = 0; e < 3; ++e) {
                nbrs[t[e]].push_back(t[(e + 1) % 3]);
                nbrs[t[e]].push_back(t[(e + 2) % 3]);
            }
        std::vector<std::vector<int>> v2t(pts.size());
        for (int ti = 0; ti < static_cast<int>(kept.size()); ++ti)
            for (int e = 0; e < 3; ++e) v2t[kept[ti][e]].push_back(ti);
        for (int pass = 0; pass < 4; ++pass) {
            for (int v = nb; v < static_cast<int>(pts.size()); ++v) {
                if (nbrs[v].empty()) continue;
                Vec2 avg = Vec2::Zero();
                for (int w : nbrs[v]) avg += pts[w];
                avg /= static_cast<double>(nbrs[v].size());
                const Vec2 old = pts[v];
                pts[v] = avg;
                for (int ti : v2t[v]) {
                    const auto& t = kept[ti];
                    if (signed_area(pts[t[0]], pts[t[1]], pts[t[2]]) < 1e-14) {
                        pts[v] = old;
                        break;
                    }
                }
            }
        }

        Mesh2D mesh;
        mesh.vertices = std::move(pts);
        mesh.triangles = std::move(kept);
        mesh.num_boundary_vertices = nb;
        mesh.boundary_phi = bs.phi;
        mesh.provenance = opt.provenance;
        for (int i = 0; i < nb; ++i) {
            BoundaryEdge be;
            be.v0 = i;
            be.v1 = (i + 1) % nb;
            be.tag = bs.edge_tags[i];
            be.phi0 = bs.phi[i];
            be.phi1 = (i + 1 < nb) ? bs.phi[i + 1] : bs.phi[0] + 2.0 * StarCurve::pi();
            mesh.boundary_edges.push_back(be);
        }

        bool positive = true;
        for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
            if (mesh.triangle_area(t) <= 0.0) positive = false;
        if (!positive) {
            last_error = "build_mesh: inverted triangle after smoothing";
            continue;
        }
        if (mesh.min_angle_deg() < opt.min_angle_deg) {
            last_error = "build_mesh: minimum angle below quality threshold";
            continue;
        }
        return mesh;
    }
    (void)curve;
    throw std::runtime_error(last_error);
}

}  // namespace

Mesh2D build_mesh(const StarCurve& curve, const ElectrodeArcs& arcs, const MeshOptions& opt) {
    const int m_count = static_cast<int>(arcs.start.size());
    if (m_count == 0) {
        std::vector<double> knots = {0.0, 2.0 * StarCurve::pi()};
        std::vector<int> tags = {-1};
        return build_from_boundary(curve, sample_boundary(curve, knots, tags, opt.h_target),
                                   opt);
    }
    std::vector<double> knots;
    std::vector<int> tags;
    for (int m = 0; m < m_count; ++m) {
        knots.push_back(arcs.start[m]);
        tags.push_back(m);
        knots.push_back(arcs.end[m]);
        tags.push_back(-1);
    }
    knots.push_back(arcs.start[0] + 2.0 * StarCurve::pi());
    return build_from_boundary(curve, sample_boundary(curve, knots, tags, opt.h_target), opt);
}

namespace {
class CircleCurve : public StarCurve {
public:
    explicit CircleCurve(double r) : r_(r) {}
    double radius(double) const override { return r_; }
    double radius_d1(double) const override { return 0.0; }
    double radius_d2(double) const override { return 0.0; }

private:
    double r_;
};
}  // namespace

Mesh2D build_disk_mesh(double radius, const MeshOptions& opt) {
    CircleCurve circle(radius);
    ElectrodeArcs none;
    return build_mesh(circle, none, opt);
}

ReconGrid::ReconGrid(double radius, double h_target) : radius_(radius) {
    MeshOptions opt;
    opt.h_target = h_target;
    opt.provenance = "recon-grid";
    mesh_ = build_disk_mesh(radius, opt);
    build_bins();
}

void ReconGrid::build_bins() {
    Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
    for (const auto& p : mesh_.vertices) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    lo_ = lo - Vec2(1e-9, 1e-9);
    double diam = (hi - lo).maxCoeff();
    bin_size_ = diam / 64.0;
    nx_ = static_cast<int>(std::ceil((hi.x() - lo_.x()) / bin_size_)) + 1;
    ny_ = static_cast<int>(std::ceil((hi.y() - lo_.y()) / bin_size_)) + 1;
    bins_.assign(static_cast<size_t>(nx_) * ny_, {});
    for (int t = 0; t < static_cast<int>(mesh_.triangles.size()); ++t) {
        const auto& tri = mesh_.triangles[t];
        Vec2 tlo = mesh_.vertices[tri[0]], thi = tlo;
        for (int k = 1; k < 3; ++k) {
            tlo = tlo.cwiseMin(mesh_.vertices[tri[k]]);
            thi = thi.cwiseMax(mesh_.vertices[tri[k]]);
        }
        const int i0 = std::max(0, static_cast<int>((tlo.x() - lo_.x()) / bin_size_));
        const int i1 = std::min(nx_ - 1, static_cast<int>((thi.x() - lo_.x()) / bin_size_));
        const int j0 = std::max(0, static_cast<int>((tlo.y() - lo_.y()) / bin_size_));
        const int j1 = std::min(ny_ - 1, static_cast<int>((thi.y() - lo_.y()) / bin_size_));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) bins_[static_cast<size_t>(j) * nx_ + i].push_back(t);
    }
}

ReconGrid::Location ReconGrid::locate(const Vec2& p) const {
    const int i = static_cast<int>((p.x() - lo_.x()) / bin_size_);
    const int j = static_cast<int>((p.y() - lo_.y()) / bin_size_);
    auto try_tri = [&](int t, double tol) -> bool {
        const auto& tri = mesh_.triangles[t];
        const Vec2& a = mesh_.vertices[tri[0]];
        const Vec2& b = mesh_.vertices[tri[1]];
        const Vec2& c = mesh_.vertices[tri[2]];
        const double area = signed_area(a, b, c);
        const double l0 = signed_area(p, b, c) / area;
        const double l1 = signed_area(a, p, c) / area;
        const double l2 = 1.0 - l0 - l1;
        return l0 >= -tol && l1 >= -tol && l2 >= -tol;
    };
    auto bary_of = [&](int t) -> Location {
        const auto& tri = mesh_.triangles[t];
        const Vec2& a = mesh_.vertices[tri[0]];
        const Vec2& b = mesh_.vertices[tri[1]];
        const Vec2& c = mesh_.vertices[tri[2]];
        const double area = signed_area(a, b, c);
        const double l0 = signed_area(p, b, c) / area;
        const double l1 = signed_area(a, p, c) / area;
        return {t, {l0, l1, 1.0 - l0 - l1}};
    };
    for (double tol : {1e-12, 1e-8, 1e-5}) {
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                const int ii = i + di, jj = j + dj;
                if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
                for (int t : bins_[static_cast<size_t>(jj) * nx_ + ii])
                    if (try_tri(t, tol)) return bary_of(t);
            }
    }
    throw std::runtime_error("ReconGrid::locate: point outside reconstruction grid");
}

Eigen::SparseMatrix<double> ReconGrid::interpolation_matrix(
    const std::vector<Vec2>& points) const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(points.size() * 3);
    for (int r = 0; r < static_cast<int>(points.size()); ++r) {
        const Location loc = locate(points[r]);
        const auto& tri = mesh_.triangles[loc.triangle];
        for (int k = 0; k < 3; ++k) trips.emplace_back(r, tri[k], loc.bary[k]);
    }
    Eigen::SparseMatrix<double> T(static_cast<int>(points.size()), num_nodes());
    T.setFromTriplets(trips.begin(), trips.end());
    return T;
}

Eigen::VectorXd transfer(const ReconGrid& grid, const Eigen::VectorXd& coeffs,
                         const Mesh2D& dst) {
    if (coeffs.size() != grid.num_nodes())
        throw std::invalid_argument("transfer: coefficient vector size mismatch");
    return grid.interpolation_matrix(dst.vertices) * coeffs;
}

}  // namespace eitshape
