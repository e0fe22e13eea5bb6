#include <cmath>
#include <set>

#include "doctest.h"
#include "eitshape/mesh.hpp"

using namespace eitshape;

namespace {

const double kPi = StarCurve::pi();

FourierBoundary unit_circle() {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(1);
    a[0] = 1.0;
    return FourierBoundary(0, a);
}

FourierBoundary wavy_curve() {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(9);
    a[0] = 2.0;
    a[1] = 0.25;
    a[2] = 0.15;
    a[3] = -0.1;
    a[6] = 0.12;
    a[8] = -0.08;
    return FourierBoundary(4, a);
}

ElectrodeLayout equispaced_layout(int m_count, double w) {
    Eigen::VectorXd th(m_count);
    for (int m = 0; m < m_count; ++m) th[m] = 2 * kPi * m / m_count;
    return ElectrodeLayout(th, w);
}

double polygon_area(const Mesh2D& mesh) {
    double a = 0.0;
    const int nb = mesh.num_boundary_vertices;
    for (int i = 0; i < nb; ++i) {
        const Vec2& p = mesh.vertices[i];
        const Vec2& q = mesh.vertices[(i + 1) % nb];
        a += 0.5 * (p.x() * q.y() - p.y() * q.x());
    }
    return a;
}

}  // namespace

TEST_CASE("disk mesh with 16 electrodes meets the construction postconditions") {
    const auto b = unit_circle();
    // unit circle cannot fit 16 electrodes of width 0.3 (needs perimeter 4.8 < 2pi? it does fit: 4.8 < 6.28)
    const auto layout = equispaced_layout(16, 0.3);
    const auto arcs = electrode_arcs(b, layout);
    MeshOptions opt;
    opt.h_target = 0.1;
    const Mesh2D mesh = build_mesh(b, arcs, opt);

    CHECK(mesh.num_boundary_vertices >= static_cast<int>(2 * kPi / 0.1));
    CHECK(mesh.min_angle_deg() >= 15.0);
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
        CHECK(mesh.triangle_area(t) > 0.0);

    // boundary edges form a single closed loop in order
    const int nb = mesh.num_boundary_vertices;
    CHECK(static_cast<int>(mesh.boundary_edges.size()) == nb);
    for (int i = 0; i < nb; ++i) {
        CHECK(mesh.boundary_edges[i].v0 == i);
        CHECK(mesh.boundary_edges[i].v1 == (i + 1) % nb);
    }

    // electrode endpoints coincide with mesh vertices
    for (int m = 0; m < 16; ++m) {
        CHECK(mesh.boundary_vertex_at(arcs.start[m]) >= 0);
        const int ve = mesh.boundary_vertex_at(arcs.end[m]);
        REQUIRE(ve >= 0);
        CHECK((mesh.vertices[ve] - b.point(arcs.end[m])).norm() < 1e-12);
    }
}

TEST_CASE("electrode curve arc lengths sum to the electrode width") {
    const auto b = wavy_curve();
    const auto layout = equispaced_layout(16, 0.3);
    const auto arcs = electrode_arcs(b, layout);
    MeshOptions opt;
    opt.h_target = b.perimeter() / 200.0;
    const Mesh2D mesh = build_mesh(b, arcs, opt);

    for (int m = 0; m < 16; ++m) {
        double total = 0.0;
        for (const auto& be : mesh.boundary_edges)
            if (be.tag == m) total += b.arclength(be.phi0, be.phi1);
        CHECK(total == doctest::Approx(0.3).epsilon(1e-6 / 0.3));
    }
}

TEST_CASE("halving h_target roughly doubles the boundary vertex count") {
    const auto b = wavy_curve();
    const auto layout = equispaced_layout(16, 0.3);
    const auto arcs = electrode_arcs(b, layout);
    MeshOptions coarse, fine;
    coarse.h_target = 0.12;
    fine.h_target = 0.06;
    const int nc = build_mesh(b, arcs, coarse).num_boundary_vertices;
    const int nf = build_mesh(b, arcs, fine).num_boundary_vertices;
    CHECK(nf > 1.6 * nc);
    CHECK(nf < 2.4 * nc);
}

TEST_CASE("triangle areas sum to the boundary polygon area") {
    const auto b = wavy_curve();
    const auto arcs = electrode_arcs(b, equispaced_layout(8, 0.4));
    MeshOptions opt;
    opt.h_target = 0.15;
    const Mesh2D mesh = build_mesh(b, arcs, opt);
    CHECK(mesh.total_area() == doctest::Approx(polygon_area(mesh)).epsilon(1e-12));
}

TEST_CASE("mesh generation is deterministic") {
    const auto b = wavy_curve();
    const auto arcs = electrode_arcs(b, equispaced_layout(8, 0.4));
    MeshOptions opt;
    opt.h_target = 0.15;
    const Mesh2D m1 = build_mesh(b, arcs, opt);
    const Mesh2D m2 = build_mesh(b, arcs, opt);
    REQUIRE(m1.vertices.size() == m2.vertices.size());
    for (size_t i = 0; i < m1.vertices.size(); ++i)
        CHECK((m1.vertices[i] - m2.vertices[i]).norm() == 0.0);
    CHECK(m1.triangles == m2.triangles);
}

TEST_CASE("transfer reproduces constants and affine fields") {
    ReconGrid grid(3.0, 0.35);
    const auto b = wavy_curve();
    const auto arcs = electrode_arcs(b, equispaced_layout(8, 0.4));
    MeshOptions opt;
    opt.h_target = 0.2;
    const Mesh2D dst = build_mesh(b, arcs, opt);

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid.num_nodes());
    const Eigen::VectorXd v1 = transfer(grid, ones, dst);
    for (int i = 0; i < v1.size(); ++i) CHECK(v1[i] == doctest::Approx(1.0).epsilon(1e-13));

    Eigen::VectorXd affine(grid.num_nodes());
    for (int k = 0; k < grid.num_nodes(); ++k)
        affine[k] = 2.0 + grid.mesh().vertices[k].x();
    const Eigen::VectorXd v2 = transfer(grid, affine, dst);
    for (int i = 0; i < v2.size(); ++i)
        CHECK(v2[i] == doctest::Approx(2.0 + dst.vertices[i].x()).epsilon(1e-12));
}

TEST_CASE("transfer is linear and convex-combination bounded") {
    ReconGrid grid(3.0, 0.4);
    const auto b = unit_circle();
    ElectrodeArcs none;
    MeshOptions opt;
    opt.h_target = 0.25;
    const Mesh2D dst = build_mesh(b, none, opt);

    Eigen::VectorXd f(grid.num_nodes()), g(grid.num_nodes());
    for (int k = 0; k < grid.num_nodes(); ++k) {
        f[k] = std::sin(3.0 * grid.mesh().vertices[k].x());
        g[k] = std::cos(2.0 * grid.mesh().vertices[k].y());
    }
    const Eigen::VectorXd vf = transfer(grid, f, dst);
    const Eigen::VectorXd vg = transfer(grid, g, dst);
    const Eigen::VectorXd vsum = transfer(grid, 2.0 * f + 3.0 * g, dst);
    CHECK((vsum - 2.0 * vf - 3.0 * vg).cwiseAbs().maxCoeff() < 1e-12);

    // interpolated values bounded by containing-triangle nodal extremes
    for (size_t i = 0; i < dst.vertices.size(); ++i) {
        const auto loc = grid.locate(dst.vertices[i]);
        const auto& tri = grid.mesh().triangles[loc.triangle];
        const double lo = std::min({f[tri[0]], f[tri[1]], f[tri[2]]});
        const double hi = std::max({f[tri[0]], f[tri[1]], f[tri[2]]});
        CHECK(vf[i] >= lo - 1e-12);
        CHECK(vf[i] <= hi + 1e-12);
    }
}

TEST_CASE("transfer rejects points outside the grid") {
    ReconGrid grid(1.0, 0.3);
    CHECK_THROWS_AS(grid.locate(Vec2(2.0, 0.0)), std::runtime_error);
}

TEST_CASE("delaunay empty-circumcircle property on a small point set") {
    std::vector<Vec2> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.45},
                             {0.2, 0.8}, {0.83, 0.21}, {0.4, 0.13}};
    const auto tris = delaunay_triangulate(pts);
    for (const auto& t : tris) {
        const Vec2 a = pts[t[0]], b = pts[t[1]], c = pts[t[2]];
        // circumcenter
        const Vec2 ab = b - a, ac = c - a;
        const double d = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
        const double b2 = ab.squaredNorm(), c2 = ac.squaredNorm();
        const Vec2 cc = a + Vec2(ac.y() * b2 - ab.y() * c2, ab.x() * c2 - ac.x() * b2) / d;
        const double r2 = (a - cc).squaredNorm();
        for (size_t p = 0; p < pts.size(); ++p) {
            if (static_cast<int>(p) == t[0] || static_cast<int>(p) == t[1] ||
                static_cast<int>(p) == t[2])
                continue;
            CHECK((pts[p] - cc).squaredNorm() >= r2 * (1.0 - 1e-9));
        }
    }
}
