#include <cmath>

#include "doctest.h"
#include "eitshape/forward.hpp"

using namespace eitshape;

namespace {

const double kPi = StarCurve::pi();

FourierBoundary circle(double r) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(1);
    a[0] = r;
    return FourierBoundary(0, a);
}

FourierBoundary wavy_curve() {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(9);  // N = 4
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

struct Setup {
    Mesh2D mesh;
    ElectrodeArcs arcs;
};

Setup make_setup(const FourierBoundary& b, int m_count, double w, double h) {
    Setup s;
    s.arcs = electrode_arcs(b, equispaced_layout(m_count, w));
    MeshOptions opt;
    opt.h_target = h;
    s.mesh = build_mesh(b, s.arcs, opt);
    return s;
}

}  // namespace

TEST_CASE("P2 space: node counts, partition of unity, exact linear fields") {
    const auto b = circle(1.0);
    const auto s = make_setup(b, 4, 0.3, 0.25);
    const P2Space space(s.mesh);

    // Euler: nodes = vertices + edges
    const int nv = static_cast<int>(s.mesh.vertices.size());
    const int nt = static_cast<int>(s.mesh.triangles.size());
    const int nb = s.mesh.num_boundary_vertices;
    const int nedges = (3 * nt + nb) / 2;
    CHECK(space.num_nodes() == nv + nedges);

    // shape functions sum to one, gradients sum to zero
    double N[6], dN[6][2];
    const double l1 = 0.23, l2 = 0.41, l0 = 1.0 - l1 - l2;
    P2Space::shape(l0, l1, l2, N);
    P2Space::shape_grad_ref(l0, l1, l2, dN);
    double sn = 0.0, sx = 0.0, sy = 0.0;
    for (int k = 0; k < 6; ++k) {
        sn += N[k];
        sx += dN[k][0];
        sy += dN[k][1];
    }
    CHECK(sn == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(sx) < 1e-14);
    CHECK(std::abs(sy) < 1e-14);

    // a globally affine field is reproduced exactly: value and gradient
    Eigen::VectorXd coeffs(space.num_nodes());
    auto f = [](const Vec2& p) { return 0.7 + 1.3 * p.x() - 0.4 * p.y(); };
    coeffs.setZero();
    for (int v = 0; v < nv; ++v) coeffs[v] = f(s.mesh.vertices[v]);
    for (int t = 0; t < nt; ++t) {
        const auto& nodes = space.element_nodes(t);
        const auto& tri = s.mesh.triangles[t];
        const Vec2 mids[3] = {0.5 * (s.mesh.vertices[tri[0]] + s.mesh.vertices[tri[1]]),
                              0.5 * (s.mesh.vertices[tri[1]] + s.mesh.vertices[tri[2]]),
                              0.5 * (s.mesh.vertices[tri[2]] + s.mesh.vertices[tri[0]])};
        for (int e = 0; e < 3; ++e) coeffs[nodes[3 + e]] = f(mids[e]);
    }
    for (int t : {0, nt / 2, nt - 1}) {
        const std::array<double, 3> bc = {0.2, 0.5, 0.3};
        const auto& tri = s.mesh.triangles[t];
        const Vec2 p = bc[0] * s.mesh.vertices[tri[0]] + bc[1] * s.mesh.vertices[tri[1]] +
                       bc[2] * s.mesh.vertices[tri[2]];
        CHECK(space.value(t, bc, coeffs) == doctest::Approx(f(p)).epsilon(1e-12));
        const Vec2 g = space.gradient(t, bc, coeffs);
        CHECK(g.x() == doctest::Approx(1.3).epsilon(1e-11));
        CHECK(g.y() == doctest::Approx(-0.4).epsilon(1e-11));
    }
}

TEST_CASE("system matrix is symmetric and annihilates the constant state") {
    const auto b = wavy_curve();
    const auto s = make_setup(b, 8, 0.4, 0.3);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 1.4);
    const CemSystem sys(space, sigma, ContactImpedances::uniform(8, 0.7));

    const Eigen::SparseMatrix<double>& A = sys.matrix();
    Eigen::SparseMatrix<double> At = A.transpose();
    CHECK((Eigen::MatrixXd(A) - Eigen::MatrixXd(At)).cwiseAbs().maxCoeff() < 1e-14);

    // x = (u = 1, U = 1, multiplier = 0): the ungrounded form vanishes, only
    // the grounding row sees sum(U) = M
    const int np = space.num_nodes();
    const int n = static_cast<int>(A.rows());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x.head(np + 8).setOnes();
    const Eigen::VectorXd r = A * x;
    CHECK(r.head(np + 8).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r[n - 1] == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("ungrounded block is positive semi-definite with one-dimensional kernel") {
    const auto b = circle(1.0);
    const auto s = make_setup(b, 4, 0.4, 0.45);  // coarse: dense eigensolve
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 1.0);
    const CemSystem sys(space, sigma, ContactImpedances::uniform(4, 1.0));

    const int nb = space.num_nodes() + 4;
    const Eigen::MatrixXd B = Eigen::MatrixXd(sys.matrix()).topLeftCorner(nb, nb);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    const Eigen::VectorXd ev = es.eigenvalues();
    CHECK(ev[0] > -1e-11);
    CHECK(std::abs(ev[0]) < 1e-11);  // constant state
    CHECK(ev[1] > 1e-6);             // kernel is exactly one-dimensional
}

TEST_CASE("reciprocity: the transfer matrix I^i . U^j is symmetric") {
    const auto b = wavy_curve();
    const auto s = make_setup(b, 16, 0.3, b.perimeter() / 60.0);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma(space.num_vertices());
    for (int v = 0; v < space.num_vertices(); ++v)
        sigma[v] = 1.0 + 0.5 * std::exp(-s.mesh.vertices[v].squaredNorm());
    const CemSystem sys(space, sigma, ContactImpedances::uniform(16, 1.0));
    const auto drives = DriveBasis::standard(16);
    const auto sol = sys.solve_all(drives);

    const Eigen::MatrixXd T = drives.currents.transpose() * sol.U;  // (M-1) x (M-1)
    const double scale = T.cwiseAbs().maxCoeff();
    CHECK((T - T.transpose()).cwiseAbs().maxCoeff() / scale < 1e-10);
}

TEST_CASE("voltage weight matrix reproduces grounded electrode voltages") {
    const auto b = circle(1.5);
    const auto s = make_setup(b, 8, 0.3, 0.2);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 2.0);
    const CemSystem sys(space, sigma, ContactImpedances::uniform(8, 0.5));
    const auto drives = DriveBasis::standard(8);
    const auto sol = sys.solve_all(drives);

    const Eigen::MatrixXd W = voltage_weight_matrix(8);
    const Eigen::MatrixXd T = drives.currents.transpose() * sol.U;  // pairings
    const Eigen::MatrixXd U_rec = W * T;
    CHECK((U_rec - sol.U).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("rotation equivariance on a disk with equispaced electrodes") {
    const auto b = circle(2.0);
    const auto s = make_setup(b, 8, 0.4, 0.15);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 1.0);
    const CemSystem sys(space, sigma, ContactImpedances::uniform(8, 1.0));

    const int np = space.num_nodes();
    const int n = np + 8 + 1;
    auto solve_pair = [&](int a, int c) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        rhs[np + a] = 1.0;
        rhs[np + c] = -1.0;
        const Eigen::VectorXd x = sys.solve_raw(rhs);
        return Eigen::VectorXd(x.segment(np, 8));
    };
    const Eigen::VectorXd u0 = solve_pair(0, 1);
    const Eigen::VectorXd u3 = solve_pair(3, 4);
    const double scale = u0.cwiseAbs().maxCoeff();
    for (int m = 0; m < 8; ++m)
        CHECK(std::abs(u3[(m + 3) % 8] - u0[m]) < 1e-3 * scale);
}

TEST_CASE("joint scaling of admittivity and contact impedance scales voltages") {
    const auto b = wavy_curve();
    const auto s = make_setup(b, 8, 0.4, 0.3);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 1.0);
    const auto drives = DriveBasis::standard(8);
    const double c = 3.7;

    const auto sol1 = CemSystem(space, sigma, ContactImpedances::uniform(8, 1.0))
                          .solve_all(drives);
    const auto sol2 = CemSystem(space, c * sigma, ContactImpedances::uniform(8, 1.0 / c))
                          .solve_all(drives);
    CHECK((c * sol2.U - sol1.U).cwiseAbs().maxCoeff() < 1e-11 * sol1.U.cwiseAbs().maxCoeff());
}

TEST_CASE("electrode fluxes recover the driven currents") {
    const auto b = wavy_curve();
    const auto s = make_setup(b, 16, 0.3, b.perimeter() / 80.0);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma(space.num_vertices());
    for (int v = 0; v < space.num_vertices(); ++v)
        sigma[v] = 1.0 + 0.3 * s.mesh.vertices[v].x();
    const double z = 0.8;
    const CemSystem sys(space, sigma, ContactImpedances::uniform(16, z));
    const auto drives = DriveBasis::standard(16);
    const auto sol = sys.solve_all(drives);

    // I_m = (1/z) int_Em (U_m - u) dS via 3-point Gauss on the quadratic trace
    for (int j : {0, 7, 14}) {
        Eigen::VectorXd flux = Eigen::VectorXd::Zero(16);
        for (int bi = 0; bi < static_cast<int>(s.mesh.boundary_edges.size()); ++bi) {
            const auto& be = s.mesh.boundary_edges[bi];
            if (be.tag < 0) continue;
            const double len =
                (s.mesh.vertices[be.v1] - s.mesh.vertices[be.v0]).norm();
            const double u0 = sol.u(be.v0, j);
            const double u1 = sol.u(be.v1, j);
            const double um = sol.u(space.boundary_edge_midnode(bi), j);
            for (int q = 0; q < EdgeRule::n; ++q) {
                const double t = EdgeRule::node[q];
                const double uq = (1.0 - t) * (1.0 - 2.0 * t) * u0 +
                                  t * (2.0 * t - 1.0) * u1 + 4.0 * t * (1.0 - t) * um;
                flux[be.tag] +=
                    EdgeRule::weight[q] * len * (sol.U(be.tag, j) - uq) / z;
            }
        }
        CHECK((flux - drives.currents.col(j)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("large contact impedance limit: U_m -> z I_m / |E_m|") {
    const auto b = circle(2.0);
    const auto s = make_setup(b, 8, 0.4, 0.15);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 1.0);
    const double z = 1e6;
    const CemSystem sys(space, sigma, ContactImpedances::uniform(8, z));
    const auto drives = DriveBasis::standard(8);
    const auto sol = sys.solve_all(drives);

    Eigen::VectorXd elen = Eigen::VectorXd::Zero(8);
    for (const auto& be : s.mesh.boundary_edges)
        if (be.tag >= 0)
            elen[be.tag] += (s.mesh.vertices[be.v1] - s.mesh.vertices[be.v0]).norm();

    const int j = 2;  // drive e_0 - e_3
    for (int m = 0; m < 8; ++m) {
        const double lead = z * drives.currents(m, j) / elen[m];
        if (std::abs(drives.currents(m, j)) > 0.5)
            CHECK(sol.U(m, j) == doctest::Approx(lead).epsilon(1e-3));
        else
            CHECK(std::abs(sol.U(m, j)) < 1e-3 * z / elen[m]);
    }
}

TEST_CASE("small contact impedance: potential shunts to the electrode voltage") {
    const auto b = circle(1.0);
    const auto s = make_setup(b, 4, 0.5, 0.12);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 1.0);
    const auto drives = DriveBasis::standard(4);

    double prev = 1e300;
    for (double z : {1e-2, 1e-4, 1e-6}) {
        const CemSystem sys(space, sigma, ContactImpedances::uniform(4, z));
        const auto sol = sys.solve_all(drives);
        double worst = 0.0;
        for (int bi = 0; bi < static_cast<int>(s.mesh.boundary_edges.size()); ++bi) {
            const auto& be = s.mesh.boundary_edges[bi];
            if (be.tag < 0) continue;
            for (int vtx : {be.v0, be.v1})
                worst = std::max(worst, std::abs(sol.u(vtx, 0) - sol.U(be.tag, 0)));
        }
        CHECK(worst < prev);
        prev = worst;
    }
    CHECK(prev < 1e-4);
}

TEST_CASE("boundary traces: weights, normals, and nodal consistency") {
    const auto b = wavy_curve();
    const auto s = make_setup(b, 8, 0.4, 0.25);
    const P2Space space(s.mesh);
    Eigen::VectorXd sigma(space.num_vertices());
    for (int v = 0; v < space.num_vertices(); ++v)
        sigma[v] = 1.0 + 0.2 * s.mesh.vertices[v].y();
    const CemSystem sys(space, sigma, ContactImpedances::uniform(8, 1.0));
    const auto drives = DriveBasis::standard(8);
    const auto sol = sys.solve_all(drives);
    const auto tr = boundary_traces(space, sol, sigma);

    CHECK(tr.qps.size() == s.mesh.boundary_edges.size() * EdgeRule::n);
    CHECK(tr.electrodes.size() == 8);

    // per-edge weights sum to the chord length, normals are outward units
    std::vector<double> wsum(s.mesh.boundary_edges.size(), 0.0);
    for (const auto& qp : tr.qps) {
        wsum[qp.edge] += qp.weight;
        CHECK(qp.edge_normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(qp.edge_normal.dot(qp.pos) > 0.0);  // star-shaped: outward
    }
    for (size_t e = 0; e < wsum.size(); ++e) {
        const auto& be = s.mesh.boundary_edges[e];
        const double len = (s.mesh.vertices[be.v1] - s.mesh.vertices[be.v0]).norm();
        CHECK(wsum[e] == doctest::Approx(len).epsilon(1e-12));
    }

    // electrode endpoint traces agree with the vertex potentials
    for (int m = 0; m < 8; ++m) {
        const auto& ee = tr.electrodes[m];
        const int vs = s.mesh.boundary_vertex_at(ee.phi_start);
        REQUIRE(vs >= 0);
        for (int j = 0; j < drives.num_drives(); ++j)
            CHECK(ee.u_start[j] == doctest::Approx(sol.u(vs, j)).epsilon(1e-14));
        CHECK(ee.phi_start == doctest::Approx(s.arcs.start[m]).epsilon(1e-12));
        CHECK(ee.phi_end == doctest::Approx(s.arcs.end[m]).epsilon(1e-12));
    }
}

TEST_CASE("increasing the admittivity decreases the dissipated power") {
    const auto b = circle(1.5);
    const auto s = make_setup(b, 8, 0.3, 0.2);
    const P2Space space(s.mesh);
    const auto drives = DriveBasis::standard(8);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(space.num_vertices(), 1.0);

    const auto lo = CemSystem(space, sigma, ContactImpedances::uniform(8, 1.0))
                        .solve_all(drives);
    const auto hi = CemSystem(space, 2.0 * sigma, ContactImpedances::uniform(8, 1.0))
                        .solve_all(drives);
    for (int j = 0; j < drives.num_drives(); ++j) {
        const double p_lo = drives.currents.col(j).dot(lo.U.col(j));
        const double p_hi = drives.currents.col(j).dot(hi.U.col(j));
        CHECK(p_hi > 0.0);
        CHECK(p_hi < p_lo);
    }
}

TEST_CASE("measurements self-converge under mesh refinement") {
    const auto b = wavy_curve();
    const auto layout = equispaced_layout(16, 0.3);
    const auto arcs = electrode_arcs(b, layout);
    const auto drives = DriveBasis::standard(16);

    auto measure = [&](double h) {
        MeshOptions opt;
        opt.h_target = h;
        const Mesh2D mesh = build_mesh(b, arcs, opt);
        const P2Space space(mesh);
        Eigen::VectorXd sigma(space.num_vertices());
        for (int v = 0; v < space.num_vertices(); ++v)
            sigma[v] = 1.0 + std::exp(-(mesh.vertices[v] - Vec2(0.5, 0.0)).squaredNorm());
        const CemSystem sys(space, sigma, ContactImpedances::uniform(16, 1.0));
        return sys.solve_all(drives).measurement_vector();
    };

    const double h0 = b.perimeter() / 100.0;
    const Eigen::VectorXd c = measure(h0);
    const Eigen::VectorXd f = measure(h0 / 2.0);
    const Eigen::VectorXd ff = measure(h0 / 4.0);
    const double d1 = (c - f).norm() / f.norm();
    const double d2 = (f - ff).norm() / ff.norm();
    CHECK(d1 < 5e-3);
    CHECK(d2 < 0.6 * d1);
}
