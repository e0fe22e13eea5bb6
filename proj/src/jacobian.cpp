#include "eitshape/jacobian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eitshape {

namespace {

/// Folds a pairing-derivative matrix G(i,j) = d(I^i . U^(j)) into the stacked
/// measurement derivative via the voltage weight matrix.
Eigen::VectorXd stack_pairing(const Eigen::MatrixXd& w, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd du = w * g;  // M x (M-1), column j = voltages under drive j
    Eigen::VectorXd v(du.rows() * du.cols());
    for (int j = 0; j < du.cols(); ++j) v.segment(j * du.rows(), du.rows()) = du.col(j);
    return v;
}

double default_h(const ModelConfig& config, const StarCurve& b) {
    return config.h_target > 0.0 ? config.h_target : b.perimeter() / 200.0;
}

/// Gradients of the drive-pairing quadratic form x_i' A x_j with respect to
/// the mesh vertex positions (gx, gy) and the nodal admittivity (gs). Each
/// entry is an (M-1) x (M-1) matrix; pairing any vertex velocity field with
/// these gives the exact derivative of the discrete pairings, no extra
/// solves.
struct VertexPairings {
    std::vector<Eigen::MatrixXd> gx, gy, gs;
};

VertexPairings vertex_pairings(const ForwardEval& fe) {
    const int nd = fe.config.m_count - 1;
    const Mesh2D& mesh = fe.mesh;
    const P2Space& space = *fe.space;
    const int nv = static_cast<int>(mesh.vertices.size());

    VertexPairings vp;
    vp.gx.assign(nv, Eigen::MatrixXd::Zero(nd, nd));
    vp.gy.assign(nv, Eigen::MatrixXd::Zero(nd, nd));
    vp.gs.assign(nv, Eigen::MatrixXd::Zero(nd, nd));

    // volume conductance term
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const auto& tri = mesh.triangles[t];
        Eigen::Matrix2d jinv_t;
        double det;
        space.element_geometry(t, jinv_t, det);
        const auto& nodes = space.element_nodes(t);

        Eigen::MatrixXd coeffs(6, nd);
        for (int k = 0; k < 6; ++k) coeffs.row(k) = fe.sol.u.row(nodes[k]);

        // derivative of det with respect to each vertex position
        const Vec2 a = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
        const Vec2 b = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
        const Vec2 ddet1(b.y(), -b.x());
        const Vec2 ddet2(-a.y(), a.x());
        const Vec2 ddet0 = -(ddet1 + ddet2);
        const std::array<Vec2, 3> ddet = {ddet0, ddet1, ddet2};
        // dJ/dX_{v,c} = e_c * w_v^T with these column selectors
        const std::array<Eigen::Vector2d, 3> wsel = {Eigen::Vector2d(-1.0, -1.0),
                                                     Eigen::Vector2d(1.0, 0.0),
                                                     Eigen::Vector2d(0.0, 1.0)};

        for (int q = 0; q < VolumeRule::n; ++q) {
            double dn[6][2];
            P2Space::shape_grad_ref(VolumeRule::bary[q][0], VolumeRule::bary[q][1],
                                    VolumeRule::bary[q][2], dn);
            Eigen::MatrixXd gref(2, nd);  // reference gradients of the fields
            gref.setZero();
            for (int k = 0; k < 6; ++k)
                gref.noalias() += Eigen::Vector2d(dn[k][0], dn[k][1]) * coeffs.row(k);
            const Eigen::MatrixXd g = jinv_t * gref;       // physical gradients
            const Eigen::MatrixXd s = g.transpose() * g;   // pairwise dot products
            double sigma_q = 0.0;
            for (int v = 0; v < 3; ++v)
                sigma_q += VolumeRule::bary[q][v] * fe.sigma_mesh[tri[v]];
            const double wq = VolumeRule::weight[q];

            for (int v = 0; v < 3; ++v)
                vp.gs[tri[v]].noalias() += (wq * 0.5 * det * VolumeRule::bary[q][v]) * s;

            for (int v = 0; v < 3; ++v) {
                const Eigen::Vector2d av = jinv_t * wsel[v];
                const Eigen::VectorXd u = g.transpose() * av;
                for (int c = 0; c < 2; ++c) {
                    // d(jinv_t)/dX = -(jinv_t w_v) (row_c jinv_t), so
                    // dG = -(jinv_t w_v) (row c of G)
                    const Eigen::RowVectorXd gc = g.row(c);
                    Eigen::MatrixXd dmat =
                        (wq * sigma_q * 0.5 * ddet[v][c]) * s;
                    dmat.noalias() -= (wq * sigma_q * 0.5 * det) *
                                      (u * gc + gc.transpose() * u.transpose());
                    auto& dst = (c == 0) ? vp.gx[tri[v]] : vp.gy[tri[v]];
                    dst.noalias() += dmat;
                }
            }
        }
    }

    // electrode coupling term: only the edge length depends on the geometry
    for (int e = 0; e < static_cast<int>(mesh.boundary_edges.size()); ++e) {
        const BoundaryEdge& be = mesh.boundary_edges[e];
        if (be.tag < 0) continue;
        const int mid = space.boundary_edge_midnode(e);
        const Vec2 p0 = mesh.vertices[be.v0];
        const Vec2 p1 = mesh.vertices[be.v1];
        const double len = (p1 - p0).norm();
        const Vec2 dir = (p1 - p0) / len;
        const double zinv = 1.0 / fe.config.z[be.tag];

        Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(nd, nd);
        for (int q = 0; q < EdgeRule::n; ++q) {
            const double t = EdgeRule::node[q];
            const double n0 = (1.0 - t) * (1.0 - 2.0 * t);
            const double n1 = t * (2.0 * t - 1.0);
            const double n2 = 4.0 * t * (1.0 - t);
            Eigen::VectorXd d(nd);
            for (int j = 0; j < nd; ++j)
                d[j] = fe.sol.U(be.tag, j) - n0 * fe.sol.u(be.v0, j) -
                       n1 * fe.sol.u(be.v1, j) - n2 * fe.sol.u(mid, j);
            tmat.noalias() += (EdgeRule::weight[q] * zinv) * (d * d.transpose());
        }
        vp.gx[be.v0].noalias() -= dir.x() * tmat;
        vp.gy[be.v0].noalias() -= dir.y() * tmat;
        vp.gx[be.v1].noalias() += dir.x() * tmat;
        vp.gy[be.v1].noalias() += dir.y() * tmat;
    }

    return vp;
}

/// Piecewise-linear interpolation of knot angular velocities, matching the
/// angular remap used by morph_mesh.
struct KnotVelocity {
    std::vector<double> knots;  // electrode interval endpoints, lifted
    std::vector<double> vel;    // angular velocity at each knot

    double operator()(double phi) const {
        const double twopi = 2.0 * StarCurve::pi();
        double lifted = phi + twopi * std::ceil((knots.front() - phi) / twopi - 1e-12);
        if (lifted >= knots.front() + twopi) lifted -= twopi;
        if (lifted < knots.front()) lifted += twopi;
        const auto it = std::upper_bound(knots.begin(), knots.end(), lifted);
        const int seg = std::clamp(static_cast<int>(it - knots.begin()) - 1, 0,
                                   static_cast<int>(knots.size()) - 2);
        const double t = (lifted - knots[seg]) / (knots[seg + 1] - knots[seg]);
        return vel[seg] + t * (vel[seg + 1] - vel[seg]);
    }
};

std::vector<double> knot_vector(const ElectrodeArcs& arcs) {
    std::vector<double> k;
    const int m_count = static_cast<int>(arcs.start.size());
    for (int m = 0; m < m_count; ++m) {
        k.push_back(arcs.start[m]);
        k.push_back(arcs.end[m]);
    }
    k.push_back(arcs.start[0] + 2.0 * StarCurve::pi());
    return k;
}

/// Vertex velocity field of the mesh morph for one parameter direction:
/// angular knot velocities kv plus (for shape directions, l >= 0) the radial
/// basis psi_l. Matches the first-order motion of morph_mesh vertices.
std::vector<Vec2> morph_velocity(const ForwardEval& fe, const KnotVelocity& kv, int l) {
    const Mesh2D& mesh = fe.mesh;
    const FourierBoundary& b = fe.boundary;
    const int nv = static_cast<int>(mesh.vertices.size());
    std::vector<Vec2> vel(nv, Vec2::Zero());

    for (int i = 0; i < nv; ++i) {
        double phi, rho;
        if (i < mesh.num_boundary_vertices) {
            phi = mesh.boundary_phi[i];
            rho = b.radius(phi);
        } else {
            const Vec2& p = mesh.vertices[i];
            rho = p.norm();
            if (rho < 1e-12) continue;
            phi = std::atan2(p.y(), p.x());
        }
        const double dphi = kv(phi);
        const double r = b.radius(phi);
        const double dr = (l >= 0 ? b.psi(l, phi) : 0.0) + b.radius_d1(phi) * dphi;
        const Vec2 chat(std::cos(phi), std::sin(phi));
        const Vec2 cperp(-std::sin(phi), std::cos(phi));
        vel[i] = (rho / r * dr) * chat + (rho * dphi) * cperp;
    }
    return vel;
}

/// Gradient of the transferred admittivity at each mesh vertex (piecewise
/// constant per grid triangle); chains the vertex motion into the nodal
/// admittivity values.
std::vector<Vec2> sigma_gradients(const ForwardEval& fe, const ReconGrid& grid) {
    const Mesh2D& gm = grid.mesh();
    const int nv = static_cast<int>(fe.mesh.vertices.size());
    std::vector<Vec2> g(nv);
    for (int i = 0; i < nv; ++i) {
        const ReconGrid::Location loc = grid.locate(fe.mesh.vertices[i]);
        const auto& tri = gm.triangles[loc.triangle];
        const Vec2 pa = gm.vertices[tri[0]], pb = gm.vertices[tri[1]],
                   pc = gm.vertices[tri[2]];
        const double area2 = (pb - pa).x() * (pc - pa).y() - (pb - pa).y() * (pc - pa).x();
        auto perp = [](const Vec2& w) { return Vec2(-w.y(), w.x()); };
        g[i] = (fe.state.sigma[tri[0]] * perp(pc - pb) +
                fe.state.sigma[tri[1]] * perp(pa - pc) +
                fe.state.sigma[tri[2]] * perp(pb - pa)) /
               area2;
    }
    return g;
}

/// One Jacobian column: pair a vertex velocity field with the assembly
/// gradients, including the admittivity re-transfer chain.
Eigen::MatrixXd pairing_along(const VertexPairings& vp, const std::vector<Vec2>& vel,
                              const std::vector<Vec2>& dsig, int nd) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nd, nd);
    for (int v = 0; v < static_cast<int>(vel.size()); ++v) {
        if (vel[v].x() != 0.0) g.noalias() += vel[v].x() * vp.gx[v];
        if (vel[v].y() != 0.0) g.noalias() += vel[v].y() * vp.gy[v];
        const double ds = dsig[v].dot(vel[v]);
        if (ds != 0.0) g.noalias() += ds * vp.gs[v];
    }
    return g;
}

Eigen::MatrixXd shape_columns(const ForwardEval& fe, const ReconGrid& grid,
                              const VertexPairings& vp) {
    const int m_count = fe.config.m_count;
    const int nd = m_count - 1;
    const int num_l = fe.boundary.num_coeffs();
    const EndpointSensitivities es =
        endpoint_sensitivities(fe.boundary, fe.layout, fe.arcs);
    const std::vector<Vec2> dsig = sigma_gradients(fe, grid);
    const Eigen::MatrixXd w = voltage_weight_matrix(m_count);

    KnotVelocity kv;
    kv.knots = knot_vector(fe.arcs);
    Eigen::MatrixXd jac(m_count * nd, num_l);
    for (int l = 0; l < num_l; ++l) {
        kv.vel.assign(kv.knots.size(), 0.0);
        for (int m = 0; m < m_count; ++m) kv.vel[2 * m + 1] = es.dphi_dalpha(m, l);
        const std::vector<Vec2> vel = morph_velocity(fe, kv, l);
        jac.col(l) = -stack_pairing(w, pairing_along(vp, vel, dsig, nd));
    }
    return jac;
}

Eigen::MatrixXd theta_columns(const ForwardEval& fe, const ReconGrid& grid,
                              const VertexPairings& vp) {
    const int m_count = fe.config.m_count;
    const int nd = m_count - 1;
    const EndpointSensitivities es =
        endpoint_sensitivities(fe.boundary, fe.layout, fe.arcs);
    const std::vector<Vec2> dsig = sigma_gradients(fe, grid);
    const Eigen::MatrixXd w = voltage_weight_matrix(m_count);

    KnotVelocity kv;
    kv.knots = knot_vector(fe.arcs);
    Eigen::MatrixXd jac(m_count * nd, m_count);
    for (int m = 0; m < m_count; ++m) {
        kv.vel.assign(kv.knots.size(), 0.0);
        kv.vel[2 * m] = 1.0;
        kv.vel[2 * m + 1] = es.dphi_dtheta[m];
        if (m == 0) kv.vel.back() = 1.0;  // wrapped copy of the first knot
        const std::vector<Vec2> vel = morph_velocity(fe, kv, -1);
        jac.col(m) = -stack_pairing(w, pairing_along(vp, vel, dsig, nd));
    }
    return jac;
}

}  // namespace

ForwardEval::ForwardEval(const ModelConfig& cfg, const ModelState& st, const ReconGrid& grid)
    : config(cfg),
      state(st),
      boundary(cfg.fourier_order, st.alpha),
      layout(st.theta, cfg.width),
      arcs(electrode_arcs(boundary, layout)) {
    if (cfg.z.size() != cfg.m_count)
        throw std::invalid_argument("ForwardEval: contact impedance count mismatch");
    MeshOptions opt;
    opt.h_target = default_h(cfg, boundary);
    opt.provenance = cfg.provenance;
    mesh = build_mesh(boundary, arcs, opt);
    space = std::make_unique<P2Space>(mesh);
    sigma_mesh = transfer(grid, st.sigma, mesh);
    system = std::make_unique<CemSystem>(*space, sigma_mesh, ContactImpedances(cfg.z));
    sol = system->solve_all(DriveBasis::standard(cfg.m_count));
    traces = boundary_traces(*space, sol, sigma_mesh);
    measurement = sol.measurement_vector();
}

Eigen::MatrixXd jac_sigma(const ForwardEval& fe, const ReconGrid& grid) {
    const int m_count = fe.config.m_count;
    const int nd = m_count - 1;
    const Mesh2D& mesh = fe.mesh;
    const P2Space& space = *fe.space;
    const int num_k = grid.num_nodes();

    // transposed interpolation matrix: column v lists the grid nodes carrying
    // weight at mesh vertex v
    const Eigen::SparseMatrix<double> ttr =
        Eigen::SparseMatrix<double>(grid.interpolation_matrix(mesh.vertices).transpose());

    std::vector<Eigen::MatrixXd> g(num_k, Eigen::MatrixXd::Zero(nd, nd));

    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        Eigen::Matrix2d jinv_t;
        double det;
        space.element_geometry(t, jinv_t, det);
        const double area = 0.5 * det;
        const auto& nodes = space.element_nodes(t);
        const auto& tri = mesh.triangles[t];

        Eigen::MatrixXd coeffs(6, nd);
        for (int k = 0; k < 6; ++k) coeffs.row(k) = fe.sol.u.row(nodes[k]);

        std::array<Eigen::MatrixXd, 3> pv;
        pv.fill(Eigen::MatrixXd::Zero(nd, nd));
        for (int q = 0; q < VolumeRule::n; ++q) {
            double dn[6][2];
            P2Space::shape_grad_ref(VolumeRule::bary[q][0], VolumeRule::bary[q][1],
                                    VolumeRule::bary[q][2], dn);
            Eigen::Matrix<double, 2, 6> b;
            for (int k = 0; k < 6; ++k)
                b.col(k) = jinv_t * Eigen::Vector2d(dn[k][0], dn[k][1]);
            const Eigen::MatrixXd gq = b * coeffs;               // physical gradients
            const Eigen::MatrixXd s = gq.transpose() * gq;       // pairwise dot products
            const double w = VolumeRule::weight[q] * area;
            for (int v = 0; v < 3; ++v)
                pv[v].noalias() += (w * VolumeRule::bary[q][v]) * s;
        }
        for (int v = 0; v < 3; ++v)
            for (Eigen::SparseMatrix<double>::InnerIterator it(ttr, tri[v]); it; ++it)
                g[it.row()].noalias() += it.value() * pv[v];
    }

    const Eigen::MatrixXd w = voltage_weight_matrix(m_count);
    Eigen::MatrixXd jac(m_count * nd, num_k);
    for (int k = 0; k < num_k; ++k) jac.col(k) = -stack_pairing(w, g[k]);
    return jac;
}

Eigen::MatrixXd jac_shape(const ForwardEval& fe, const ReconGrid& grid) {
    return shape_columns(fe, grid, vertex_pairings(fe));
}

Eigen::MatrixXd jac_theta(const ForwardEval& fe, const ReconGrid& grid) {
    return theta_columns(fe, grid, vertex_pairings(fe));
}

Eigen::MatrixXd jac_shape_sampling(const ForwardEval& fe, NormalDerivativeRoute route,
                                   bool drop_tangential) {
    const int m_count = fe.config.m_count;
    const int nd = m_count - 1;
    const FourierBoundary& b = fe.boundary;
    const int num_l = b.num_coeffs();

    std::vector<Eigen::MatrixXd> g(num_l, Eigen::MatrixXd::Zero(nd, nd));

    // terms (i) and (ii): boundary quadrature
    for (const TraceQP& qp : fe.traces.qps) {
        const BoundaryFrame f = b.frame(qp.phi);
        const Vec2 chat(std::cos(qp.phi), std::sin(qp.phi));
        const double c_nu = chat.dot(f.normal);

        const Vec2 that(-qp.edge_normal.y(), qp.edge_normal.x());
        Eigen::VectorXd tgrad(nd);
        for (int j = 0; j < nd; ++j) tgrad[j] = that.dot(qp.grad.col(j));
        const Eigen::MatrixXd s1 =
            (qp.weight * qp.sigma) * (tgrad * tgrad.transpose());

        Eigen::MatrixXd s2;
        if (qp.tag >= 0) {
            const double zm = fe.config.z[qp.tag];
            Eigen::VectorXd d(nd);
            for (int j = 0; j < nd; ++j) d[j] = fe.sol.U(qp.tag, j) - qp.u[j];
            if (route == NormalDerivativeRoute::robin) {
                const double fac =
                    (qp.weight / zm) * (f.curvature - 1.0 / (zm * qp.sigma));
                s2 = fac * (d * d.transpose());
            } else {
                Eigen::VectorXd dnu(nd);
                for (int j = 0; j < nd; ++j) dnu[j] = qp.edge_normal.dot(qp.grad.col(j));
                const Eigen::VectorXd e = f.curvature * d - dnu;
                s2 = (0.5 * qp.weight / zm) *
                     (e * d.transpose() + d * e.transpose());
            }
        }

        for (int l = 0; l < num_l; ++l) {
            const double h_nu = b.psi(l, qp.phi) * c_nu;
            g[l].noalias() -= h_nu * s1;
            if (qp.tag >= 0) g[l].noalias() -= h_nu * s2;
        }
    }

    // term (iii): electrode endpoints, including the fixed-width terminal
    // motion
    const EndpointSensitivities es = endpoint_sensitivities(b, fe.layout, fe.arcs);
    for (int m = 0; m < m_count; ++m) {
        const auto& ee = fe.traces.electrodes[m];
        const double zinv = 1.0 / fe.config.z[m];
        Eigen::VectorXd ds(nd), de(nd);
        for (int j = 0; j < nd; ++j) {
            ds[j] = fe.sol.U(m, j) - ee.u_start[j];
            de[j] = fe.sol.U(m, j) - ee.u_end[j];
        }
        const Eigen::MatrixXd ps = ds * ds.transpose();
        const Eigen::MatrixXd pe = de * de.transpose();
        const BoundaryFrame fs = b.frame(ee.phi_start);
        const BoundaryFrame ft = b.frame(ee.phi_end);
        const Vec2 cs(std::cos(ee.phi_start), std::sin(ee.phi_start));
        const Vec2 ce(std::cos(ee.phi_end), std::sin(ee.phi_end));
        for (int l = 0; l < num_l; ++l) {
            const double a_s =
                drop_tangential ? 0.0 : -b.psi(l, ee.phi_start) * cs.dot(fs.tangent);
            const double a_e =
                (drop_tangential ? 0.0 : b.psi(l, ee.phi_end) * ce.dot(ft.tangent)) +
                ft.speed * es.dphi_dalpha(m, l);
            g[l].noalias() -= zinv * (a_s * ps + a_e * pe);
        }
    }

    const Eigen::MatrixXd w = voltage_weight_matrix(m_count);
    Eigen::MatrixXd jac(m_count * nd, num_l);
    for (int l = 0; l < num_l; ++l) jac.col(l) = stack_pairing(w, g[l]);
    return jac;
}

Eigen::MatrixXd jac_theta_sampling(const ForwardEval& fe) {
    const int m_count = fe.config.m_count;
    const int nd = m_count - 1;

    const Eigen::MatrixXd w = voltage_weight_matrix(m_count);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m_count * nd, m_count);
    for (int m = 0; m < m_count; ++m) {
        const auto& ee = fe.traces.electrodes[m];
        Eigen::VectorXd ds(nd), de(nd);
        for (int j = 0; j < nd; ++j) {
            ds[j] = fe.sol.U(m, j) - ee.u_start[j];
            de[j] = fe.sol.U(m, j) - ee.u_end[j];
        }
        const double speed_m = fe.boundary.speed(fe.arcs.start[m]);
        const Eigen::MatrixXd g = (speed_m / fe.config.z[m]) *
                                  (ds * ds.transpose() - de * de.transpose());
        jac.col(m) = stack_pairing(w, g);
    }
    return jac;
}

JacobianBlocks assemble_jacobians(const ForwardEval& fe, const ReconGrid& grid) {
    JacobianBlocks jb;
    jb.J_sigma = jac_sigma(fe, grid);
    const VertexPairings vp = vertex_pairings(fe);
    jb.J_alpha = shape_columns(fe, grid, vp);
    jb.J_theta = theta_columns(fe, grid, vp);
    return jb;
}

Mesh2D morph_mesh(const Mesh2D& base, const FourierBoundary& b0, const ElectrodeArcs& a0,
                  const FourierBoundary& b1, const ElectrodeArcs& a1) {
    const double twopi = 2.0 * StarCurve::pi();
    const int m_count = static_cast<int>(a0.start.size());
    if (static_cast<int>(a1.start.size()) != m_count)
        throw std::invalid_argument("morph_mesh: electrode count mismatch");

    std::vector<double> k0, k1;
    if (m_count == 0) {
        k0 = {0.0, twopi};
        k1 = {0.0, twopi};
    } else {
        for (int m = 0; m < m_count; ++m) {
            k0.push_back(a0.start[m]);
            k0.push_back(a0.end[m]);
            k1.push_back(a1.start[m]);
            k1.push_back(a1.end[m]);
        }
        k0.push_back(a0.start[0] + twopi);
        k1.push_back(a1.start[0] + twopi);
    }

    auto remap = [&](double phi) {
        double lifted = phi + twopi * std::ceil((k0.front() - phi) / twopi - 1e-12);
        if (lifted >= k0.front() + twopi) lifted -= twopi;
        if (lifted < k0.front()) lifted += twopi;
        const auto it = std::upper_bound(k0.begin(), k0.end(), lifted);
        const int seg = std::clamp(static_cast<int>(it - k0.begin()) - 1, 0,
                                   static_cast<int>(k0.size()) - 2);
        const double t = (lifted - k0[seg]) / (k0[seg + 1] - k0[seg]);
        return k1[seg] + t * (k1[seg + 1] - k1[seg]);
    };

    Mesh2D out = base;
    const int nb = base.num_boundary_vertices;
    for (int i = 0; i < nb; ++i) {
        const double p1 = remap(base.boundary_phi[i]);
        out.boundary_phi[i] = p1;
        out.vertices[i] = b1.point(p1);
    }
    for (int i = nb; i < static_cast<int>(base.vertices.size()); ++i) {
        const Vec2& p = base.vertices[i];
        const double rho = p.norm();
        if (rho < 1e-12) continue;
        const double phi = std::atan2(p.y(), p.x());
        const double p1 = remap(phi);
        const double scale = b1.radius(p1) / b0.radius(phi);
        out.vertices[i] = (rho * scale) * Vec2(std::cos(p1), std::sin(p1));
    }
    for (auto& be : out.boundary_edges) {
        be.phi0 = out.boundary_phi[be.v0];
        be.phi1 = (be.v1 == 0) ? out.boundary_phi[0] + twopi : out.boundary_phi[be.v1];
    }
    return out;
}

Eigen::VectorXd morphed_measurement(const ForwardEval& base, const ReconGrid& grid,
                                    const ModelState& new_state) {
    const FourierBoundary b1(base.config.fourier_order, new_state.alpha);
    const ElectrodeLayout l1(new_state.theta, base.config.width);
    const ElectrodeArcs a1 = electrode_arcs(b1, l1);
    const Mesh2D m1 = morph_mesh(base.mesh, base.boundary, base.arcs, b1, a1);
    const P2Space sp(m1);
    const Eigen::VectorXd sig = transfer(grid, new_state.sigma, m1);
    const CemSystem sys(sp, sig, ContactImpedances(base.config.z));
    return sys.solve_all(DriveBasis::standard(base.config.m_count)).measurement_vector();
}

Eigen::VectorXd fd_oracle(const ModelConfig& config, const ModelState& state,
                          const ReconGrid& grid, ParamBlock block, int index, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("fd_oracle: eps must be positive");
    const ForwardEval base(config, state, grid);

    if (block == ParamBlock::sigma) {
        auto eval = [&](double delta) {
            Eigen::VectorXd sg = state.sigma;
            sg[index] += delta;
            const Eigen::VectorXd sig = transfer(grid, sg, base.mesh);
            const CemSystem sys(*base.space, sig, ContactImpedances(config.z));
            return sys.solve_all(DriveBasis::standard(config.m_count)).measurement_vector();
        };
        return (eval(eps) - eval(-eps)) / (2.0 * eps);
    }

    ModelState plus = state, minus = state;
    if (block == ParamBlock::alpha) {
        plus.alpha[index] += eps;
        minus.alpha[index] -= eps;
    } else {
        plus.theta[index] += eps;
        minus.theta[index] -= eps;
    }
    return (morphed_measurement(base, grid, plus) -
            morphed_measurement(base, grid, minus)) /
           (2.0 * eps);
}

}  // namespace eitshape
