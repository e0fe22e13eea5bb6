#include "eitshape/forward.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace eitshape {

const double VolumeRule::bary[6][3] = {
    {0.108103018168070, 0.445948490915965, 0.445948490915965},
    {0.445948490915965, 0.108103018168070, 0.445948490915965},
    {0.445948490915965, 0.445948490915965, 0.108103018168070},
    {0.816847572980459, 0.091576213509771, 0.091576213509771},
    {0.091576213509771, 0.816847572980459, 0.091576213509771},
    {0.091576213509771, 0.091576213509771, 0.816847572980459}};
const double VolumeRule::weight[6] = {0.223381589678011, 0.223381589678011,
                                      0.223381589678011, 0.109951743655322,
                                      0.109951743655322, 0.109951743655322};

const double EdgeRule::node[3] = {0.112701665379258, 0.5, 0.887298334620742};
const double EdgeRule::weight[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

ContactImpedances::ContactImpedances(Eigen::VectorXd zz) : z(std::move(zz)) {
    for (int m = 0; m < z.size(); ++m)
        if (z[m] <= 0.0) throw std::invalid_argument("ContactImpedances: z must be positive");
}

ContactImpedances ContactImpedances::uniform(int m_count, double value) {
    return ContactImpedances(Eigen::VectorXd::Constant(m_count, value));
}

DriveBasis DriveBasis::standard(int m_count) {
    DriveBasis d;
    d.currents = Eigen::MatrixXd::Zero(m_count, m_count - 1);
    for (int j = 0; j < m_count - 1; ++j) {
        d.currents(0, j) = 1.0;
        d.currents(j + 1, j) = -1.0;
    }
    return d;
}

P2Space::P2Space(const Mesh2D& mesh) : mesh_(&mesh) {
    const int nv = static_cast<int>(mesh.vertices.size());
    std::map<std::pair<int, int>, int> edge_ids;
    auto edge_node = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = edge_ids.find({key.first, key.second});
        if (it != edge_ids.end()) return it->second;
        const int id = nv + static_cast<int>(edge_ids.size());
        edge_ids[{key.first, key.second}] = id;
        return id;
    };
    tri_nodes_.resize(mesh.triangles.size());
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const auto& tri = mesh.triangles[t];
        tri_nodes_[t] = {tri[0],
                         tri[1],
                         tri[2],
                         edge_node(tri[0], tri[1]),
                         edge_node(tri[1], tri[2]),
                         edge_node(tri[2], tri[0])};
    }
    num_nodes_ = nv + static_cast<int>(edge_ids.size());

    // boundary edge -> midpoint node and adjacent triangle
    std::map<std::pair<int, int>, int> edge_tri;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            auto key = std::minmax(tri[e], tri[(e + 1) % 3]);
            edge_tri[{key.first, key.second}] = t;
        }
    }
    bedge_midnode_.resize(mesh.boundary_edges.size());
    bedge_tri_.resize(mesh.boundary_edges.size());
    for (int b = 0; b < static_cast<int>(mesh.boundary_edges.size()); ++b) {
        const auto& be = mesh.boundary_edges[b];
        auto key = std::minmax(be.v0, be.v1);
        auto it = edge_ids.find({key.first, key.second});
        if (it == edge_ids.end())
            throw std::runtime_error("P2Space: boundary edge missing from triangulation");
        bedge_midnode_[b] = it->second;
        bedge_tri_[b] = edge_tri.at({key.first, key.second});
    }
}

void P2Space::shape(double l0, double l1, double l2, double N[6]) {
    N[0] = l0 * (2.0 * l0 - 1.0);
    N[1] = l1 * (2.0 * l1 - 1.0);
    N[2] = l2 * (2.0 * l2 - 1.0);
    N[3] = 4.0 * l0 * l1;
    N[4] = 4.0 * l1 * l2;
    N[5] = 4.0 * l2 * l0;
}

void P2Space::shape_grad_ref(double l0, double l1, double l2, double dN[6][2]) {
    // reference coordinates: l1 = xi, l2 = eta, l0 = 1 - xi - eta
    const double g0[2] = {-1.0, -1.0};
    const double g1[2] = {1.0, 0.0};
    const double g2[2] = {0.0, 1.0};
    for (int d = 0; d < 2; ++d) {
        dN[0][d] = (4.0 * l0 - 1.0) * g0[d];
        dN[1][d] = (4.0 * l1 - 1.0) * g1[d];
        dN[2][d] = (4.0 * l2 - 1.0) * g2[d];
        dN[3][d] = 4.0 * (l1 * g0[d] + l0 * g1[d]);
        dN[4][d] = 4.0 * (l2 * g1[d] + l1 * g2[d]);
        dN[5][d] = 4.0 * (l0 * g2[d] + l2 * g0[d]);
    }
}

void P2Space::element_geometry(int t, Eigen::Matrix2d& jinv_t, double& det) const {
    const auto& tri = mesh_->triangles[t];
    const Vec2& a = mesh_->vertices[tri[0]];
    const Vec2& b = mesh_->vertices[tri[1]];
    const Vec2& c = mesh_->vertices[tri[2]];
    Eigen::Matrix2d J;
    J.col(0) = b - a;
    J.col(1) = c - a;
    det = J.determinant();
    jinv_t = J.inverse().transpose();
}

Vec2 P2Space::gradient(int t, const std::array<double, 3>& bary,
                       const Eigen::VectorXd& coeffs) const {
    Eigen::Matrix2d jinv_t;
    double det;
    element_geometry(t, jinv_t, det);
    double dN[6][2];
    shape_grad_ref(bary[0], bary[1], bary[2], dN);
    Vec2 gref = Vec2::Zero();
    const auto& nodes = tri_nodes_[t];
    for (int k = 0; k < 6; ++k) {
        gref.x() += dN[k][0] * coeffs[nodes[k]];
        gref.y() += dN[k][1] * coeffs[nodes[k]];
    }
    return jinv_t * gref;
}

double P2Space::value(int t, const std::array<double, 3>& bary,
                      const Eigen::VectorXd& coeffs) const {
    double N[6];
    shape(bary[0], bary[1], bary[2], N);
    double v = 0.0;
    const auto& nodes = tri_nodes_[t];
    for (int k = 0; k < 6; ++k) v += N[k] * coeffs[nodes[k]];
    return v;
}

CemSystem::CemSystem(const P2Space& space, const Eigen::VectorXd& sigma_nodal,
                     const ContactImpedances& z)
    : space_(&space), m_count_(static_cast<int>(z.z.size())) {
    const Mesh2D& mesh = space.mesh();
    if (sigma_nodal.size() != static_cast<int>(mesh.vertices.size()))
        throw std::invalid_argument("CemSystem: sigma_nodal size mismatch");
    if (sigma_nodal.minCoeff() <= 0.0)
        throw std::invalid_argument("CemSystem: admittivity must be positive at all vertices");

    const int np = space.num_nodes();
    const int n = np + m_count_ + 1;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.triangles.size() * 36 + mesh.boundary_edges.size() * 16 + 2 * m_count_);

    // volume term: int sigma grad(u) . grad(v)
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        Eigen::Matrix2d jinv_t;
        double det;
        space.element_geometry(t, jinv_t, det);
        const double area = 0.5 * det;
        const auto& tri = mesh.triangles[t];
        const auto& nodes = space.element_nodes(t);
        Eigen::Matrix<double, 6, 6> ke = Eigen::Matrix<double, 6, 6>::Zero();
        for (int q = 0; q < VolumeRule::n; ++q) {
            const double l0 = VolumeRule::bary[q][0];
            const double l1 = VolumeRule::bary[q][1];
            const double l2 = VolumeRule::bary[q][2];
            const double sig =
                l0 * sigma_nodal[tri[0]] + l1 * sigma_nodal[tri[1]] + l2 * sigma_nodal[tri[2]];
            double dN[6][2];
            P2Space::shape_grad_ref(l0, l1, l2, dN);
            Eigen::Matrix<double, 2, 6> g;
            for (int k = 0; k < 6; ++k)
                g.col(k) = jinv_t * Eigen::Vector2d(dN[k][0], dN[k][1]);
            const double w = VolumeRule::weight[q] * area * sig;
            ke.noalias() += w * g.transpose() * g;
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) trips.emplace_back(nodes[a], nodes[b], ke(a, b));
    }

    // electrode terms: (1/z_m) int_Em (U_m - u)(V_m - v)
    for (int bidx = 0; bidx < static_cast<int>(mesh.boundary_edges.size()); ++bidx) {
        const auto& be = mesh.boundary_edges[bidx];
        if (be.tag < 0) continue;
        const double zinv = 1.0 / z.z[be.tag];
        const int iu = np + be.tag;
        const double len = (mesh.vertices[be.v1] - mesh.vertices[be.v0]).norm();
        const int nd[3] = {be.v0, be.v1, space.boundary_edge_midnode(bidx)};
        for (int q = 0; q < EdgeRule::n; ++q) {
            const double t = EdgeRule::node[q];
            const double N[3] = {(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0),
                                 4.0 * t * (1.0 - t)};
            const double w = EdgeRule::weight[q] * len * zinv;
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b)
                    trips.emplace_back(nd[a], nd[b], w * N[a] * N[b]);
                trips.emplace_back(nd[a], iu, -w * N[a]);
                trips.emplace_back(iu, nd[a], -w * N[a]);
            }
            trips.emplace_back(iu, iu, w);
        }
    }

    // grounding: scalar multiplier enforcing sum(U_m) = 0
    for (int m = 0; m < m_count_; ++m) {
        trips.emplace_back(np + m, n - 1, 1.0);
        trips.emplace_back(n - 1, np + m, 1.0);
    }

    A_.resize(n, n);
    A_.setFromTriplets(trips.begin(), trips.end());
    A_.makeCompressed();
}

Eigen::VectorXd CemSystem::solve_raw(const Eigen::VectorXd& rhs) const {
    if (!lu_) {
        auto* self = const_cast<CemSystem*>(this);
        self->lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        self->lu_->compute(A_);
        if (self->lu_->info() != Eigen::Success)
            throw std::runtime_error("CemSystem: factorization failed (invalid mesh or sigma)");
    }
    return lu_->solve(rhs);
}

ForwardSolution CemSystem::solve_all(const DriveBasis& drives) const {
    const int np = space_->num_nodes();
    const int n = np + m_count_ + 1;
    const int nd = drives.num_drives();
    if (drives.num_electrodes() != m_count_)
        throw std::invalid_argument("solve_all: drive basis electrode count mismatch");

    ForwardSolution sol;
    sol.u.resize(np, nd);
    sol.U.resize(m_count_, nd);
    for (int j = 0; j < nd; ++j) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        rhs.segment(np, m_count_) = drives.currents.col(j);
        const Eigen::VectorXd x = solve_raw(rhs);
        // normwise backward error, robust to badly scaled contact impedances
        const double denom =
            (Eigen::VectorXd(A_.cwiseAbs() * x.cwiseAbs()) + rhs.cwiseAbs()).norm();
        const double res = (A_ * x - rhs).norm() / std::max(denom, 1e-300);
        if (res > 1e-10)
            throw std::runtime_error("CemSystem: solve residual exceeds tolerance");
        sol.u.col(j) = x.head(np);
        sol.U.col(j) = x.segment(np, m_count_);
    }
    return sol;
}

Eigen::VectorXd ForwardSolution::measurement_vector() const {
    const int m_count = static_cast<int>(U.rows());
    const int nd = static_cast<int>(U.cols());
    Eigen::VectorXd v(m_count * nd);
    for (int j = 0; j < nd; ++j) v.segment(j * m_count, m_count) = U.col(j);
    return v;
}

BoundaryTraces boundary_traces(const P2Space& space, const ForwardSolution& sol,
                               const Eigen::VectorXd& sigma_nodal) {
    const Mesh2D& mesh = space.mesh();
    const int nd = static_cast<int>(sol.u.cols());
    BoundaryTraces tr;
    tr.qps.reserve(mesh.boundary_edges.size() * EdgeRule::n);

    int m_count = 0;
    for (const auto& be : mesh.boundary_edges) m_count = std::max(m_count, be.tag + 1);
    tr.electrodes.resize(m_count);

    for (int b = 0; b < static_cast<int>(mesh.boundary_edges.size()); ++b) {
        const auto& be = mesh.boundary_edges[b];
        const int t = space.boundary_edge_triangle(b);
        const auto& tri = mesh.triangles[t];
        const Vec2& pa = mesh.vertices[be.v0];
        const Vec2& pb = mesh.vertices[be.v1];
        const double len = (pb - pa).norm();
        const Vec2 dir = (pb - pa) / len;
        const Vec2 nrm(dir.y(), -dir.x());  // outward for CCW loop

        // barycentric coordinates of the edge endpoints in the triangle
        auto bary_of_vertex = [&](int v) {
            std::array<double, 3> bc = {0.0, 0.0, 0.0};
            for (int k = 0; k < 3; ++k)
                if (tri[k] == v) bc[k] = 1.0;
            return bc;
        };
        const auto ba = bary_of_vertex(be.v0);
        const auto bb = bary_of_vertex(be.v1);

        for (int q = 0; q < EdgeRule::n; ++q) {
            const double s = EdgeRule::node[q];
            TraceQP qp;
            qp.edge = b;
            qp.tag = be.tag;
            qp.phi = be.phi0 + s * (be.phi1 - be.phi0);
            qp.weight = EdgeRule::weight[q] * len;
            qp.pos = pa + s * (pb - pa);
            qp.edge_normal = nrm;
            std::array<double, 3> bc;
            for (int k = 0; k < 3; ++k) bc[k] = (1.0 - s) * ba[k] + s * bb[k];
            qp.sigma = bc[0] * sigma_nodal[tri[0]] + bc[1] * sigma_nodal[tri[1]] +
                       bc[2] * sigma_nodal[tri[2]];
            qp.u.resize(nd);
            qp.grad.resize(2, nd);
            for (int j = 0; j < nd; ++j) {
                qp.u[j] = space.value(t, bc, sol.u.col(j));
                qp.grad.col(j) = space.gradient(t, bc, sol.u.col(j));
            }
            tr.qps.push_back(std::move(qp));
        }

        if (be.tag >= 0) {
            auto& ee = tr.electrodes[be.tag];
            // first edge of the electrode arc starts it, last one ends it
            if (ee.u_start.size() == 0 || be.phi0 < ee.phi_start) {
                ee.phi_start = be.phi0;
                ee.u_start.resize(nd);
                for (int j = 0; j < nd; ++j) ee.u_start[j] = sol.u(be.v0, j);
            }
            if (ee.u_end.size() == 0 || be.phi1 > ee.phi_end) {
                ee.phi_end = be.phi1;
                ee.u_end.resize(nd);
                for (int j = 0; j < nd; ++j) ee.u_end[j] = sol.u(be.v1, j);
            }
        }
    }
    return tr;
}

Eigen::MatrixXd voltage_weight_matrix(int m_count) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(m_count, m_count - 1, 1.0 / m_count);
    for (int i = 0; i < m_count - 1; ++i) w(i + 1, i) -= 1.0;
    return w;
}

}  // namespace eitshape
