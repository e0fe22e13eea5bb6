#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "eitshape/mesh.hpp"

namespace eitshape {

struct ContactImpedances {
    Eigen::VectorXd z;  // one positive entry per electrode

    explicit ContactImpedances(Eigen::VectorXd zz);
    static ContactImpedances uniform(int m_count, double value);
};

/// Trigonometric-free current drive basis I^(j) = e_1 - e_{j+1},
/// j = 1..M-1 (zero-sum columns).
struct DriveBasis {
    Eigen::MatrixXd currents;  // M x (M-1)

    static DriveBasis standard(int m_count);
    int num_drives() const { return static_cast<int>(currents.cols()); }
    int num_electrodes() const { return static_cast<int>(currents.rows()); }
};

/// Piecewise-quadratic scalar FE space on a Mesh2D: nodes are the mesh
/// vertices followed by one node per (undirected) edge.
class P2Space {
public:
    explicit P2Space(const Mesh2D& mesh);

    const Mesh2D& mesh() const { return *mesh_; }
    int num_nodes() const { return num_nodes_; }
    int num_vertices() const { return static_cast<int>(mesh_->vertices.size()); }

    /// Global node ids of triangle t: [v0 v1 v2 e01 e12 e20].
    const std::array<int, 6>& element_nodes(int t) const { return tri_nodes_[t]; }
    /// Node id of the midpoint of boundary edge b.
    int boundary_edge_midnode(int b) const { return bedge_midnode_[b]; }
    /// Triangle adjacent to boundary edge b.
    int boundary_edge_triangle(int b) const { return bedge_tri_[b]; }

    /// Shape values / reference gradients at barycentric (l0, l1, l2).
    static void shape(double l0, double l1, double l2, double N[6]);
    static void shape_grad_ref(double l0, double l1, double l2, double dN[6][2]);

    /// Physical gradient of a coefficient vector at barycentric coordinates
    /// inside triangle t.
    Vec2 gradient(int t, const std::array<double, 3>& bary,
                  const Eigen::VectorXd& coeffs) const;
    double value(int t, const std::array<double, 3>& bary,
                 const Eigen::VectorXd& coeffs) const;

    /// Inverse-transpose Jacobian of the affine map and twice the area.
    void element_geometry(int t, Eigen::Matrix2d& jinv_t, double& det) const;

private:
    const Mesh2D* mesh_;
    int num_nodes_;
    std::vector<std::array<int, 6>> tri_nodes_;
    std::vector<int> bedge_midnode_;
    std::vector<int> bedge_tri_;
};

struct ForwardSolution {
    Eigen::MatrixXd u;  // P2 coefficients, num_nodes x num_drives
    Eigen::MatrixXd U;  // electrode voltages, M x num_drives (zero column means)

    /// Stacks U^(1), ..., U^(M-1) into a single vector of length M(M-1).
    Eigen::VectorXd measurement_vector() const;
};

/// Assembled CEM system on a fixed mesh: volume conductance plus electrode
/// coupling terms, grounded by a scalar multiplier enforcing sum(U) = 0.
class CemSystem {
public:
    CemSystem(const P2Space& space, const Eigen::VectorXd& sigma_nodal,
              const ContactImpedances& z);

    const Eigen::SparseMatrix<double>& matrix() const { return A_; }
    const P2Space& space() const { return *space_; }
    int num_electrodes() const { return m_count_; }

    /// One factorization, all drives. Residual checked to 1e-10 relative.
    ForwardSolution solve_all(const DriveBasis& drives) const;

    /// Solves for an arbitrary stacked right-hand side (potential block zero,
    /// given currents). Used by tests.
    Eigen::VectorXd solve_raw(const Eigen::VectorXd& rhs) const;

private:
    const P2Space* space_;
    int m_count_;
    Eigen::SparseMatrix<double> A_;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

/// 6-point degree-4 volume quadrature in barycentric coordinates.
struct VolumeRule {
    static constexpr int n = 6;
    static const double bary[6][3];
    static const double weight[6];  // sums to 1, multiply by triangle area
};

/// 3-point Gauss rule on [0, 1].
struct EdgeRule {
    static constexpr int n = 3;
    static const double node[3];
    static const double weight[3];
};

/// Boundary trace data at edge quadrature nodes and electrode endpoints,
/// for the shape-derivative sampling formula.
struct TraceQP {
    int edge = -1;         // boundary edge index
    int tag = -1;          // electrode index or -1 (gap)
    double phi = 0.0;      // curve parameter (lifted)
    double weight = 0.0;   // quadrature weight including edge length
    Vec2 pos;
    Vec2 edge_normal;      // outward unit normal of the polyline edge
    double sigma = 0.0;    // P1 admittivity at the point
    Eigen::VectorXd u;     // potential per drive
    Eigen::MatrixXd grad;  // 2 x num_drives
};

struct ElectrodeEndpoints {
    double phi_start = 0.0, phi_end = 0.0;
    Eigen::VectorXd u_start, u_end;  // potential per drive at the endpoint vertices
};

struct BoundaryTraces {
    std::vector<TraceQP> qps;
    std::vector<ElectrodeEndpoints> electrodes;  // one per electrode
};

BoundaryTraces boundary_traces(const P2Space& space, const ForwardSolution& sol,
                               const Eigen::VectorXd& sigma_nodal);

/// Weights expressing the grounded voltage functionals in the drive basis:
/// U_m = sum_i W(m,i) * (I^(i) . U). Size M x (M-1).
Eigen::MatrixXd voltage_weight_matrix(int m_count);

}  // namespace eitshape
