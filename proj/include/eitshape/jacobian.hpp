#pragma once

#include <memory>

#include "eitshape/forward.hpp"
#include "eitshape/mesh.hpp"

namespace eitshape {

/// Discretization-independent description of one forward problem family.
struct ModelConfig {
    int m_count = 16;        // number of electrodes M
    int fourier_order = 15;  // N (boundary has 2N+1 coefficients)
    double width = 0.3;      // common electrode arc width
    double h_target = 0.0;   // <= 0: perimeter / 200
    Eigen::VectorXd z;       // contact impedances, size M
    std::string provenance = "recon";
};

/// Point in parameter space: admittivity on the reconstruction grid, shape
/// coefficients, electrode initial angles.
struct ModelState {
    Eigen::VectorXd sigma;  // ReconGrid nodal coefficients, size K
    Eigen::VectorXd alpha;  // 2N+1
    Eigen::VectorXd theta;  // M
};

/// Everything computed for one forward evaluation at a given state: geometry,
/// mesh, FE solution, boundary traces, and the stacked measurement vector.
/// Not movable (internal cross-references); allocate in place or via
/// unique_ptr.
class ForwardEval {
public:
    ForwardEval(const ModelConfig& config, const ModelState& state, const ReconGrid& grid);
    ForwardEval(const ForwardEval&) = delete;
    ForwardEval& operator=(const ForwardEval&) = delete;

    ModelConfig config;
    ModelState state;
    FourierBoundary boundary;
    ElectrodeLayout layout;
    ElectrodeArcs arcs;
    Mesh2D mesh;
    std::unique_ptr<P2Space> space;
    Eigen::VectorXd sigma_mesh;  // P1 vertex values, transferred from the grid
    std::unique_ptr<CemSystem> system;
    ForwardSolution sol;
    BoundaryTraces traces;
    Eigen::VectorXd measurement;  // length M(M-1)
};

struct JacobianBlocks {
    Eigen::MatrixXd J_sigma;  // M(M-1) x K
    Eigen::MatrixXd J_alpha;  // M(M-1) x (2N+1)
    Eigen::MatrixXd J_theta;  // M(M-1) x M
};

/// Adjoint identity on the discrete system: d(I^i . U^j)/dsigma_k =
/// -int_Omega psi_k grad(u_i) . grad(u_j), with psi_k the P1 grid basis
/// pulled back onto the domain mesh. Exact for same-mesh perturbations.
Eigen::MatrixXd jac_sigma(const ForwardEval& fe, const ReconGrid& grid);

/// Shape Jacobian by the dual pairing d(I^i . U^j) = -x_i' (dA/dalpha_l) x_j
/// evaluated on the discrete system: the assembly is differentiated along the
/// deformation velocity field of each basis direction (boundary motion from
/// the shape basis, terminal-angle motion from the fixed-width constraint,
/// interior motion from the radial extension, admittivity re-transfer chain).
/// No extra PDE solves; agrees with the mesh-morphing finite difference to
/// quadrature precision.
Eigen::MatrixXd jac_shape(const ForwardEval& fe, const ReconGrid& grid);

/// Electrode-position Jacobian by the same discrete dual pairing, velocity
/// field sliding both endpoints of electrode m at equal arc-length speed.
Eigen::MatrixXd jac_theta(const ForwardEval& fe, const ReconGrid& grid);

/// Evaluation route for the electrode normal derivative in the boundary
/// sampling formula.
enum class NormalDerivativeRoute {
    robin,    // (U_m - u) / (z_m sigma); exact for the continuum solution
    gradient  // direct FE gradient, symmetrized over the drive pair
};

/// Shape Jacobian from the continuum boundary sampling formula (three terms:
/// tangential traces on the whole boundary, electrode Robin term with the
/// analytic curvature, electrode endpoint terms). Converges slowly near the
/// electrode edge singularities; kept as an independent cross-check of
/// jac_shape.
Eigen::MatrixXd jac_shape_sampling(const ForwardEval& fe,
                                   NormalDerivativeRoute route = NormalDerivativeRoute::robin,
                                   bool drop_tangential = false);

/// Electrode-position Jacobian from the endpoint terms of the sampling
/// formula only; cross-check counterpart of jac_theta.
Eigen::MatrixXd jac_theta_sampling(const ForwardEval& fe);

JacobianBlocks assemble_jacobians(const ForwardEval& fe, const ReconGrid& grid);

/// Maps a boundary-vertex-preserving deformation onto an existing mesh:
/// piecewise-linear angular remap with knots at the electrode interval
/// endpoints, radial scaling between the old and new radius functions.
/// Connectivity is preserved exactly.
Mesh2D morph_mesh(const Mesh2D& base, const FourierBoundary& b0, const ElectrodeArcs& a0,
                  const FourierBoundary& b1, const ElectrodeArcs& a1);

/// Measurement at a new state evaluated on the morphed version of an
/// existing evaluation's mesh (identical connectivity; suppresses remeshing
/// noise in finite-difference comparisons and Taylor tests).
Eigen::VectorXd morphed_measurement(const ForwardEval& base, const ReconGrid& grid,
                                    const ModelState& new_state);

enum class ParamBlock { sigma, alpha, theta };

/// Central finite difference of the full forward pipeline in one parameter
/// direction. sigma: same mesh; alpha/theta: morphed meshes.
Eigen::VectorXd fd_oracle(const ModelConfig& config, const ModelState& state,
                          const ReconGrid& grid, ParamBlock block, int index, double eps);

}  // namespace eitshape
