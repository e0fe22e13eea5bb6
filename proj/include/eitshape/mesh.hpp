#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "eitshape/geometry.hpp"

namespace eitshape {

/// Boundary edge between two consecutive boundary vertices. tag == -1 for an
/// insulated gap segment, otherwise the electrode index. phi0/phi1 are the
/// (lifted, monotone) polar-angle parameters of the endpoints on the curve.
struct BoundaryEdge {
    int v0 = -1;
    int v1 = -1;
    int tag = -1;
    double phi0 = 0.0;
    double phi1 = 0.0;
};

/// Triangulation of a star-shaped cross-section. The first
/// num_boundary_vertices entries of `vertices` are the boundary polyline in
/// counterclockwise loop order; `boundary_phi` holds their curve parameters.
struct Mesh2D {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;   // counterclockwise
    std::vector<BoundaryEdge> boundary_edges;    // single closed loop, in order
    std::vector<double> boundary_phi;            // lifted angles, one per boundary vertex
    int num_boundary_vertices = 0;
    std::string provenance;

    double triangle_area(int t) const;
    double total_area() const;
    double min_angle_deg() const;
    /// Index of the unique boundary vertex whose curve parameter is phi
    /// (within 1e-9); -1 if absent.
    int boundary_vertex_at(double phi) const;
};

struct MeshOptions {
    double h_target = 0.1;
    double min_angle_deg = 15.0;
    std::string provenance = "mesh";
};

/// Triangulates the region bounded by `curve` with electrode endpoints as
/// boundary vertices. Boundary vertex spacing (arc length) is at most
/// h_target; interior filled from a hexagonal lattice via Delaunay
/// triangulation plus smoothing. Deterministic.
Mesh2D build_mesh(const StarCurve& curve, const ElectrodeArcs& arcs, const MeshOptions& opt);

/// Same, without electrodes (every boundary edge tagged gap).
Mesh2D build_disk_mesh(double radius, const MeshOptions& opt);

/// Delaunay triangulation of a point set (Bowyer-Watson). Exposed for tests.
std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points);

/// Fixed reconstruction grid: P1 nodal admittivity basis on a triangulated
/// disk of radius R centered at the origin.
class ReconGrid {
public:
    ReconGrid(double radius, double h_target);

    const Mesh2D& mesh() const { return mesh_; }
    double radius() const { return radius_; }
    int num_nodes() const { return static_cast<int>(mesh_.vertices.size()); }

    /// Triangle index and barycentric coordinates of p; throws if p lies
    /// outside the grid.
    struct Location {
        int triangle;
        std::array<double, 3> bary;
    };
    Location locate(const Vec2& p) const;

    /// Sparse interpolation matrix (points x K): row i holds the barycentric
    /// weights of points[i] in its containing grid triangle.
    Eigen::SparseMatrix<double> interpolation_matrix(const std::vector<Vec2>& points) const;

private:
    double radius_;
    Mesh2D mesh_;
    // uniform background bins for point location
    double bin_size_;
    int nx_, ny_;
    Vec2 lo_;
    std::vector<std::vector<int>> bins_;

    void build_bins();
};

/// Piecewise-linear transfer of reconstruction-grid nodal values onto the
/// vertices of a domain mesh. Hard error if a vertex falls outside the grid.
Eigen::VectorXd transfer(const ReconGrid& grid, const Eigen::VectorXd& coeffs,
                         const Mesh2D& dst);

}  // namespace eitshape
