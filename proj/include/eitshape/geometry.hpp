#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

namespace eitshape {

using Vec2 = Eigen::Vector2d;

/// Local differential data of a star-shaped boundary curve at polar angle phi.
/// Curvature is signed so that circles traversed counterclockwise have
/// kappa = +1/r (convex regions positive).
struct BoundaryFrame {
    Vec2 point;
    Vec2 tangent;   // unit, counterclockwise
    Vec2 normal;    // unit, outward
    double speed;   // |gamma'(phi)|
    double curvature;
};

/// A simple closed curve of the form gamma(phi) = r(phi) (cos phi, sin phi)
/// with r > 0. Derived classes supply r and its first two derivatives.
class StarCurve {
public:
    virtual ~StarCurve() = default;

    virtual double radius(double phi) const = 0;
    virtual double radius_d1(double phi) const = 0;
    virtual double radius_d2(double phi) const = 0;

    Vec2 point(double phi) const;
    double speed(double phi) const;
    BoundaryFrame frame(double phi) const;

    /// Arc length of the curve between phi_a and phi_b (phi_a <= phi_b),
    /// adaptive Gauss-Kronrod quadrature, relative tolerance 1e-10.
    double arclength(double phi_a, double phi_b) const;

    double perimeter() const { return arclength(0.0, 2.0 * pi()); }

    /// Polar angle phi_end such that arclength(phi_start, phi_end) == w,
    /// solved to 1e-10.
    double terminal_angle(double phi_start, double w) const;

    static constexpr double pi() { return 3.14159265358979323846; }
};

/// Star-shaped boundary parametrized by a truncated Fourier series for the
/// radius: r(phi) = a0 + sum_j (a_j cos j phi + a_{j+N} sin j phi).
/// Positivity of r is enforced at construction by dense sampling.
class FourierBoundary : public StarCurve {
public:
    FourierBoundary(int order, Eigen::VectorXd coeffs);

    int order() const { return order_; }
    const Eigen::VectorXd& coeffs() const { return coeffs_; }
    int num_coeffs() const { return 2 * order_ + 1; }

    double radius(double phi) const override;
    double radius_d1(double phi) const override;
    double radius_d2(double phi) const override;

    /// d speed / d alpha_l at fixed phi.
    double speed_dalpha(int l, double phi) const;

    /// Scalar shape basis function psi_l: cos(l phi) for l <= N,
    /// sin((l-N) phi) for l > N.
    static double psi(int l, int order, double phi);
    static double psi_d1(int l, int order, double phi);
    double psi(int l, double phi) const { return psi(l, order_, phi); }

    /// Radial perturbation field h(phi) = psi_l(phi) (cos phi, sin phi).
    Vec2 shape_basis(int l, double phi) const;

private:
    int order_;
    Eigen::VectorXd coeffs_;
};

/// Decomposition of a perturbation field at a boundary frame into the
/// normal scalar component and the tangential remainder.
struct ShapeFieldSplit {
    double h_nu;   // h . normal
    Vec2 h_tau;    // h - h_nu * normal
};

ShapeFieldSplit split_field(const Vec2& h, const BoundaryFrame& f);

/// M electrodes of common arc-length width w, parametrized by their initial
/// polar angles in counterclockwise order.
struct ElectrodeLayout {
    int count = 0;
    Eigen::VectorXd initial_angles;  // ascending mod 2*pi
    double width = 0.0;

    ElectrodeLayout() = default;
    ElectrodeLayout(Eigen::VectorXd angles, double w);
};

/// Electrode arcs on a concrete curve: [start, end) polar angle per
/// electrode, end obtained by the fixed-width arc-length solve. Angles are
/// lifted so that start < end and arcs are in counterclockwise order.
struct ElectrodeArcs {
    std::vector<double> start;
    std::vector<double> end;
    double width = 0.0;
};

/// Computes electrode arcs and verifies pairwise disjointness; throws
/// std::runtime_error on a layout violation (electrode overruns the next
/// initial angle).
ElectrodeArcs electrode_arcs(const StarCurve& curve, const ElectrodeLayout& layout);

/// Sensitivities of electrode terminal angles with respect to the shape
/// coefficients and the initial angles (fixed arc-length width constraint).
struct EndpointSensitivities {
    // dphi_end[m] / dtheta_m
    Eigen::VectorXd dphi_dtheta;       // size M
    // dphi_end[m] / dalpha_l
    Eigen::MatrixXd dphi_dalpha;       // M x (2N+1)
};

EndpointSensitivities endpoint_sensitivities(const FourierBoundary& b,
                                             const ElectrodeLayout& layout,
                                             const ElectrodeArcs& arcs);

/// Adaptive Gauss-Kronrod (7-15) quadrature on [a, b].
double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-10);

/// Wraps an angle into [0, 2*pi).
double wrap_angle(double phi);

/// Least-squares Fourier coefficients of a periodic radius function
/// (trapezoid rule; spectrally accurate for smooth r). Layout matches
/// FourierBoundary: [a0, a_1..a_N, b_1..b_N].
Eigen::VectorXd fourier_project(const std::function<double(double)>& r, int order,
                                int samples = 4096);

/// StarCurve backed by an arbitrary radius function; derivatives by
/// fourth-order central differences. Used for the analytic phantom
/// boundaries that fall outside the Fourier family.
class AnalyticStarCurve : public StarCurve {
public:
    explicit AnalyticStarCurve(std::function<double(double)> r, double fd_step = 1e-3)
        : r_(std::move(r)), h_(fd_step) {}

    double radius(double phi) const override { return r_(phi); }
    double radius_d1(double phi) const override;
    double radius_d2(double phi) const override;

private:
    std::function<double(double)> r_;
    double h_;
};

}  // namespace eitshape
