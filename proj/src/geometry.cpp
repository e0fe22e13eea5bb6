#include "eitshape/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace eitshape {

namespace {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
constexpr double kKronrodNodes[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898,  0.0,                0.207784955007898,
     0.405845151377397,  0.586087235467691,  0.741531185599394,
     0.864864423359769,  0.949107912342759,  0.991455371120813};
constexpr double kKronrodWeights[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};
constexpr double kGaussWeights[7] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870};

struct GkResult {
    double kronrod;
    double err;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double hw = 0.5 * (b - a);
    double fk = 0.0, fg = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double v = f(c + hw * kKronrodNodes[i]);
        fk += kKronrodWeights[i] * v;
        if (i % 2 == 1) fg += kGaussWeights[i / 2] * v;
    }
    return {fk * hw, std::abs(fk - fg) * hw};
}

}  // namespace

double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                           double rel_tol) {
    if (b <= a) return 0.0;
    struct Interval {
        double a, b, value, err;
    };
    GkResult whole = gk15(f, a, b);
    std::vector<Interval> stack{{a, b, whole.kronrod, whole.err}};
    double total = whole.kronrod;
    double total_err = whole.err;
    const double abs_floor = 1e-300;
    int iter = 0;
    while (total_err > rel_tol * std::max(std::abs(total), abs_floor) && iter < 2000) {
        ++iter;
        // split the interval with the largest error estimate
        auto worst = std::max_element(stack.begin(), stack.end(),
                                      [](const Interval& x, const Interval& y) {
                                          return x.err < y.err;
                                      });
        Interval iv = *worst;
        stack.erase(worst);
        const double mid = 0.5 * (iv.a + iv.b);
        GkResult left = gk15(f, iv.a, mid);
        GkResult right = gk15(f, mid, iv.b);
        total += left.kronrod + right.kronrod - iv.value;
        total_err += left.err + right.err - iv.err;
        stack.push_back({iv.a, mid, left.kronrod, left.err});
        stack.push_back({mid, iv.b, right.kronrod, right.err});
    }
    return total;
}

double wrap_angle(double phi) {
    const double two_pi = 2.0 * StarCurve::pi();
    double w = std::fmod(phi, two_pi);
    if (w < 0.0) w += two_pi;
    return w;
}

Vec2 StarCurve::point(double phi) const {
    const double r = radius(phi);
    return {r * std::cos(phi), r * std::sin(phi)};
}

double StarCurve::speed(double phi) const {
    const double r = radius(phi);
    const double r1 = radius_d1(phi);
    return std::sqrt(r * r + r1 * r1);
}

BoundaryFrame StarCurve::frame(double phi) const {
    const double r = radius(phi);
    const double r1 = radius_d1(phi);
    const double r2 = radius_d2(phi);
    const double c = std::cos(phi), s = std::sin(phi);
    const Vec2 chat(c, s);
    const Vec2 shat(-s, c);
    const Vec2 deriv = r1 * chat + r * shat;
    const double sp = deriv.norm();
    BoundaryFrame f;
    f.point = r * chat;
    f.speed = sp;
    f.tangent = deriv / sp;
    f.normal = Vec2(f.tangent.y(), -f.tangent.x());
    f.curvature = (r * r + 2.0 * r1 * r1 - r * r2) / (sp * sp * sp);
    return f;
}

double StarCurve::arclength(double phi_a, double phi_b) const {
    return adaptive_quadrature([this](double p) { return speed(p); }, phi_a, phi_b, 1e-10);
}

double StarCurve::terminal_angle(double phi_start, double w) const {
    if (w <= 0.0) throw std::invalid_argument("terminal_angle: width must be positive");
    // Newton on S(phi) - w with bisection safeguard.
    double lo = phi_start;
    double hi = phi_start + w / speed(phi_start);
    while (arclength(phi_start, hi) < w) hi += 0.5 * (hi - phi_start) + 1e-3;
    double phi = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double g = arclength(phi_start, phi) - w;
        if (std::abs(g) < 1e-11) return phi;
        if (g > 0.0) hi = phi; else lo = phi;
        double next = phi - g / speed(phi);
        if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
        phi = next;
    }
    return phi;
}

FourierBoundary::FourierBoundary(int order, Eigen::VectorXd coeffs)
    : order_(order), coeffs_(std::move(coeffs)) {
    if (order_ < 0) throw std::invalid_argument("FourierBoundary: order must be >= 0");
    if (coeffs_.size() != 2 * order_ + 1)
        throw std::invalid_argument("FourierBoundary: coefficient vector must have length 2N+1");
    const int samples = 64 * (order_ + 1);
    for (int i = 0; i < samples; ++i) {
        const double phi = 2.0 * pi() * i / samples;
        if (radius(phi) <= 0.0)
            throw std::invalid_argument("FourierBoundary: radius must stay positive");
    }
}

double FourierBoundary::radius(double phi) const {
    double r = coeffs_[0];
    for (int j = 1; j <= order_; ++j)
        r += coeffs_[j] * std::cos(j * phi) + coeffs_[j + order_] * std::sin(j * phi);
    return r;
}

double FourierBoundary::radius_d1(double phi) const {
    double r = 0.0;
    for (int j = 1; j <= order_; ++j)
        r += j * (-coeffs_[j] * std::sin(j * phi) + coeffs_[j + order_] * std::cos(j * phi));
    return r;
}

double FourierBoundary::radius_d2(double phi) const {
    double r = 0.0;
    for (int j = 1; j <= order_; ++j)
        r -= j * j * (coeffs_[j] * std::cos(j * phi) + coeffs_[j + order_] * std::sin(j * phi));
    return r;
}

double FourierBoundary::psi(int l, int order, double phi) {
    if (l < 0 || l > 2 * order) throw std::invalid_argument("psi: index out of range");
    if (l <= order) return std::cos(l * phi);
    return std::sin((l - order) * phi);
}

double FourierBoundary::psi_d1(int l, int order, double phi) {
    if (l < 0 || l > 2 * order) throw std::invalid_argument("psi_d1: index out of range");
    if (l <= order) return -l * std::sin(l * phi);
    return (l - order) * std::cos((l - order) * phi);
}

Vec2 FourierBoundary::shape_basis(int l, double phi) const {
    const double p = psi(l, order_, phi);
    return {p * std::cos(phi), p * std::sin(phi)};
}

double FourierBoundary::speed_dalpha(int l, double phi) const {
    const double r = radius(phi);
    const double r1 = radius_d1(phi);
    return (r * psi(l, order_, phi) + r1 * psi_d1(l, order_, phi)) / speed(phi);
}

ShapeFieldSplit split_field(const Vec2& h, const BoundaryFrame& f) {
    ShapeFieldSplit s;
    s.h_nu = h.dot(f.normal);
    s.h_tau = h - s.h_nu * f.normal;
    return s;
}

ElectrodeLayout::ElectrodeLayout(Eigen::VectorXd angles, double w)
    : count(static_cast<int>(angles.size())), initial_angles(std::move(angles)), width(w) {
    if (count < 2) throw std::invalid_argument("ElectrodeLayout: need at least 2 electrodes");
    if (width <= 0.0) throw std::invalid_argument("ElectrodeLayout: width must be positive");
}

ElectrodeArcs electrode_arcs(const StarCurve& curve, const ElectrodeLayout& layout) {
    const int m_count = layout.count;
    ElectrodeArcs arcs;
    arcs.width = layout.width;
    arcs.start.resize(m_count);
    arcs.end.resize(m_count);

    // Lift the initial angles into a strictly ascending sequence.
    double prev = wrap_angle(layout.initial_angles[0]);
    double lift = 0.0;
    for (int m = 0; m < m_count; ++m) {
        double a = wrap_angle(layout.initial_angles[m]) + lift;
        while (a < prev) {
            lift += 2.0 * StarCurve::pi();
            a += 2.0 * StarCurve::pi();
        }
        arcs.start[m] = a;
        prev = a;
    }
    for (int m = 0; m < m_count; ++m)
        arcs.end[m] = curve.terminal_angle(arcs.start[m], layout.width);
    for (int m = 0; m < m_count; ++m) {
        const double next_start = (m + 1 < m_count)
                                      ? arcs.start[m + 1]
                                      : arcs.start[0] + 2.0 * StarCurve::pi();
        if (arcs.end[m] >= next_start)
            throw std::runtime_error("electrode_arcs: electrodes overlap (layout violation)");
    }
    return arcs;
}

EndpointSensitivities endpoint_sensitivities(const FourierBoundary& b,
                                             const ElectrodeLayout& layout,
                                             const ElectrodeArcs& arcs) {
    const int m_count = layout.count;
    const int n_alpha = b.num_coeffs();
    EndpointSensitivities out;
    out.dphi_dtheta.resize(m_count);
    out.dphi_dalpha.resize(m_count, n_alpha);
    for (int m = 0; m < m_count; ++m) {
        const double sp_end = b.speed(arcs.end[m]);
        out.dphi_dtheta[m] = b.speed(arcs.start[m]) / sp_end;
        for (int l = 0; l < n_alpha; ++l) {
            const double dint = adaptive_quadrature(
                [&](double p) { return b.speed_dalpha(l, p); }, arcs.start[m], arcs.end[m],
                1e-10);
            out.dphi_dalpha(m, l) = -dint / sp_end;
        }
    }
    return out;
}

double AnalyticStarCurve::radius_d1(double phi) const {
    const double h = h_;
    return (-r_(phi + 2 * h) + 8 * r_(phi + h) - 8 * r_(phi - h) + r_(phi - 2 * h)) / (12 * h);
}

double AnalyticStarCurve::radius_d2(double phi) const {
    const double h = h_;
    return (-r_(phi + 2 * h) + 16 * r_(phi + h) - 30 * r_(phi) + 16 * r_(phi - h) -
            r_(phi - 2 * h)) /
           (12 * h * h);
}

Eigen::VectorXd fourier_project(const std::function<double(double)>& r, int order,
                                int samples) {
    // trapezoid rule on a periodic function: spectrally accurate
    const double twopi = 2.0 * StarCurve::pi();
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(2 * order + 1);
    for (int k = 0; k < samples; ++k) {
        const double phi = twopi * k / samples;
        const double v = r(phi);
        coeffs[0] += v;
        for (int l = 1; l <= order; ++l) {
            coeffs[l] += 2.0 * v * std::cos(l * phi);
            coeffs[order + l] += 2.0 * v * std::sin(l * phi);
        }
    }
    return coeffs / samples;
}

}  // namespace eitshape
