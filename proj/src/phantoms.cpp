#include "eitshape/phantoms.hpp"

#include <cmath>
#include <stdexcept>

#include "eitshape/forward.hpp"
#include "eitshape/priors.hpp"

namespace eitshape {

double GaussianSampler::operator()() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // 53-bit uniforms in (0, 1]; avoids log(0)
    auto uniform = [this]() {
        return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    };
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * StarCurve::pi() * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
}

std::function<double(double)> target_boundary(const std::string& id) {
    if (id == "exp1") {
        return [](double phi) {
            phi = wrap_angle(phi);  // the bump term is written for [0, 2 pi)
            const double c = std::cos(phi), s = std::sin(phi);
            const double d = phi - StarCurve::pi();
            return 3.3 / std::sqrt(2.2 * 2.2 * c * c + 1.5 * 1.5 * s * s) +
                   1.1 * std::exp(-std::pow(d, 6.0)) +
                   0.88 * c * std::sin(-2.0 * phi);
        };
    }
    if (id == "exp2") {
        return [](double phi) {
            const double c = std::cos(phi), s = std::sin(phi);
            // ellipse with semi-axes 2 and 1.5 in polar form
            return 2.0 * 1.5 / std::sqrt(1.5 * 1.5 * c * c + 2.0 * 2.0 * s * s);
        };
    }
    if (id == "exp3") {
        return [](double phi) {
            phi = wrap_angle(phi);  // the bump term is written for [0, 2 pi)
            const double c = std::cos(phi), s = std::sin(phi);
            const double d = phi - StarCurve::pi();
            return 3.0 / std::sqrt(1.5 * 1.5 * c * c + 2.0 * 2.0 * s * s) +
                   0.75 * std::exp(-std::pow(d, 6.0)) +
                   0.6 * c * std::sin(-2.0 * phi);
        };
    }
    throw std::invalid_argument("target_boundary: unknown id " + id);
}

std::function<double(const Vec2&)> inclusion_field(double background,
                                                   std::vector<Inclusion> inclusions) {
    return [background, inclusions = std::move(inclusions)](const Vec2& p) {
        for (const Inclusion& inc : inclusions)
            if ((p - inc.center).norm() <= inc.radius) return inc.level;
        return background;
    };
}

std::function<double(const Vec2&)> smooth_bump_field() {
    return [](const Vec2& p) {
        const double d2 = (p - Vec2(0.7, 0.4)).squaredNorm();
        return 1.0 + 1.5 * std::exp(-d2 / (0.5 * 0.5));
    };
}

Eigen::VectorXd perturb_electrodes(int m_count, double stddev, std::uint64_t seed,
                                   const StarCurve& curve, double width) {
    if (stddev < 0.0) throw std::invalid_argument("perturb_electrodes: negative stddev");
    GaussianSampler normal(seed);
    const double twopi = 2.0 * StarCurve::pi();
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Eigen::VectorXd theta(m_count);
        for (int m = 0; m < m_count; ++m)
            theta[m] = twopi * m / m_count + stddev * normal();
        try {
            const ElectrodeLayout layout(theta, width);
            const ElectrodeArcs arcs = electrode_arcs(curve, layout);
            // near-touching electrodes leave sliver gap segments that no
            // reasonable surface mesh can resolve; treat them as invalid
            // layouts too and redraw
            double min_gap = 1e300;
            for (int m = 0; m < m_count; ++m) {
                const double next = (m + 1 < m_count)
                                        ? arcs.start[m + 1]
                                        : arcs.start[0] + twopi;
                min_gap = std::min(min_gap, curve.arclength(arcs.end[m], next));
            }
            if (min_gap >= 0.25 * width) return theta;
        } catch (const std::exception&) {
            // redraw the whole vector
        }
    }
    throw std::runtime_error("perturb_electrodes: no valid layout after 1000 draws");
}

Phantom make_phantom(const std::string& id, std::uint64_t seed) {
    Phantom ph;
    ph.id = id;
    ph.m_count = 16;
    auto curve = std::make_shared<AnalyticStarCurve>(target_boundary(id));
    ph.boundary = curve;
    if (id == "exp1") {
        ph.width = 0.3;
        ph.admittivity = [](const Vec2&) { return 1.0; };
    } else {
        // total electrode arc covers two fifths of the perimeter
        ph.width = 0.4 * curve->perimeter() / ph.m_count;
        if (id == "exp2") {
            ph.admittivity = smooth_bump_field();
        } else {
            ph.admittivity = inclusion_field(
                1.0, {{Vec2(1.0, -0.6), 0.5, 10.0}, {Vec2(-1.0, 0.6), 0.5, 10.0}});
        }
    }
    ph.electrode_angles = perturb_electrodes(ph.m_count, 0.1, seed, *curve, ph.width);
    ph.z = Eigen::VectorXd::Ones(ph.m_count);
    return ph;
}

DataSet simulate(const Phantom& phantom, std::uint64_t noise_seed, double h_target,
                 double c1, double c2) {
    const StarCurve& curve = *phantom.boundary;
    const double h = h_target > 0.0 ? h_target : curve.perimeter() / 500.0;

    const ElectrodeLayout layout(phantom.electrode_angles, phantom.width);
    const ElectrodeArcs arcs = electrode_arcs(curve, layout);
    MeshOptions opt;
    opt.h_target = h;
    opt.provenance = "sim";
    const Mesh2D mesh = build_mesh(curve, arcs, opt);

    const P2Space space(mesh);
    Eigen::VectorXd sigma(mesh.vertices.size());
    for (int i = 0; i < static_cast<int>(mesh.vertices.size()); ++i)
        sigma[i] = phantom.admittivity(mesh.vertices[i]);
    const CemSystem system(space, sigma, ContactImpedances(phantom.z));
    const ForwardSolution sol = system.solve_all(DriveBasis::standard(phantom.m_count));

    DataSet ds;
    ds.clean = sol.measurement_vector();
    ds.noise_var = Eigen::VectorXd(ds.clean.size());
    ds.voltages = ds.clean;
    ds.seed = noise_seed;
    ds.phantom_id = phantom.id;
    ds.m_count = phantom.m_count;
    ds.mesh_h = h;

    ds.noise_var = noise_variances(ds.clean, phantom.m_count, c1, c2);
    GaussianSampler normal(noise_seed);
    for (int i = 0; i < ds.voltages.size(); ++i)
        ds.voltages[i] += std::sqrt(ds.noise_var[i]) * normal();
    return ds;
}

}  // namespace eitshape
