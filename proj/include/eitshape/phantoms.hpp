#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "eitshape/geometry.hpp"
#include "eitshape/mesh.hpp"

namespace eitshape {

/// Deterministic standard-normal sampler (64-bit Mersenne Twister plus
/// Box-Muller); identical streams for identical seeds on any platform with
/// IEEE doubles.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}
    double operator()();

private:
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Analytic radius functions of the three target configurations.
/// exp1: perturbed ellipse with a bump and a cos*sin ripple;
/// exp2: plain ellipse, semi-axes (2, 1.5);
/// exp3: smaller perturbed ellipse (inclusion experiment).
std::function<double(double)> target_boundary(const std::string& id);

struct Inclusion {
    Vec2 center;
    double radius;
    double level;
};

/// Piecewise-constant admittivity: `background` outside, each disc's level
/// inside.
std::function<double(const Vec2&)> inclusion_field(double background,
                                                   std::vector<Inclusion> inclusions);

/// Smooth admittivity stand-in for the second experiment: background 1 plus a
/// Gaussian bump of height 1.5, width 0.5, centered at (0.7, 0.4).
/// The published experiment shows the field only as a figure; this default is
/// a stand-in, not a reproduction.
std::function<double(const Vec2&)> smooth_bump_field();

/// Electrode initial angles 2 pi (m-1)/M + eps_m with eps ~ N(0, stddev^2),
/// redrawn until the layout (given curve and width) is valid.
Eigen::VectorXd perturb_electrodes(int m_count, double stddev, std::uint64_t seed,
                                   const StarCurve& curve, double width);

struct Phantom {
    std::string id;
    std::shared_ptr<const StarCurve> boundary;
    int m_count = 16;
    double width = 0.3;
    Eigen::VectorXd electrode_angles;
    Eigen::VectorXd z;  // contact impedances
    std::function<double(const Vec2&)> admittivity;
};

/// Assembles one of the three documented configurations: M = 16, z = 1,
/// angle perturbation stddev 0.1. exp1 uses electrode width 0.3 and
/// admittivity 1; exp2/exp3 use total electrode coverage of two fifths of
/// the perimeter with the smooth-bump / inclusion fields.
Phantom make_phantom(const std::string& id, std::uint64_t seed);

struct DataSet {
    Eigen::VectorXd voltages;   // noisy, length M(M-1)
    Eigen::VectorXd clean;      // noise-free fine-mesh voltages
    Eigen::VectorXd noise_var;  // per-entry variance (known to the inversion)
    std::uint64_t seed = 0;
    std::string phantom_id;
    int m_count = 0;
    double mesh_h = 0.0;  // fine-mesh target spacing used
};

/// Simulates measurement data on a fine, independently generated mesh of the
/// analytic boundary (provenance-tagged "sim"). h_target <= 0 selects
/// perimeter/500, i.e. 2.5x finer than the reconstruction default.
DataSet simulate(const Phantom& phantom, std::uint64_t noise_seed,
                 double h_target = 0.0, double c1 = 0.01, double c2 = 0.001);

}  // namespace eitshape
