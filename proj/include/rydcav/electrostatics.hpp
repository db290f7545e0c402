#pragma once

// Finite-difference Laplace solver for conductor scenes on a uniform cubic
// grid centred at the origin. Conductors are rasterised node-wise (staircase
// boundaries) and held at fixed potential; the outer faces are Dirichlet.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rydcav/units.hpp"

namespace rydcav::electrostatics {

struct BoxConductor {
    Vec3 lo;
    Vec3 hi;
    double voltage = 0.0;
};

struct CylinderConductor {
    Vec3 center;
    int axis = 2;  // 0 = x, 1 = y, 2 = z
    double radius = 0.0;
    double half_length = 0.0;
    double voltage = 0.0;
};

using Conductor = std::variant<BoxConductor, CylinderConductor>;

bool contains(const Conductor& c, const Vec3& p);
double voltage_of(const Conductor& c);

struct Scene {
    double extent = 40e-3;  // edge of the cubic domain, m
    int points = 129;       // nodes per axis
    std::vector<Conductor> conductors;
    /// Potential on the outer faces; grounded when empty.
    std::function<double(const Vec3&)> outer_boundary;
    /// Uniform background field added to every field sample (V/m).
    Vec3 stray_field{0.0, 0.0, 0.0};

    double spacing() const { return extent / (points - 1); }
    /// Throws on conductors outside the domain or overlapping conductors at
    /// different potentials.
    void validate() const;
};

struct SolverOptions {
    double tol = 1e-6;  // max nodal residual relative to the largest boundary potential
    int max_iters = 20000;
    double omega = 1.9;
    int check_every = 10;
    /// Run exactly max_iters sweeps, ignoring tol.
    bool fixed_iterations = false;
};

struct PotentialGrid {
    int n = 0;
    double h = 0.0;
    double origin = 0.0;  // coordinate of node 0 on every axis
    std::vector<double> phi;
    std::vector<std::uint8_t> fixed;
    std::vector<Conductor> conductors;
    Vec3 stray_field{0.0, 0.0, 0.0};
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    double boundary_min = 0.0;
    double boundary_max = 0.0;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * n + j) * n + i;
    }
    double at(int i, int j, int k) const { return phi[index(i, j, k)]; }
    Vec3 node_position(int i, int j, int k) const {
        return {origin + i * h, origin + j * h, origin + k * h};
    }
};

/// Red-black successive over-relaxation of the 7-point Laplacian. A solve
/// that hits max_iters returns with converged == false.
PotentialGrid solve(const Scene& scene, const SolverOptions& options = {});

struct FieldSample {
    Vec3 position;
    Vec3 e;
    double magnitude = 0.0;
};

/// E = -grad(phi): central differences at the nodes, trilinear interpolation
/// to `position`, plus the scene's stray field.
FieldSample field_at(const PotentialGrid& grid, const Vec3& position);

// --- model of the cavity assembly -------------------------------------------

/// Two piezo cylinders on the cavity (z) axis facing the atoms at the origin.
/// When shielded, each sits in a grounded box whose atom-facing wall has a
/// square aperture for the mirror.
struct AssemblyGeometry {
    double extent = 40e-3;
    int points = 129;
    double piezo_distance = 10e-3;  // origin to the atom-facing piezo face
    double piezo_radius = 4e-3;
    double piezo_length = 4e-3;
    double shield_clearance = 1.5e-3;
    double shield_wall = 1e-3;
    double aperture = 4e-3;  // edge of the square opening; 0 closes the box
};

Scene build_shield_scene(bool shielded, double v1, double v2, const AssemblyGeometry& geom = {});

struct ShieldingResult {
    double ratio = 0.0;
    bool lower_bound = false;
    double e_unshielded = 0.0;
    double e_shielded = 0.0;
};

/// |E_unshielded| / |E_shielded| at `position`. If the shielded field sits
/// below the solver's numerical floor the floor is used and the ratio is a
/// lower bound.
ShieldingResult shielding_factor(const PotentialGrid& unshielded, const PotentialGrid& shielded,
                                 const Vec3& position);

struct StarkPoint {
    double voltage = 0.0;
    double e_field = 0.0;  // |E| at the probe, V/m
    FrequencyHz shift;
    double residual = 0.0;
    bool converged = false;
};

using SceneBuilder = std::function<Scene(double voltage)>;

std::vector<StarkPoint> stark_sweep(const SceneBuilder& builder, const std::vector<double>& voltages,
                                    double polarizability, const Vec3& probe = {0.0, 0.0, 0.0},
                                    const SolverOptions& options = {});

/// CSV slice through node plane `index` normal to `axis`:
/// x_m, y_m, z_m, phi_v, ex, ey, ez
void write_slice_csv(std::ostream& os, const PotentialGrid& grid, int axis, int index);

}  // namespace rydcav::electrostatics
