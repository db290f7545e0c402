#include "rydcav/electrostatics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "rydcav/atom_light.hpp"

namespace rydcav::electrostatics {

namespace {

struct Aabb {
    Vec3 lo;
    Vec3 hi;
};

Aabb bounds_of(const Conductor& c) {
    if (const auto* b = std::get_if<BoxConductor>(&c)) return {b->lo, b->hi};
    const auto& cy = std::get<CylinderConductor>(c);
    Aabb a{cy.center, cy.center};
    for (int d = 0; d < 3; ++d) {
        const double half = d == cy.axis ? cy.half_length : cy.radius;
        a.lo[d] -= half;
        a.hi[d] += half;
    }
    return a;
}

// Node-index range [first, last] covering [lo, hi] on one axis.
std::pair<int, int> node_range(double lo, double hi, double origin, double h, int n) {
    const int first = std::max(0, static_cast<int>(std::ceil((lo - origin) / h - 1e-9)));
    const int last = std::min(n - 1, static_cast<int>(std::floor((hi - origin) / h + 1e-9)));
    return {first, last};
}

struct Raster {
    std::vector<double> phi;
    std::vector<std::uint8_t> fixed;
};

Raster rasterize(const Scene& scene, int n, double h, double origin) {
    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    Raster r{std::vector<double>(total, 0.0), std::vector<std::uint8_t>(total, 0)};
    auto idx = [n](int i, int j, int k) { return (static_cast<std::size_t>(k) * n + j) * n + i; };

    std::vector<std::uint8_t> owned(total, 0);
    for (std::size_t ci = 0; ci < scene.conductors.size(); ++ci) {
        const Conductor& c = scene.conductors[ci];
        const Aabb box = bounds_of(c);
        const double v = voltage_of(c);
        const auto [i0, i1] = node_range(box.lo[0], box.hi[0], origin, h, n);
        const auto [j0, j1] = node_range(box.lo[1], box.hi[1], origin, h, n);
        const auto [k0, k1] = node_range(box.lo[2], box.hi[2], origin, h, n);
        for (int k = k0; k <= k1; ++k)
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) {
                    const Vec3 p{origin + i * h, origin + j * h, origin + k * h};
                    if (!contains(c, p)) continue;
                    const std::size_t id = idx(i, j, k);
                    if (owned[id] && r.phi[id] != v)
                        throw std::invalid_argument(fmt::format(
                            "conductor {} overlaps another conductor at a different potential", ci));
                    owned[id] = 1;
                    r.fixed[id] = 1;
                    r.phi[id] = v;
                }
    }
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const bool face = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
                const std::size_t id = idx(i, j, k);
                if (!face || owned[id]) continue;
                r.fixed[id] = 1;
                r.phi[id] = scene.outer_boundary
                                ? scene.outer_boundary({origin + i * h, origin + j * h, origin + k * h})
                                : 0.0;
            }
    return r;
}

double max_residual(const PotentialGrid& g) {
    const int n = g.n;
    const std::size_t sx = 1, sy = static_cast<std::size_t>(n), sz = static_cast<std::size_t>(n) * n;
    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(static)
    for (int k = 1; k < n - 1; ++k)
        for (int j = 1; j < n - 1; ++j) {
            std::size_t id = g.index(1, j, k);
            for (int i = 1; i < n - 1; ++i, ++id) {
                if (g.fixed[id]) continue;
                const double lap = g.phi[id - sx] + g.phi[id + sx] + g.phi[id - sy] + g.phi[id + sy] +
                                   g.phi[id - sz] + g.phi[id + sz] - 6.0 * g.phi[id];
                worst = std::max(worst, std::abs(lap) / 6.0);
            }
        }
    return worst;
}

void sor_sweep(PotentialGrid& g, int color, double omega) {
    const int n = g.n;
    const std::size_t sy = static_cast<std::size_t>(n), sz = static_cast<std::size_t>(n) * n;
    double* phi = g.phi.data();
    const std::uint8_t* fixed = g.fixed.data();
#pragma omp parallel for schedule(static)
    for (int k = 1; k < n - 1; ++k)
        for (int j = 1; j < n - 1; ++j) {
            const int i_start = 1 + ((j + k + 1 + color) & 1);
            std::size_t id = g.index(i_start, j, k);
            for (int i = i_start; i < n - 1; i += 2, id += 2) {
                if (fixed[id]) continue;
                const double avg = (phi[id - 1] + phi[id + 1] + phi[id - sy] + phi[id + sy] +
                                    phi[id - sz] + phi[id + sz]) *
                                   (1.0 / 6.0);
                phi[id] += omega * (avg - phi[id]);
            }
        }
}

Vec3 node_gradient(const PotentialGrid& g, int i, int j, int k) {
    const int n = g.n;
    auto diff = [&](int lo_i, int lo_j, int lo_k, int hi_i, int hi_j, int hi_k, int steps) {
        return (g.at(hi_i, hi_j, hi_k) - g.at(lo_i, lo_j, lo_k)) / (steps * g.h);
    };
    Vec3 grad;
    const int il = std::max(i - 1, 0), ih = std::min(i + 1, n - 1);
    const int jl = std::max(j - 1, 0), jh = std::min(j + 1, n - 1);
    const int kl = std::max(k - 1, 0), kh = std::min(k + 1, n - 1);
    grad[0] = diff(il, j, k, ih, j, k, ih - il);
    grad[1] = diff(i, jl, k, i, jh, k, jh - jl);
    grad[2] = diff(i, j, kl, i, j, kh, kh - kl);
    return grad;
}

}  // namespace

bool contains(const Conductor& c, const Vec3& p) {
    constexpr double eps = 1e-12;
    if (const auto* b = std::get_if<BoxConductor>(&c)) {
        for (int d = 0; d < 3; ++d)
            if (p[d] < b->lo[d] - eps || p[d] > b->hi[d] + eps) return false;
        return true;
    }
    const auto& cy = std::get<CylinderConductor>(c);
    double r2 = 0.0;
    for (int d = 0; d < 3; ++d) {
        const double x = p[d] - cy.center[d];
        if (d == cy.axis) {
            if (std::abs(x) > cy.half_length + eps) return false;
        } else {
            r2 += x * x;
        }
    }
    return r2 <= cy.radius * cy.radius + eps;
}

double voltage_of(const Conductor& c) {
    return std::visit([](const auto& x) { return x.voltage; }, c);
}

void Scene::validate() const {
    if (!(extent > 0.0)) throw std::invalid_argument("scene extent must be > 0");
    if (points < 3) throw std::invalid_argument("scene needs at least 3 nodes per axis");
    const double half = 0.5 * extent;
    for (std::size_t ci = 0; ci < conductors.size(); ++ci) {
        const Conductor& c = conductors[ci];
        if (const auto* cy = std::get_if<CylinderConductor>(&c)) {
            if (cy->axis < 0 || cy->axis > 2) throw std::invalid_argument("cylinder axis must be 0, 1 or 2");
            if (!(cy->radius > 0.0) || !(cy->half_length > 0.0))
                throw std::invalid_argument("cylinder radius and length must be > 0");
        }
        const Aabb a = bounds_of(c);
        for (int d = 0; d < 3; ++d) {
            if (a.lo[d] > a.hi[d]) throw std::invalid_argument(fmt::format("conductor {} has inverted bounds", ci));
            if (a.lo[d] < -half - 1e-12 || a.hi[d] > half + 1e-12)
                throw std::out_of_range(fmt::format("conductor {} extends outside the domain", ci));
        }
    }
}

PotentialGrid solve(const Scene& scene, const SolverOptions& options) {
    scene.validate();
    if (!(options.tol > 0.0) && !options.fixed_iterations)
        throw std::invalid_argument("solver tolerance must be > 0");
    if (!(options.omega > 0.0 && options.omega < 2.0))
        throw std::invalid_argument("SOR relaxation factor must lie in (0, 2)");

    PotentialGrid g;
    g.n = scene.points;
    g.h = scene.spacing();
    g.origin = -0.5 * scene.extent;
    g.conductors = scene.conductors;
    g.stray_field = scene.stray_field;
    Raster r = rasterize(scene, g.n, g.h, g.origin);
    g.phi = std::move(r.phi);
    g.fixed = std::move(r.fixed);

    double bmin = 0.0, bmax = 0.0;
    bool any = false;
    for (std::size_t id = 0; id < g.phi.size(); ++id) {
        if (!g.fixed[id]) continue;
        bmin = any ? std::min(bmin, g.phi[id]) : g.phi[id];
        bmax = any ? std::max(bmax, g.phi[id]) : g.phi[id];
        any = true;
    }
    g.boundary_min = bmin;
    g.boundary_max = bmax;
    const double scale = std::max(std::abs(bmin), std::abs(bmax));
    if (scale == 0.0) {
        g.converged = true;
        return g;
    }

    const int check = std::max(1, options.check_every);
    while (g.iterations < options.max_iters) {
        sor_sweep(g, 0, options.omega);
        sor_sweep(g, 1, options.omega);
        ++g.iterations;
        if (!options.fixed_iterations && g.iterations % check == 0) {
            g.residual = max_residual(g) / scale;
            if (g.residual < options.tol) {
                g.converged = true;
                return g;
            }
        }
    }
    g.residual = max_residual(g) / scale;
    g.converged = options.fixed_iterations || g.residual < options.tol;
    return g;
}

FieldSample field_at(const PotentialGrid& g, const Vec3& position) {
    for (const auto& c : g.conductors)
        if (contains(c, position)) throw std::domain_error("field probe lies inside a conductor");
    int base[3];
    double frac[3];
    for (int d = 0; d < 3; ++d) {
        const double f = (position[d] - g.origin) / g.h;
        if (!(f > 0.0 && f < g.n - 1)) throw std::out_of_range("field probe must lie strictly inside the domain");
        base[d] = std::min(static_cast<int>(std::floor(f)), g.n - 2);
        frac[d] = f - base[d];
    }
    Vec3 grad{0.0, 0.0, 0.0};
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1, dj = c >> 1 & 1, dk = c >> 2 & 1;
        const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                         (dk ? frac[2] : 1.0 - frac[2]);
        if (w == 0.0) continue;
        const Vec3 gn = node_gradient(g, base[0] + di, base[1] + dj, base[2] + dk);
        for (int d = 0; d < 3; ++d) grad[d] += w * gn[d];
    }
    FieldSample s;
    s.position = position;
    for (int d = 0; d < 3; ++d) s.e[d] = -grad[d] + g.stray_field[d];
    s.magnitude = std::sqrt(s.e[0] * s.e[0] + s.e[1] * s.e[1] + s.e[2] * s.e[2]);
    return s;
}

Scene build_shield_scene(bool shielded, double v1, double v2, const AssemblyGeometry& geom) {
    if (std::abs(v1) > 1000.0 || std::abs(v2) > 1000.0)
        throw std::invalid_argument("piezo voltages beyond the 1 kV sanity bound");
    Scene scene;
    scene.extent = geom.extent;
    scene.points = geom.points;

    const double half_len = 0.5 * geom.piezo_length;
    const double zc = geom.piezo_distance + half_len;
    const double volts[2] = {v1, v2};
    for (int side = 0; side < 2; ++side) {
        const double sgn = side == 0 ? 1.0 : -1.0;
        scene.conductors.push_back(
            CylinderConductor{{0.0, 0.0, sgn * zc}, 2, geom.piezo_radius, half_len, volts[side]});
        if (!shielded) continue;

        // grounded shell: interior |x|,|y| <= s, z in [z_in, z_out] on this side
        const double s = geom.piezo_radius + geom.shield_clearance;
        const double t = geom.shield_wall;
        const double z_in = geom.piezo_distance - geom.shield_clearance;
        const double z_out = geom.piezo_distance + geom.piezo_length + geom.shield_clearance;
        auto add = [&](double x0, double x1, double y0, double y1, double za, double zb) {
            const double lo = std::min(sgn * za, sgn * zb);
            const double hi = std::max(sgn * za, sgn * zb);
            scene.conductors.push_back(BoxConductor{{x0, y0, lo}, {x1, y1, hi}, 0.0});
        };
        const double o = s + t;
        add(-o, -s, -o, o, z_in - t, z_out + t);  // side walls
        add(s, o, -o, o, z_in - t, z_out + t);
        add(-s, s, -o, -s, z_in - t, z_out + t);
        add(-s, s, s, o, z_in - t, z_out + t);
        add(-s, s, -s, s, z_out, z_out + t);  // back wall
        const double a = 0.5 * geom.aperture;
        if (a <= 0.0) {
            add(-s, s, -s, s, z_in - t, z_in);  // closed front wall
        } else {
            add(-s, -a, -s, s, z_in - t, z_in);
            add(a, s, -s, s, z_in - t, z_in);
            add(-a, a, -s, -a, z_in - t, z_in);
            add(-a, a, a, s, z_in - t, z_in);
        }
    }
    scene.validate();
    return scene;
}

ShieldingResult shielding_factor(const PotentialGrid& unshielded, const PotentialGrid& shielded,
                                 const Vec3& position) {
    if (unshielded.n != shielded.n || unshielded.h != shielded.h || unshielded.origin != shielded.origin)
        throw std::invalid_argument("shielding_factor: scenes must share one grid");
    ShieldingResult r;
    r.e_unshielded = field_at(unshielded, position).magnitude;
    r.e_shielded = field_at(shielded, position).magnitude;
    const double scale = std::max(std::abs(shielded.boundary_min), std::abs(shielded.boundary_max));
    const double floor = std::max(shielded.residual, 1e-12) * std::max(scale, 1e-300) / shielded.h;
    if (r.e_shielded < floor) {
        r.lower_bound = true;
        r.ratio = r.e_unshielded / floor;
    } else {
        r.ratio = r.e_unshielded / r.e_shielded;
    }
    return r;
}

std::vector<StarkPoint> stark_sweep(const SceneBuilder& builder, const std::vector<double>& voltages,
                                    double polarizability, const Vec3& probe,
                                    const SolverOptions& options) {
    if (polarizability < 0.0) throw std::invalid_argument("stark_sweep: polarizability must be >= 0");
    std::vector<StarkPoint> out;
    out.reserve(voltages.size());
    for (double v : voltages) {
        const PotentialGrid g = solve(builder(v), options);
        StarkPoint pt;
        pt.voltage = v;
        pt.e_field = field_at(g, probe).magnitude;
        pt.shift = atom_light::stark_shift(polarizability, pt.e_field);
        pt.residual = g.residual;
        pt.converged = g.converged;
        out.push_back(pt);
    }
    return out;
}

void write_slice_csv(std::ostream& os, const PotentialGrid& g, int axis, int index) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("slice axis must be 0, 1 or 2");
    if (index < 0 || index >= g.n) throw std::out_of_range("slice index outside the grid");
    os << "x_m,y_m,z_m,phi_v,ex,ey,ez\n";
    for (int b = 0; b < g.n; ++b)
        for (int a = 0; a < g.n; ++a) {
            int ijk[3];
            ijk[axis] = index;
            ijk[(axis + 1) % 3] = a;
            ijk[(axis + 2) % 3] = b;
            const Vec3 p = g.node_position(ijk[0], ijk[1], ijk[2]);
            const Vec3 grad = node_gradient(g, ijk[0], ijk[1], ijk[2]);
            os << fmt::format("{:.9g},{:.9g},{:.9g},{:.12g},{:.12g},{:.12g},{:.12g}\n", p[0], p[1], p[2],
                              g.at(ijk[0], ijk[1], ijk[2]), -grad[0] + g.stray_field[0],
                              -grad[1] + g.stray_field[1], -grad[2] + g.stray_field[2]);
        }
}

}  // namespace rydcav::electrostatics
