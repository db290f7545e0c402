#include "rydcav/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "rydcav/atom_light.hpp"
#include "rydcav/rng.hpp"

namespace rydcav::dynamics {

namespace {

void check_atom_count(int n) {
    if (n < 1) throw std::invalid_argument("need at least one atom");
    if (n > kMaxAtoms)
        throw std::length_error(fmt::format("{} atoms exceeds the hard cap of {}", n, kMaxAtoms));
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

}  // namespace

QuantumState QuantumState::ground(int n_atoms) {
    check_atom_count(n_atoms);
    QuantumState s;
    s.n_atoms = n_atoms;
    s.amplitudes = Eigen::VectorXcd::Zero(Eigen::Index{1} << n_atoms);
    s.amplitudes[0] = 1.0;
    return s;
}

QuantumState QuantumState::w_state(int n_atoms) {
    check_atom_count(n_atoms);
    QuantumState s;
    s.n_atoms = n_atoms;
    s.amplitudes = Eigen::VectorXcd::Zero(Eigen::Index{1} << n_atoms);
    const double a = 1.0 / std::sqrt(static_cast<double>(n_atoms));
    for (int k = 0; k < n_atoms; ++k) s.amplitudes[Eigen::Index{1} << k] = a;
    return s;
}

Eigen::MatrixXd interaction_matrix(std::span<const Vec3> positions, double c6) {
    const auto n = static_cast<Eigen::Index>(positions.size());
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = distance(positions[i], positions[j]);
            if (!(r > 0.0))
                throw std::invalid_argument(fmt::format("atoms {} and {} coincide", i, j));
            v(i, j) = v(j, i) = atom_light::vdw_interaction(c6, meters(r)).value;
        }
    return v;
}

BlockadeHamiltonian build_hamiltonian(const Eigen::MatrixXd& vmat, FrequencyHz omega,
                                      FrequencyHz detuning) {
    const int n = static_cast<int>(vmat.rows());
    check_atom_count(n);
    if (vmat.cols() != vmat.rows()) throw std::invalid_argument("interaction matrix must be square");

    BlockadeHamiltonian h;
    h.n_atoms = n;
    h.omega = omega;
    h.detuning = detuning;
    h.vmat = vmat;
    const auto dim = static_cast<Eigen::Index>(h.dim());
    h.matrix = Eigen::MatrixXcd::Zero(dim, dim);
    const double half_rabi = 0.5 * to_angular(omega);
    const double delta = to_angular(detuning);
    for (Eigen::Index b = 0; b < dim; ++b) {
        double diag = -delta * std::popcount(static_cast<std::uint64_t>(b));
        for (int i = 0; i < n; ++i) {
            if (!(b >> i & 1)) continue;
            for (int j = i + 1; j < n; ++j)
                if (b >> j & 1) diag += kTwoPi * vmat(i, j);
        }
        h.matrix(b, b) = diag;
        for (int i = 0; i < n; ++i) h.matrix(b ^ (Eigen::Index{1} << i), b) = half_rabi;
    }
    return h;
}

BlockadeHamiltonian build_hamiltonian(std::span<const Vec3> positions, double c6, FrequencyHz omega,
                                      FrequencyHz detuning) {
    check_atom_count(static_cast<int>(positions.size()));
    return build_hamiltonian(interaction_matrix(positions, c6), omega, detuning);
}

Propagator::Propagator(const BlockadeHamiltonian& h) : n_atoms_(h.n_atoms) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.matrix);
    if (es.info() != Eigen::Success) throw std::runtime_error("Hamiltonian diagonalisation failed");
    energies_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
}

QuantumState Propagator::evolve(const QuantumState& psi, double t_seconds) const {
    if (psi.amplitudes.size() != energies_.size())
        throw std::invalid_argument("state and Hamiltonian dimensions differ");
    if (t_seconds < 0.0) throw std::invalid_argument("evolution time must be >= 0");
    Eigen::VectorXcd c = vectors_.adjoint() * psi.amplitudes;
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::polar(1.0, -energies_[k] * t_seconds);
    QuantumState out;
    out.n_atoms = n_atoms_;
    out.amplitudes = vectors_ * c;
    return out;
}

QuantumState evolve(const QuantumState& psi, const BlockadeHamiltonian& h, double t_seconds) {
    return Propagator(h).evolve(psi, t_seconds);
}

ExcitationDistribution excitation_distribution(const QuantumState& psi) {
    ExcitationDistribution d;
    d.p.assign(static_cast<std::size_t>(psi.n_atoms) + 1, 0.0);
    for (Eigen::Index b = 0; b < psi.amplitudes.size(); ++b)
        d.p[std::popcount(static_cast<std::uint64_t>(b))] += std::norm(psi.amplitudes[b]);
    d.p_le1 = d.p[0] + (d.p.size() > 1 ? d.p[1] : 0.0);
    return d;
}

ExcitationDistribution excitation_distribution(const QuantumState& psi, double flip_prob) {
    if (flip_prob < 0.0 || flip_prob > 1.0) throw std::invalid_argument("flip probability must be in [0,1]");
    ExcitationDistribution ideal = excitation_distribution(psi);
    if (flip_prob == 0.0) return ideal;
    const int n = psi.n_atoms;
    const double f = flip_prob;
    ExcitationDistribution d;
    d.p.assign(static_cast<std::size_t>(n) + 1, 0.0);
    // m true excitations: a of them read as ground, b ground atoms read as excited
    for (int m = 0; m <= n; ++m) {
        for (int a = 0; a <= m; ++a) {
            const double pa = binomial(m, a) * std::pow(f, a) * std::pow(1.0 - f, m - a);
            for (int b = 0; b <= n - m; ++b) {
                const double pb = binomial(n - m, b) * std::pow(f, b) * std::pow(1.0 - f, n - m - b);
                d.p[m - a + b] += ideal.p[m] * pa * pb;
            }
        }
    }
    d.p_le1 = d.p[0] + (n >= 1 ? d.p[1] : 0.0);
    return d;
}

void NoiseModel::validate() const {
    if (sigma_delta.value < 0.0 || sigma_omega_rel < 0.0)
        throw std::invalid_argument("noise spreads must be >= 0");
}

ScanResult collective_rabi_scan(const ScanRequest& req, std::uint64_t seed) {
    const int n = static_cast<int>(req.positions.size());
    check_atom_count(n);
    if (req.shots < 1) throw std::invalid_argument("collective_rabi_scan: shots must be >= 1");
    if (req.times.empty()) throw std::invalid_argument("collective_rabi_scan: empty time grid");
    if (!std::is_sorted(req.times.begin(), req.times.end()))
        throw std::invalid_argument("collective_rabi_scan: times must be ascending");
    req.noise.validate();

    const Eigen::MatrixXd vmat = interaction_matrix(req.positions, req.c6);
    const std::size_t nt = req.times.size();
    const std::size_t nk = static_cast<std::size_t>(n) + 1;
    const bool noiseless = req.noise.sigma_delta.value == 0.0 && req.noise.sigma_omega_rel == 0.0 &&
                           req.noise.stark_ramp_shift.value == 0.0;
    const int shots = noiseless ? 1 : req.shots;

    // per-shot buffers, reduced afterwards in shot order
    std::vector<std::vector<double>> per_shot(static_cast<std::size_t>(shots),
                                              std::vector<double>(nt * nk, 0.0));
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < shots; ++s) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(s));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        const double z_omega = gauss(rng);
        const double z_delta = gauss(rng);
        const double u = uni(rng);
        const FrequencyHz omega =
            req.drive.omega * std::max(0.0, 1.0 + req.noise.sigma_omega_rel * z_omega);
        const FrequencyHz delta = req.drive.detuning + req.noise.sigma_delta * z_delta +
                                  req.noise.stark_ramp_shift * (u * u);
        const Propagator prop(build_hamiltonian(vmat, omega, delta));
        const QuantumState psi0 = QuantumState::ground(n);
        auto& buf = per_shot[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < nt; ++i) {
            const auto d = excitation_distribution(prop.evolve(psi0, req.times[i]), req.detection_flip_prob);
            for (std::size_t k = 0; k < nk; ++k) buf[i * nk + k] = d.p[k];
        }
    }

    ScanResult res;
    res.records.resize(nt);
    std::vector<double> p1(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        ShotRecord& rec = res.records[i];
        rec.time = req.times[i];
        rec.n_initial = n;
        rec.excitation_counts.assign(nk, 0.0);
        for (int s = 0; s < shots; ++s)
            for (std::size_t k = 0; k < nk; ++k)
                rec.excitation_counts[k] += per_shot[static_cast<std::size_t>(s)][i * nk + k];
        for (auto& v : rec.excitation_counts) v /= shots;
        rec.p_le1 = rec.excitation_counts[0] + (nk > 1 ? rec.excitation_counts[1] : 0.0);
        p1[i] = nk > 1 ? rec.excitation_counts[1] : 0.0;
    }

    analysis::DampedCosineOptions opts;
    opts.fixed_t0 = 0.0;
    res.fit = analysis::fit_damped_cosine(req.times, p1, std::nullopt, opts);
    res.omega_fit = res.fit.params.omega;
    res.tau_fit = res.fit.params.tau;
    res.quality_factor = res.fit.quality_factor();
    res.fit_ok = res.fit.raw.converged && !res.fit.degenerate;
    return res;
}

double double_excitation_fraction(const ScanResult& result) {
    double worst = 0.0;
    for (const auto& rec : result.records) {
        double p2 = 0.0;
        for (std::size_t k = 2; k < rec.excitation_counts.size(); ++k) p2 += rec.excitation_counts[k];
        worst = std::max(worst, p2);
    }
    return worst;
}

std::vector<Vec3> square_group(LengthMeters spacing) {
    const double h = 0.5 * spacing.value;
    return {Vec3{-h, -h, 0.0}, Vec3{h, -h, 0.0}, Vec3{-h, h, 0.0}, Vec3{h, h, 0.0}};
}

}  // namespace rydcav::dynamics
