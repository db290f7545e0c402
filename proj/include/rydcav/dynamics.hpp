#pragma once

// Exact dynamics of N <= 12 two-level atoms (ground/Rydberg) with van der
// Waals interactions. Basis index bit k set means atom k is in |r>.
//
//   H = sum_i (Omega/2) sigma_x^i - Delta sum_i n_i + sum_{i<j} V_ij n_i n_j
//
// H is stored in angular units (rad/s); inputs are ordinary Hz.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rydcav/fit.hpp"
#include "rydcav/units.hpp"

namespace rydcav::dynamics {

inline constexpr int kMaxAtoms = 12;

struct QuantumState {
    int n_atoms = 0;
    Eigen::VectorXcd amplitudes;

    static QuantumState ground(int n_atoms);
    /// Symmetric single-excitation state.
    static QuantumState w_state(int n_atoms);
    double norm() const { return amplitudes.norm(); }
};

struct BlockadeHamiltonian {
    int n_atoms = 0;
    FrequencyHz omega;
    FrequencyHz detuning;
    Eigen::MatrixXd vmat;    // Hz, symmetric, zero diagonal
    Eigen::MatrixXcd matrix;  // rad/s

    std::size_t dim() const { return std::size_t{1} << n_atoms; }
};

/// Builds H from an explicit interaction matrix (Hz).
BlockadeHamiltonian build_hamiltonian(const Eigen::MatrixXd& vmat, FrequencyHz omega,
                                      FrequencyHz detuning);

/// Builds H from atom positions with V_ij = C6 / R_ij^6.
BlockadeHamiltonian build_hamiltonian(std::span<const Vec3> positions, double c6, FrequencyHz omega,
                                      FrequencyHz detuning);

Eigen::MatrixXd interaction_matrix(std::span<const Vec3> positions, double c6);

/// exp(-i H t) from one Hermitian eigendecomposition, reused for every t.
class Propagator {
public:
    explicit Propagator(const BlockadeHamiltonian& h);

    QuantumState evolve(const QuantumState& psi, double t_seconds) const;
    std::size_t dim() const { return static_cast<std::size_t>(energies_.size()); }

private:
    int n_atoms_;
    Eigen::VectorXd energies_;
    Eigen::MatrixXcd vectors_;
};

QuantumState evolve(const QuantumState& psi, const BlockadeHamiltonian& h, double t_seconds);

struct ExcitationDistribution {
    std::vector<double> p;  // p[k] = probability of k excitations
    double p_le1 = 0.0;
};

ExcitationDistribution excitation_distribution(const QuantumState& psi);

/// Same, after each atom's readout is flipped independently with
/// probability `flip_prob`.
ExcitationDistribution excitation_distribution(const QuantumState& psi, double flip_prob);

struct NoiseModel {
    FrequencyHz sigma_delta;     // quasi-static detuning spread per shot
    double sigma_omega_rel = 0.0;  // relative Rabi-amplitude spread per shot
    /// Peak Stark shift of a voltage ramp sampled uniformly per shot; the
    /// detuning offset is stark_ramp_shift * u^2 with u ~ U(-1, 1).
    FrequencyHz stark_ramp_shift;

    void validate() const;
};

struct Drive {
    FrequencyHz omega;
    FrequencyHz detuning;
};

struct ShotRecord {
    double time = 0.0;
    int n_initial = 0;
    std::vector<double> excitation_counts;  // probability per k = 0..N
    double p_le1 = 0.0;
};

struct ScanRequest {
    std::vector<Vec3> positions;  // one group; its size is N
    double c6 = 0.0;
    Drive drive;
    NoiseModel noise;
    std::vector<double> times;
    int shots = 1;
    double detection_flip_prob = 0.0;
};

struct ScanResult {
    std::vector<ShotRecord> records;
    analysis::DampedCosineFit fit;  // fitted to the single-excitation probability P(1)
    FrequencyHz omega_fit;
    double tau_fit = 0.0;
    double quality_factor = 0.0;
    bool fit_ok = false;
};

/// Shot-averaged P(k) trajectories from |g...g>, then a damped-cosine fit of
/// P(1)(t) with t0 fixed at zero.
ScanResult collective_rabi_scan(const ScanRequest& req, std::uint64_t seed);

/// max over time of P(k >= 2).
double double_excitation_fraction(const ScanResult& result);

/// Sites of a square 2x2 group with the given spacing, centred at the origin.
std::vector<Vec3> square_group(LengthMeters spacing);

}  // namespace rydcav::dynamics
