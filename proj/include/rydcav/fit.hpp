#pragma once

// Nonlinear least squares. fit_lm is a plain Levenberg-Marquardt engine with a
// forward-difference Jacobian; the model-specific fits wrap it with their own
// parameterisations and internal rescaling so every parameter is O(1).

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydcav/cavity.hpp"
#include "rydcav/units.hpp"

namespace rydcav::analysis {

struct FitResult {
    Eigen::VectorXd params;
    Eigen::VectorXd sigmas;  // 1 sigma from the local quadratic model; +inf when singular
    Eigen::MatrixXd covariance;
    double rss = 0.0;
    bool converged = false;
    bool singular = false;
    int iterations = 0;
    std::string message;

    bool authoritative() const { return converged && !singular; }
};

using Model = std::function<double(double x, const Eigen::VectorXd& params)>;

struct Bounds {
    Eigen::VectorXd lower;  // empty means unbounded
    Eigen::VectorXd upper;
};

struct LmOptions {
    int max_iterations = 200;
    double rel_cost_tol = 1e-10;
    double initial_lambda = 1e-3;
    /// Typical magnitude per parameter for the finite-difference step.
    Eigen::VectorXd typical;
    /// Per-point weights (1 / variance); empty means unweighted.
    std::span<const double> weights;
};

/// Minimises sum (y_i - model(x_i; p))^2 starting from `init`.
/// Throws std::invalid_argument if the data are shorter than the parameter
/// vector or init lies outside the bounds.
FitResult fit_lm(const Model& model, std::span<const double> x, std::span<const double> y,
                 const Eigen::VectorXd& init, const Bounds& bounds = {},
                 const LmOptions& options = {});

// --- damped cosine --------------------------------------------------------

/// A (1 - exp(-(t - t0)/tau) cos(2 pi omega (t - t0) + phi)).
struct DampedCosine {
    double amplitude = 0.5;
    double t0 = 0.0;
    double tau = 1.0;  // s; +inf for an undamped oscillation
    FrequencyHz omega;
    double phi = 0.0;

    double operator()(double t) const;
};

struct DampedCosineOptions {
    /// Hold t0 at this value instead of fitting it. Needed when the data are
    /// undamped, where t0 and phi are degenerate.
    std::optional<double> fixed_t0;
};

struct DampedCosineFit {
    DampedCosine params;
    DampedCosine sigmas;
    FitResult raw;
    bool degenerate = false;
    /// Set when the fitted dephasing time exceeds the observation window; tau
    /// then holds that window as a lower bound.
    bool tau_is_lower_bound = false;

    /// Coherent oscillations per dephasing time, omega * tau.
    double quality_factor() const { return params.omega.value * params.tau; }
};

DampedCosineFit fit_damped_cosine(std::span<const double> t, std::span<const double> p,
                                  std::optional<DampedCosine> init = std::nullopt,
                                  const DampedCosineOptions& options = {});

// --- Lorentzian sums ------------------------------------------------------

struct LorentzianPeakFit {
    FrequencyHz center;
    FrequencyHz center_sigma;
    FrequencyHz width;
    FrequencyHz width_sigma;
    double amplitude = 0.0;
    double amplitude_sigma = 0.0;
};

struct LorentzianSumFit {
    double background = 0.0;
    double background_sigma = 0.0;
    std::vector<LorentzianPeakFit> peaks;
    FitResult raw;

    cavity::ModeFamily as_family() const;
};

/// background + sum_k A_k / (1 + 4 (x - c_k)^2 / w_k^2) fitted with the first
/// `n_peaks` peaks of `init` (which must be ordered by offset). Centres are
/// parameterised as c_0 plus cumulative positive gaps. Only the relative
/// heights in `init` matter; the overall scale is taken from the data.
LorentzianSumFit fit_lorentzian_sum(std::span<const double> x_hz, std::span<const double> y,
                                    int n_peaks, const cavity::ModeFamily& init,
                                    std::span<const double> weights = {});

// --- exponential decay ----------------------------------------------------

struct ExponentialFit {
    double amplitude = 0.0;
    double amplitude_sigma = 0.0;
    double lifetime = 0.0;  // +inf when no decay is resolved
    double lifetime_sigma = 0.0;
    bool unbounded = false;
    FitResult raw;
};

/// A exp(-t / T). Throws std::invalid_argument on non-positive y values or
/// fewer than three points.
ExponentialFit fit_exponential(std::span<const double> t, std::span<const double> y);

}  // namespace rydcav::analysis
