#include "rydcav/fit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace rydcav::analysis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// r_i = sqrt(w_i) (y_i - f_i); sw empty means unit weights.
double residual_sum(const Model& model, std::span<const double> x, std::span<const double> y,
                    const Eigen::VectorXd& sw, const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        r[ii] = y[i] - model(x[i], p);
        if (sw.size()) r[ii] *= sw[ii];
    }
    return r.squaredNorm();
}

void clamp_to(Eigen::VectorXd& p, const Bounds& b) {
    if (b.lower.size() == p.size()) p = p.cwiseMax(b.lower);
    if (b.upper.size() == p.size()) p = p.cwiseMin(b.upper);
}

// Covariance from the Gauss-Newton curvature, with singularity detected on the
// column-equilibrated normal matrix.
void fill_uncertainties(FitResult& res, const Eigen::MatrixXd& jac, std::size_t m) {
    const auto n = res.params.size();
    Eigen::MatrixXd a = jac.transpose() * jac;
    Eigen::VectorXd d(n);
    for (Eigen::Index j = 0; j < n; ++j) d[j] = a(j, j) > 0.0 ? 1.0 / std::sqrt(a(j, j)) : 0.0;
    Eigen::MatrixXd scaled = d.asDiagonal() * a * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
    const double emax = es.eigenvalues().maxCoeff();
    const double emin = es.eigenvalues().minCoeff();
    const bool zero_column = (d.array() == 0.0).any();
    if (zero_column || !(emax > 0.0) || emin <= 1e-13 * emax) {
        res.singular = true;
        res.covariance = Eigen::MatrixXd::Constant(n, n, kInf);
        res.sigmas = Eigen::VectorXd::Constant(n, kInf);
        if (res.message.empty()) res.message = "singular normal equations";
        return;
    }
    const double dof = std::max<double>(1.0, static_cast<double>(m) - static_cast<double>(n));
    const double s2 = res.rss / dof;
    Eigen::MatrixXd inv_scaled = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                                 es.eigenvectors().transpose();
    res.covariance = s2 * (d.asDiagonal() * inv_scaled * d.asDiagonal());
    res.sigmas = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

FitResult fit_lm(const Model& model, std::span<const double> x, std::span<const double> y,
                 const Eigen::VectorXd& init, const Bounds& bounds, const LmOptions& options) {
    const auto n = init.size();
    const std::size_t m = x.size();
    if (y.size() != m) throw std::invalid_argument("fit_lm: x and y lengths differ");
    if (m < static_cast<std::size_t>(n))
        throw std::invalid_argument("fit_lm: fewer data points than parameters");
    if ((bounds.lower.size() == n && (init.array() < bounds.lower.array()).any()) ||
        (bounds.upper.size() == n && (init.array() > bounds.upper.array()).any()))
        throw std::invalid_argument("fit_lm: initial parameters outside bounds");

    Eigen::VectorXd typical = options.typical.size() == n ? options.typical
                                                          : Eigen::VectorXd::Ones(n);
    Eigen::VectorXd sw;
    if (!options.weights.empty()) {
        if (options.weights.size() != m) throw std::invalid_argument("fit_lm: weights length differs from data");
        sw.resize(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
            if (!(options.weights[i] >= 0.0)) throw std::invalid_argument("fit_lm: negative weight");
            sw[static_cast<Eigen::Index>(i)] = std::sqrt(options.weights[i]);
        }
    }
    FitResult res;
    res.params = init;
    Eigen::VectorXd r(static_cast<Eigen::Index>(m));
    Eigen::VectorXd r_trial(static_cast<Eigen::Index>(m));
    double rss = residual_sum(model, x, y, sw, res.params, r);
    double y_scale = 0.0;
    for (std::size_t i = 0; i < m; ++i) y_scale += y[i] * y[i] * (sw.size() ? options.weights[i] : 1.0);
    const double rss_floor = 1e-28 * std::max(y_scale, std::numeric_limits<double>::min());

    Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), n);
    auto jacobian = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd f0(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) f0[static_cast<Eigen::Index>(i)] = model(x[i], p);
        for (Eigen::Index j = 0; j < n; ++j) {
            Eigen::VectorXd q = p;
            double h = 1e-7 * std::max(std::abs(p[j]), std::abs(typical[j]));
            if (h == 0.0) h = 1e-7;
            if (bounds.upper.size() == n && q[j] + h > bounds.upper[j]) h = -h;
            q[j] += h;
            h = q[j] - p[j];
            for (std::size_t i = 0; i < m; ++i)
                jac(static_cast<Eigen::Index>(i), j) = (model(x[i], q) - f0[static_cast<Eigen::Index>(i)]) / h *
                                                       (sw.size() ? sw[static_cast<Eigen::Index>(i)] : 1.0);
        }
    };

    double lambda = options.initial_lambda;
    if (rss <= rss_floor) {
        res.converged = true;
        res.message = "initial parameters already fit the data";
    }
    while (!res.converged && res.iterations < options.max_iterations) {
        ++res.iterations;
        jacobian(res.params);
        const Eigen::MatrixXd a = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        const double diag_floor = 1e-30 * std::max(a.diagonal().maxCoeff(), 1e-300);

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = a;
            for (Eigen::Index j = 0; j < n; ++j)
                damped(j, j) += lambda * std::max(a(j, j), diag_floor);
            Eigen::VectorXd step = damped.ldlt().solve(g);
            // parameters sitting on a bound and pushed outward are held for
            // this step; otherwise clamping stalls the whole update
            Eigen::VectorXd gf = g;
            bool held = false;
            for (Eigen::Index j = 0; j < n; ++j) {
                const bool at_lo = bounds.lower.size() == n && res.params[j] <= bounds.lower[j] && step[j] < 0.0;
                const bool at_hi = bounds.upper.size() == n && res.params[j] >= bounds.upper[j] && step[j] > 0.0;
                if (!(at_lo || at_hi)) continue;
                damped.row(j).setZero();
                damped.col(j).setZero();
                damped(j, j) = 1.0;
                gf[j] = 0.0;
                held = true;
            }
            if (held) step = damped.ldlt().solve(gf);
            if (!step.allFinite()) {
                lambda *= 10.0;
                if (lambda > 1e20) break;
                continue;
            }
            Eigen::VectorXd trial = res.params + step;
            clamp_to(trial, bounds);
            const double rss_trial = residual_sum(model, x, y, sw, trial, r_trial);
            if (rss_trial < rss) {
                const double rel = (rss - rss_trial) / rss;
                res.params = trial;
                r = r_trial;
                rss = rss_trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (rel < options.rel_cost_tol || rss <= rss_floor) {
                    res.converged = true;
                    res.message = "relative cost change below tolerance";
                }
            } else {
                lambda *= 10.0;
                if (lambda > 1e20) break;
            }
        }
        if (!accepted) {
            // No step along any damping reduces the cost: a local minimum to
            // working precision.
            res.converged = true;
            res.message = "cost cannot be reduced further";
        }
    }
    if (!res.converged) res.message = fmt::format("no convergence after {} iterations", res.iterations);

    res.rss = rss;
    jacobian(res.params);
    fill_uncertainties(res, jac, m);
    return res;
}

// --- damped cosine --------------------------------------------------------

double DampedCosine::operator()(double t) const {
    const double dt = t - t0;
    const double envelope = std::isinf(tau) ? 1.0 : std::exp(-dt / tau);
    return amplitude * (1.0 - envelope * std::cos(kTwoPi * omega.value * dt + phi));
}

DampedCosineFit fit_damped_cosine(std::span<const double> t, std::span<const double> p,
                                  std::optional<DampedCosine> init,
                                  const DampedCosineOptions& options) {
    if (t.size() != p.size()) throw std::invalid_argument("fit_damped_cosine: length mismatch");
    if (t.size() < 6) throw std::invalid_argument("fit_damped_cosine: need at least 6 points");
    const auto [tmin_it, tmax_it] = std::minmax_element(t.begin(), t.end());
    const double span = *tmax_it - *tmin_it;
    if (!(span > 0.0)) throw std::invalid_argument("fit_damped_cosine: degenerate time span");

    DampedCosineFit out;
    const std::size_t n = t.size();
    const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : p) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 1e-24 * std::max(mean * mean, 1e-300)) {
        out.degenerate = true;
        out.params.amplitude = mean;
        out.params.tau = span;
        out.tau_is_lower_bound = true;
        out.raw.converged = false;
        out.raw.singular = true;
        out.raw.message = "flat data: oscillation frequency unidentifiable";
        return out;
    }

    // Internally time is measured in units of the scan span.
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = t[i] / span;
    const bool fit_t0 = !options.fixed_t0.has_value();
    const double t0_fixed = options.fixed_t0.value_or(0.0) / span;

    DampedCosine guess;
    if (init) {
        guess = *init;
    } else {
        // periodogram for the frequency, projection for the phase
        double best_w = 0.0;
        double best_power = -1.0;
        std::complex<double> best_c;
        const double w_max = kPi * static_cast<double>(n - 1);
        for (double w = kPi; w <= w_max; w += 0.05 * kPi) {
            std::complex<double> c{0.0, 0.0};
            for (std::size_t i = 0; i < n; ++i) c += (p[i] - mean) * std::polar(1.0, -w * u[i]);
            if (std::norm(c) > best_power) {
                best_power = std::norm(c);
                best_w = w;
                best_c = c;
            }
        }
        guess.amplitude = mean;
        guess.t0 = t0_fixed * span;
        guess.tau = 2.0 * span;
        guess.omega = FrequencyHz{best_w / (kTwoPi * span)};
        guess.phi = std::arg(-best_c) + best_w * t0_fixed;
    }

    const double gamma0 = std::isinf(guess.tau) ? 0.0 : span / guess.tau;
    Eigen::VectorXd p0;
    Bounds bounds;
    if (fit_t0) {
        p0.resize(5);
        p0 << guess.amplitude, guess.t0 / span, gamma0, kTwoPi * guess.omega.value * span, guess.phi;
        bounds.lower = Eigen::VectorXd::Constant(5, -kInf);
        bounds.upper = Eigen::VectorXd::Constant(5, kInf);
        bounds.lower[2] = 0.0;
        bounds.lower[3] = 0.0;
    } else {
        p0.resize(4);
        p0 << guess.amplitude, gamma0, kTwoPi * guess.omega.value * span, guess.phi;
        bounds.lower = Eigen::VectorXd::Constant(4, -kInf);
        bounds.upper = Eigen::VectorXd::Constant(4, kInf);
        bounds.lower[1] = 0.0;
        bounds.lower[2] = 0.0;
    }
    p0 = p0.cwiseMax(bounds.lower);

    auto unpack = [&](const Eigen::VectorXd& q, double& a, double& t0, double& g, double& w, double& ph) {
        if (fit_t0) {
            a = q[0], t0 = q[1], g = q[2], w = q[3], ph = q[4];
        } else {
            a = q[0], t0 = t0_fixed, g = q[1], w = q[2], ph = q[3];
        }
    };
    Model model = [&](double x, const Eigen::VectorXd& q) {
        double a, t0, g, w, ph;
        unpack(q, a, t0, g, w, ph);
        const double dx = x - t0;
        return a * (1.0 - std::exp(-dx * g) * std::cos(w * dx + ph));
    };
    LmOptions lm;
    lm.typical = Eigen::VectorXd::Ones(p0.size());
    out.raw = fit_lm(model, u, p, p0, bounds, lm);

    double a, t0, g, w, ph;
    unpack(out.raw.params, a, t0, g, w, ph);
    const Eigen::VectorXd& s = out.raw.sigmas;
    out.params.amplitude = a;
    out.params.t0 = t0 * span;
    out.params.omega = FrequencyHz{w / (kTwoPi * span)};
    out.params.phi = ph;
    out.sigmas.amplitude = s[0];
    out.sigmas.t0 = fit_t0 ? s[1] * span : 0.0;
    const Eigen::Index gi = fit_t0 ? 2 : 1;
    out.sigmas.omega = FrequencyHz{s[gi + 1] / (kTwoPi * span)};
    out.sigmas.phi = s[gi + 2];
    const double tau = g > 0.0 ? span / g : kInf;
    if (tau > span) {
        out.params.tau = span;
        out.sigmas.tau = 0.0;
        out.tau_is_lower_bound = true;
    } else {
        out.params.tau = tau;
        out.sigmas.tau = span * s[gi] / (g * g);
    }
    if (out.params.omega.value * span < 1.0) {
        out.degenerate = true;
        out.raw.message = "fitted oscillation spans less than one period";
    }
    return out;
}

// --- Lorentzian sums ------------------------------------------------------

cavity::ModeFamily LorentzianSumFit::as_family() const {
    cavity::ModeFamily f;
    f.background = background;
    for (const auto& pk : peaks) f.peaks.push_back(cavity::Peak{pk.center, pk.width, pk.amplitude});
    return f;
}

LorentzianSumFit fit_lorentzian_sum(std::span<const double> x_hz, std::span<const double> y,
                                    int n_peaks, const cavity::ModeFamily& init,
                                    std::span<const double> weights) {
    if (n_peaks < 1) throw std::invalid_argument("fit_lorentzian_sum: need at least one peak");
    if (static_cast<std::size_t>(n_peaks) > init.peaks.size())
        throw std::invalid_argument("fit_lorentzian_sum: init has fewer peaks than requested");
    for (int k = 1; k < n_peaks; ++k)
        if (!(init.peaks[k].offset > init.peaks[k - 1].offset))
            throw std::invalid_argument("fit_lorentzian_sum: init must be centre-ordered");
    if (x_hz.size() != y.size()) throw std::invalid_argument("fit_lorentzian_sum: length mismatch");

    const double x0 = init.peaks[0].offset.value;
    const double xs = init.peaks[0].linewidth.value;
    double ys = 0.0;
    for (double v : y) ys = std::max(ys, std::abs(v));
    if (ys == 0.0) ys = 1.0;

    std::vector<double> u(x_hz.size()), v(y.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = (x_hz[i] - x0) / xs;
        v[i] = y[i] / ys;
    }

    const int np = 1 + 1 + (n_peaks - 1) + 2 * n_peaks;
    const int width0 = 2 + (n_peaks - 1);
    const int amp0 = width0 + n_peaks;
    Eigen::VectorXd p0(np);
    Bounds bounds;
    bounds.lower = Eigen::VectorXd::Constant(np, -kInf);
    bounds.upper = Eigen::VectorXd::Constant(np, kInf);
    p0[0] = init.background / ys;
    bounds.lower[0] = 0.0;
    p0[1] = 0.0;
    for (int k = 1; k < n_peaks; ++k) {
        p0[1 + k] = (init.peaks[k].offset.value - init.peaks[k - 1].offset.value) / xs;
        bounds.lower[1 + k] = 1e-6;
    }
    for (int k = 0; k < n_peaks; ++k) {
        p0[width0 + k] = init.peaks[k].linewidth.value / xs;
        bounds.lower[width0 + k] = 1e-6;
        p0[amp0 + k] = init.peaks[k].amplitude / ys;
        bounds.lower[amp0 + k] = 0.0;
    }
    // init fixes the relative shape only; the overall height comes from the data
    double init_max = 0.0, data_max = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double t = init.background;
        for (int k = 0; k < n_peaks; ++k) {
            const double d = (x_hz[i] - init.peaks[k].offset.value) / init.peaks[k].linewidth.value;
            t += init.peaks[k].amplitude / (1.0 + 4.0 * d * d);
        }
        init_max = std::max(init_max, t);
        data_max = std::max(data_max, v[i]);
    }
    if (init_max > 0.0 && data_max > 0.0) {
        const double scale = data_max / (init_max / ys);
        p0[0] *= scale;
        for (int k = 0; k < n_peaks; ++k) p0[amp0 + k] *= scale;
    }
    p0 = p0.cwiseMax(bounds.lower);

    Model model = [=](double x, const Eigen::VectorXd& q) {
        double val = q[0];
        double c = q[1];
        for (int k = 0; k < n_peaks; ++k) {
            if (k > 0) c += q[1 + k];
            const double d = (x - c) / q[width0 + k];
            val += q[amp0 + k] / (1.0 + 4.0 * d * d);
        }
        return val;
    };

    LorentzianSumFit out;
    LmOptions opts;
    std::vector<double> wv;
    if (!weights.empty()) {
        if (weights.size() != y.size()) throw std::invalid_argument("fit_lorentzian_sum: weights length mismatch");
        wv.resize(weights.size());
        for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = weights[i] * ys * ys;
        opts.weights = wv;
    }
    out.raw = fit_lm(model, u, v, p0, bounds, opts);
    const Eigen::VectorXd& q = out.raw.params;
    const Eigen::MatrixXd& cov = out.raw.covariance;
    out.background = q[0] * ys;
    out.background_sigma = out.raw.sigmas[0] * ys;
    double c = q[1];
    for (int k = 0; k < n_peaks; ++k) {
        if (k > 0) c += q[1 + k];
        // centre_k = c0 + sum of the first k gaps
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(np);
        for (int j = 0; j <= k; ++j) grad[1 + j] = 1.0;
        const double var_c = out.raw.singular ? kInf : grad.dot(cov * grad);
        LorentzianPeakFit pk;
        pk.center = FrequencyHz{x0 + xs * c};
        pk.center_sigma = FrequencyHz{xs * std::sqrt(std::max(var_c, 0.0))};
        pk.width = FrequencyHz{xs * q[width0 + k]};
        pk.width_sigma = FrequencyHz{xs * out.raw.sigmas[width0 + k]};
        pk.amplitude = ys * q[amp0 + k];
        pk.amplitude_sigma = ys * out.raw.sigmas[amp0 + k];
        out.peaks.push_back(pk);
    }
    if (out.raw.singular)
        out.raw.message = "singular covariance: peak count likely exceeds what the data resolve";
    return out;
}

// --- exponential decay ----------------------------------------------------

ExponentialFit fit_exponential(std::span<const double> t, std::span<const double> y) {
    if (t.size() != y.size()) throw std::invalid_argument("fit_exponential: length mismatch");
    if (t.size() < 3) throw std::invalid_argument("fit_exponential: need at least 3 points");
    for (double v : y)
        if (!(v > 0.0)) throw std::invalid_argument("fit_exponential: data must be positive");

    double ts = 0.0;
    for (double v : t) ts = std::max(ts, std::abs(v));
    if (ts == 0.0) throw std::invalid_argument("fit_exponential: degenerate time axis");
    const double ys = *std::max_element(y.begin(), y.end());
    const std::size_t n = t.size();
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = t[i] / ts;
        v[i] = y[i] / ys;
    }

    // log-linear regression for the starting point
    double su = 0, sl = 0, suu = 0, sul = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = std::log(v[i]);
        su += u[i];
        sl += l;
        suu += u[i] * u[i];
        sul += u[i] * l;
    }
    const double denom = static_cast<double>(n) * suu - su * su;
    const double slope = denom != 0.0 ? (static_cast<double>(n) * sul - su * sl) / denom : 0.0;
    const double icept = (sl - slope * su) / static_cast<double>(n);
    Eigen::VectorXd p0(2);
    p0 << std::exp(icept), std::max(-slope, 0.0);

    Bounds bounds;
    bounds.lower = Eigen::Vector2d(-kInf, 0.0);
    bounds.upper = Eigen::Vector2d(kInf, kInf);
    Model model = [](double x, const Eigen::VectorXd& q) { return q[0] * std::exp(-q[1] * x); };

    ExponentialFit out;
    out.raw = fit_lm(model, u, v, p0, bounds);
    const double a = out.raw.params[0];
    const double k = out.raw.params[1];
    out.amplitude = a * ys;
    out.amplitude_sigma = out.raw.sigmas[0] * ys;
    if (k <= 1e-9) {
        out.unbounded = true;
        out.lifetime = kInf;
        out.lifetime_sigma = kInf;
        out.raw.message = "no decay resolved: lifetime unbounded";
    } else {
        out.lifetime = ts / k;
        out.lifetime_sigma = ts * out.raw.sigmas[1] / (k * k);
    }
    return out;
}

}  // namespace rydcav::analysis
