#pragma once

// Atom detection statistics: bimodal count histograms, the three-image
// loading/fidelity/survival estimator, and synthetic data generators.
//
// Three-image rule: an imaging error is a middle image that disagrees with
// both neighbours, o2 != o1 && o2 != o3. Under independent readout flips with
// probability f this happens with probability f (1 - f) when the atom is
// present (or absent) in all three images. Losses between images add a
// correction of order (1 - survival) f, which is ignored. The flip rate
// recovered this way is used to correct the survival estimate.

#include <cstdint>
#include <span>
#include <vector>

namespace rydcav::analysis {

struct Proportion {
    double value = 0.0;
    double sigma = 0.0;  // Wilson half-width / z
    double lo = 0.0;     // Wilson interval at z
    double hi = 0.0;
    std::uint64_t successes = 0;
    std::uint64_t trials = 0;
};

Proportion wilson(std::uint64_t successes, std::uint64_t trials, double z = 1.96);

struct ThreeImageRecord {
    bool o1 = false;
    bool o2 = false;
    bool o3 = false;
};

struct DetectionStats {
    Proportion loading;           // mean(o1)
    Proportion imaging_fidelity;  // 1 - error events / records
    Proportion survival;          // P(o2 | o1) corrected for readout flips
    double survival_raw = 0.0;    // uncorrected P(o2 | o1)
    double flip_rate = 0.0;       // per-image readout flip probability
};

/// Throws std::invalid_argument on an empty record list.
DetectionStats three_image_stats(std::span<const ThreeImageRecord> records);

struct MixtureComponent {
    double weight = 0.0;
    double mean = 0.0;
    double sigma = 0.0;
};

struct ThresholdResult {
    double threshold = 0.0;  // counts > threshold are classified as an atom
    double fidelity = 0.0;
    bool unimodal = false;
    MixtureComponent background;
    MixtureComponent atom;
};

/// Two-Gaussian mixture (EM from an Otsu split), then the integer threshold
/// minimising the modelled misclassification. Unimodal data are flagged and
/// thresholded at the largest count.
ThresholdResult histogram_threshold(std::span<const std::int64_t> counts);

struct DetectionParams {
    double loading = 0.52;
    double survival = 0.9988;
    double flip_prob = 1.2e-4;
    double background_mean = 20.0;
    double background_sigma = -1.0;  // negative selects sqrt(mean)
    double atom_mean = 200.0;
    double atom_sigma = -1.0;

    void validate() const;
};

struct SynthDetection {
    std::vector<ThreeImageRecord> records;
    std::vector<std::int64_t> counts;  // first-image camera counts per record
};

/// Occupancy chains (load, then survive each step), independent readout
/// flips per image, and Gaussian-approximated counts from the observed
/// occupancy of the first image.
SynthDetection synth_detection_data(const DetectionParams& params, std::size_t n_records,
                                    std::uint64_t seed);

/// Fraction of `atoms` still trapped at each time for exponential loss.
std::vector<double> synth_survival_curve(double lifetime_s, int atoms, std::span<const double> times,
                                         std::uint64_t seed);

}  // namespace rydcav::analysis
