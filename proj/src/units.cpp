#include "rydcav/units.hpp"

namespace rydcav {

double to_angular(FrequencyHz f) { return kTwoPi * f.value; }

FrequencyHz from_angular(double omega_rad_per_s) { return FrequencyHz{omega_rad_per_s / kTwoPi}; }

}  // namespace rydcav
