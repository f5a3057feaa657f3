#pragma once

#include <cstddef>
#include <string>

#include "abscope/map_stack.hpp"

namespace abscope {

enum class ReconstructionMode {
    /// Full expansion; needs g^(2)..g^(k).
    Standard,
    /// Exactly two emitters asserted: g^(j) = 0 for j >= 3, needs only g^(2).
    TwoEmitter,
};

/// "standard" or "two-emitter". Throws InputError.
ReconstructionMode parse_mode(const std::string& text);
std::string to_string(ReconstructionMode mode);

/// Names of the input layers a reconstruction of order k needs (intensity and g layers).
std::vector<std::string> required_layers(int k, ReconstructionMode mode);

/// Super-resolved layer `sr<k>`. Values are not clamped; a pixel is defined only
/// where intensity and every required g layer are defined. Throws
/// MissingLayerError for an absent input layer.
Layer reconstruct(const MapStack& maps, int k, ReconstructionMode mode);

/// `<name>_pos` companion with negative values clamped to zero, for rendering.
Layer clamp_positive(const Layer& layer);

/// First-order propagation of `se_intensity` and `se_g<j>` through the order-k
/// polynomial, treating the per-pixel inputs as independent. Returns `se_sr<k>`.
Layer error_propagate(const MapStack& maps, int k, ReconstructionMode mode);

/// Adds sr<k>, sr<k>_pos and, when standard-error layers are present, se_sr<k>.
void add_reconstruction(MapStack& maps, int k, ReconstructionMode mode);

/// Outcome of checking that g^(3) vanishes within the region of interest.
struct TwoEmitterCertificate {
    bool passed = false;
    std::size_t pixels_checked = 0;
    std::size_t pixels_incompatible = 0;
};

/// Checks |g^(3)| <= 3 se over pixels whose intensity is at least
/// `intensity_fraction` of the maximum. Needs g3 and se_g3 layers.
TwoEmitterCertificate certify_two_emitter(const MapStack& maps, double intensity_fraction = 0.5);

}  // namespace abscope
