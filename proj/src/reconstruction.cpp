#include "abscope/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "abscope/errors.hpp"
#include "abscope/photon_algebra.hpp"

namespace abscope {
namespace {

std::string g_name(int j) { return "g" + std::to_string(j); }

int highest_g_order(int k, ReconstructionMode mode) { return mode == ReconstructionMode::Standard ? k : 2; }

void check_order(int k) {
    if (k < 2 || k > kMaxOrder) {
        throw std::invalid_argument("reconstruction order must be in [2, " + std::to_string(kMaxOrder) + "]");
    }
}

// g vector at pixel i, or nullopt if any required layer is undefined there.
std::optional<GVector> pixel_g(const std::vector<const Layer*>& g_layers, std::size_t i, int k,
                               ReconstructionMode mode) {
    std::vector<double> g(static_cast<std::size_t>(k), 0.0);
    g[0] = 1.0;
    for (std::size_t j = 0; j < g_layers.size(); ++j) {
        if (!g_layers[j]->is_defined(i)) return std::nullopt;
        g[j + 1] = g_layers[j]->values[i];
    }
    if (mode == ReconstructionMode::TwoEmitter) {
        std::fill(g.begin() + 2, g.end(), 0.0);
    }
    return GVector(std::move(g));
}

std::vector<const Layer*> g_layers_for(const MapStack& maps, int k, ReconstructionMode mode,
                                       const std::string& prefix = "") {
    std::vector<const Layer*> layers;
    for (int j = 2; j <= highest_g_order(k, mode); ++j) layers.push_back(&maps.at(prefix + g_name(j)));
    return layers;
}

}  // namespace

ReconstructionMode parse_mode(const std::string& text) {
    if (text == "standard") return ReconstructionMode::Standard;
    if (text == "two-emitter" || text == "two_emitter") return ReconstructionMode::TwoEmitter;
    throw InputError("unknown reconstruction mode '" + text + "' (standard|two-emitter)");
}

std::string to_string(ReconstructionMode mode) {
    return mode == ReconstructionMode::Standard ? "standard" : "two-emitter";
}

std::vector<std::string> required_layers(int k, ReconstructionMode mode) {
    std::vector<std::string> names{"intensity"};
    for (int j = 2; j <= highest_g_order(k, mode); ++j) names.push_back(g_name(j));
    return names;
}

Layer reconstruct(const MapStack& maps, int k, ReconstructionMode mode) {
    check_order(k);
    const Layer& intensity = maps.at("intensity");
    const auto g_layers = g_layers_for(maps, k, mode);
    const auto expansion = power_sum_expansion(k);

    const std::size_t n = maps.grid().pixel_count();
    Layer out{"sr" + std::to_string(k), std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        if (!intensity.is_defined(i)) continue;
        const auto g = pixel_g(g_layers, i, k, mode);
        if (!g) continue;
        out.set(i, evaluate_power_sum(expansion, intensity.values[i], *g));
    }
    return out;
}

Layer clamp_positive(const Layer& layer) {
    Layer out = layer;
    out.name = layer.name + "_pos";
    for (auto& v : out.values) v = std::max(0.0, v);
    return out;
}

Layer error_propagate(const MapStack& maps, int k, ReconstructionMode mode) {
    check_order(k);
    const Layer& intensity = maps.at("intensity");
    const Layer& se_intensity = maps.at("se_intensity");
    const auto g_layers = g_layers_for(maps, k, mode);
    const auto se_layers = g_layers_for(maps, k, mode, "se_");
    const auto expansion = power_sum_expansion(k);

    const std::size_t n = maps.grid().pixel_count();
    Layer out{"se_sr" + std::to_string(k), std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        if (!intensity.is_defined(i) || !se_intensity.is_defined(i)) continue;
        const auto g = pixel_g(g_layers, i, k, mode);
        if (!g) continue;
        bool se_ok = true;
        for (const Layer* se : se_layers) se_ok = se_ok && se->is_defined(i);
        if (!se_ok) continue;

        const auto grad = power_sum_gradient(expansion, intensity.values[i], *g);
        double variance = grad.d_mean_n * grad.d_mean_n * se_intensity.values[i] * se_intensity.values[i];
        // Only the measured orders carry uncertainty; in two-emitter mode g^(>=3)
        // are asserted zeros.
        for (std::size_t j = 0; j < se_layers.size(); ++j) {
            const double d = grad.d_g[j + 2];
            const double s = se_layers[j]->values[i];
            variance += d * d * s * s;
        }
        out.set(i, std::sqrt(variance));
    }
    return out;
}

void add_reconstruction(MapStack& maps, int k, ReconstructionMode mode) {
    Layer sr = reconstruct(maps, k, mode);
    Layer pos = clamp_positive(sr);
    maps.add_layer(sr.name) = std::move(sr);
    maps.add_layer(pos.name) = std::move(pos);
    bool have_errors = maps.has("se_intensity");
    for (int j = 2; j <= highest_g_order(k, mode); ++j) have_errors = have_errors && maps.has("se_" + g_name(j));
    if (have_errors) {
        Layer se = error_propagate(maps, k, mode);
        maps.add_layer(se.name) = std::move(se);
    }
}

TwoEmitterCertificate certify_two_emitter(const MapStack& maps, double intensity_fraction) {
    const Layer& intensity = maps.at("intensity");
    const Layer& g3 = maps.at("g3");
    const Layer& se_g3 = maps.at("se_g3");
    double peak = 0.0;
    for (std::size_t i = 0; i < intensity.values.size(); ++i) {
        if (intensity.is_defined(i)) peak = std::max(peak, intensity.values[i]);
    }
    TwoEmitterCertificate cert;
    for (std::size_t i = 0; i < intensity.values.size(); ++i) {
        if (!intensity.is_defined(i) || intensity.values[i] < intensity_fraction * peak) continue;
        if (!g3.is_defined(i) || !se_g3.is_defined(i)) continue;
        ++cert.pixels_checked;
        if (!(std::abs(g3.values[i]) <= 3.0 * se_g3.values[i])) ++cert.pixels_incompatible;
    }
    cert.passed = cert.pixels_checked > 0 && cert.pixels_incompatible == 0;
    return cert;
}

}  // namespace abscope
