#include "abscope/scene.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "abscope/map_stack.hpp"
#include "abscope/parallel.hpp"
#include "abscope/photon_algebra.hpp"

namespace abscope {
namespace {

std::string format_number(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

}  // namespace

PSFModel::PSFModel(double fwhm_nm) : fwhm_(fwhm_nm) {
    if (!(fwhm_nm > 0.0) || !std::isfinite(fwhm_nm)) {
        throw std::invalid_argument("PSF fwhm must be positive, got " + std::to_string(fwhm_nm));
    }
    sigma_ = fwhm_nm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

void Scene::validate() const {
    if (!(background_mean >= 0.0) || !std::isfinite(background_mean)) {
        throw std::invalid_argument("background mean must be finite and >= 0");
    }
    for (std::size_t i = 0; i < emitters.size(); ++i) {
        const double p = emitters[i].peak_probability;
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("emitter " + std::to_string(i) +
                                        ": peak_probability outside [0,1]");
        }
        if (!std::isfinite(emitters[i].position.x) || !std::isfinite(emitters[i].position.y)) {
            throw std::invalid_argument("emitter " + std::to_string(i) + ": non-finite position");
        }
    }
}

void ScanGrid::validate() const {
    if (!(pitch > 0.0) || !std::isfinite(pitch)) {
        throw std::invalid_argument("grid pitch must be positive");
    }
    if (width < 1 || height < 1) {
        throw std::invalid_argument("grid width and height must be >= 1");
    }
    if (!std::isfinite(origin.x) || !std::isfinite(origin.y)) {
        throw std::invalid_argument("grid origin must be finite");
    }
}

double detection_probability(const Emitter& emitter, const PSFModel& psf, Point point) {
    const double dx = point.x - emitter.position.x;
    const double dy = point.y - emitter.position.y;
    const double s = psf.sigma();
    return emitter.peak_probability * std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
}

PixelProbabilities pixel_probabilities(const Scene& scene, Point point) {
    PixelProbabilities out;
    out.background_mean = scene.background_mean;
    out.emitter_probs.reserve(scene.emitters.size());
    for (const auto& emitter : scene.emitters) {
        out.emitter_probs.push_back(detection_probability(emitter, scene.psf, point));
    }
    return out;
}

MapStack scan_exact(const Scene& scene, const ScanGrid& grid, int max_order, int threads) {
    if (max_order < 2 || max_order > kMaxOrder) {
        throw std::invalid_argument("scan_exact: order must be in [2, " + std::to_string(kMaxOrder) + "]");
    }
    scene.validate();
    grid.validate();

    std::vector<PowerSumExpansion> expansions;
    for (int k = 2; k <= max_order; ++k) expansions.push_back(power_sum_expansion(k));

    MapStack stack(grid);
    stack.add_layer("intensity");
    for (int k = 2; k <= max_order; ++k) stack.add_layer("g" + std::to_string(k));
    for (int k = 2; k <= max_order; ++k) stack.add_layer("sr" + std::to_string(k));

    Layer& intensity = *stack.find("intensity");
    std::vector<Layer*> g_layers;
    std::vector<Layer*> sr_layers;
    for (int k = 2; k <= max_order; ++k) {
        g_layers.push_back(stack.find("g" + std::to_string(k)));
        sr_layers.push_back(stack.find("sr" + std::to_string(k)));
    }

    // Each pixel writes only its own slots, so rows can run concurrently.
    const auto width = static_cast<std::size_t>(grid.width);
    parallel_for(static_cast<std::size_t>(grid.height), threads, [&](std::size_t row) {
        for (std::size_t col = 0; col < width; ++col) {
            const std::size_t i = row * width + col;
            const auto probs = pixel_probabilities(scene, grid.point(i));
            const auto moments =
                factorial_moments_with_background(probs.emitter_probs, probs.background_mean, max_order);
            intensity.set(i, moments(1));
            const auto g = g_from_moments(moments);
            if (!g) continue;
            for (int k = 2; k <= max_order; ++k) {
                const auto slot = static_cast<std::size_t>(k - 2);
                g_layers[slot]->set(i, (*g)(k));
                sr_layers[slot]->set(i, evaluate_power_sum(expansions[slot], moments(1), *g));
            }
        }
    });
    return stack;
}

std::string canonical_scene_text(const Scene& scene) {
    std::string out = "[psf]\nfwhm_nm = " + format_number(scene.psf.fwhm()) + "\n";
    out += "[background]\nmean_per_pulse = " + format_number(scene.background_mean) + "\n";
    for (const auto& e : scene.emitters) {
        out += "[[emitter]]\nx_nm = " + format_number(e.position.x) + "\ny_nm = " +
               format_number(e.position.y) + "\npeak_probability = " +
               format_number(e.peak_probability) + "\n";
    }
    return out;
}

std::string scene_hash(const Scene& scene) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_scene_text(scene)) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

}  // namespace abscope
