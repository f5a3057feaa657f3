#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace abscope {

class MapStack;

/// Position in the sample plane, nm.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Emitter {
    Point position;
    /// Detection probability per excitation pulse with the beam centred on the emitter.
    double peak_probability = 0.0;
};

/// Isotropic 2D Gaussian point-spread function.
class PSFModel {
public:
    explicit PSFModel(double fwhm_nm);

    double fwhm() const { return fwhm_; }
    double sigma() const { return sigma_; }

private:
    double fwhm_;
    double sigma_;
};

/// Ground truth being imaged. Background is Poissonian, uniform over the sample.
struct Scene {
    std::vector<Emitter> emitters;
    PSFModel psf{500.0};
    double background_mean = 0.0;

    /// Throws std::invalid_argument on a peak probability outside [0,1] or
    /// a negative background.
    void validate() const;
};

/// Raster of scan positions; pixel (row, col) sits at origin + (col, row) * pitch.
struct ScanGrid {
    Point origin;
    double pitch = 1.0;
    int width = 1;
    int height = 1;

    void validate() const;
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    Point point(int row, int col) const {
        return {origin.x + col * pitch, origin.y + row * pitch};
    }
    Point point(std::size_t pixel_index) const {
        return point(static_cast<int>(pixel_index / static_cast<std::size_t>(width)),
                     static_cast<int>(pixel_index % static_cast<std::size_t>(width)));
    }
    friend bool operator==(const ScanGrid&, const ScanGrid&) = default;
};

inline bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }

double detection_probability(const Emitter& emitter, const PSFModel& psf, Point point);

struct PixelProbabilities {
    std::vector<double> emitter_probs;
    double background_mean = 0.0;
};

/// Per-emitter detection probabilities at `point`, in scene order.
PixelProbabilities pixel_probabilities(const Scene& scene, Point point);

/// Noise-free maps: `intensity`, `g2..gK`, `sr2..srK`. Dark pixels leave the g
/// and sr layers undefined.
MapStack scan_exact(const Scene& scene, const ScanGrid& grid, int max_order, int threads = 1);

/// Canonical text form of a scene; stable across runs and platforms.
std::string canonical_scene_text(const Scene& scene);

/// FNV-1a 64-bit hash of canonical_scene_text, as 16 hex digits.
std::string scene_hash(const Scene& scene);

}  // namespace abscope
