#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "abscope/rng.hpp"
#include "abscope/scene.hpp"

namespace abscope {

enum class DetectorKind { PNR, Tree };

/// Photon-number-resolving detector, or a tree of click detectors fed by a
/// lossless splitter network with the given routing probabilities.
class DetectorModel {
public:
    static DetectorModel pnr();
    /// Equal 1/d splitting.
    static DetectorModel tree(int detectors);
    static DetectorModel tree(std::vector<double> splitting);
    /// "pnr", "tree:<d>" or "tree:<p1>,<p2>,...". Throws InputError.
    static DetectorModel parse(const std::string& text);

    DetectorKind kind() const { return kind_; }
    /// Number of click detectors; 0 for PNR.
    int detectors() const { return static_cast<int>(splitting_.size()); }
    const std::vector<double>& splitting() const { return splitting_; }
    /// Highest correlation order this detector can sample (kMaxOrder for PNR).
    int max_sampled_order() const;
    std::string to_string() const;

    friend bool operator==(const DetectorModel&, const DetectorModel&) = default;

private:
    DetectorModel() = default;
    DetectorKind kind_ = DetectorKind::PNR;
    std::vector<double> splitting_;
};

/// outcome key (photon count for PNR, click mask for a tree) -> number of pulses.
using Tally = std::map<std::uint64_t, std::uint64_t>;

std::uint64_t tally_pulses(const Tally& tally);
void merge_tally(Tally& into, const Tally& from);

/// Tallies of one pixel, split into consecutive blocks of pulses.
struct PixelTally {
    std::vector<Tally> blocks;

    Tally total() const;
    std::uint64_t pulses() const;
};

struct RawScan {
    Scene scene;
    ScanGrid grid;
    DetectorModel detector = DetectorModel::pnr();
    std::uint64_t pulses_per_pixel = 0;
    int blocks = 1;
    std::uint64_t base_seed = 0;
    std::string rng_id{kRngId};
    /// Row-major, one entry per grid pixel.
    std::vector<PixelTally> pixels;
};

/// Routes `photons` photons independently through the splitter network and
/// returns the bitmask of detectors that received at least one.
std::uint64_t route_photons(unsigned photons, const std::vector<double>& cumulative_splitting,
                            Xoshiro256& rng);

/// Poisson(mean) by inversion, split into chunks for large means. A zero
/// mean draws nothing from the generator.
class PoissonSampler {
public:
    explicit PoissonSampler(double mean);
    unsigned operator()(Xoshiro256& rng) const;

private:
    int chunks_ = 0;
    double chunk_mean_ = 0.0;
    double p0_ = 1.0;
};

unsigned sample_poisson(double mean, Xoshiro256& rng);

/// Simulates `pulses` excitation pulses at `point`. Pulses are assigned to
/// `blocks` consecutive blocks whose sizes differ by at most one.
PixelTally simulate_pixel(const Scene& scene, Point point, std::uint64_t pulses,
                          const DetectorModel& detector, std::uint64_t seed, int blocks = 1);

/// Applies simulate_pixel to every grid point with seeds from derive_pixel_seed.
RawScan simulate_scan(const Scene& scene, const ScanGrid& grid, std::uint64_t pulses,
                      const DetectorModel& detector, std::uint64_t base_seed, int blocks = 1,
                      int threads = 1);

/// Writes `rawscan.json`, `tallies.csv` (`pixel_index,outcome_key,count`) and,
/// when blocks > 1, `blocks.csv` (`pixel_index,block,outcome_key,count`).
void save_raw_scan(const std::filesystem::path& dir, const RawScan& raw);
RawScan load_raw_scan(const std::filesystem::path& dir);

}  // namespace abscope
