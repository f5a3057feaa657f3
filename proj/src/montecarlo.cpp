#include "abscope/montecarlo.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "abscope/errors.hpp"
#include "abscope/parallel.hpp"
#include "abscope/photon_algebra.hpp"

namespace abscope {
namespace {

constexpr int kMaxTreeDetectors = 16;
// Poisson inversion is run on chunks with at most this mean so exp(-mean)
// never underflows.
constexpr double kPoissonChunk = 30.0;

struct BernoulliSource {
    std::uint64_t threshold = 0;
    bool certain = false;
};

BernoulliSource make_source(double p) {
    BernoulliSource s;
    if (p >= 1.0) {
        s.certain = true;
    } else {
        s.threshold = static_cast<std::uint64_t>(std::ldexp(p, 64));
    }
    return s;
}

std::vector<double> cumulative(const std::vector<double>& splitting) {
    std::vector<double> out(splitting.size());
    std::partial_sum(splitting.begin(), splitting.end(), out.begin());
    return out;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    std::uint64_t value = 0;
    try {
        value = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        throw InputError(what + ": expected a non-negative integer, got '" + text + "'");
    }
    return value;
}

}  // namespace

DetectorModel DetectorModel::pnr() { return DetectorModel(); }

DetectorModel DetectorModel::tree(int detectors) {
    if (detectors < 2 || detectors > kMaxTreeDetectors) {
        throw std::invalid_argument("tree detector count must be in [2, 16]");
    }
    return tree(std::vector<double>(static_cast<std::size_t>(detectors), 1.0 / detectors));
}

DetectorModel DetectorModel::tree(std::vector<double> splitting) {
    if (splitting.size() < 2 || splitting.size() > kMaxTreeDetectors) {
        throw std::invalid_argument("tree detector count must be in [2, 16]");
    }
    double sum = 0.0;
    for (double p : splitting) {
        if (!(p >= 0.0)) throw std::invalid_argument("splitting probabilities must be >= 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("splitting probabilities must sum to 1");
    }
    DetectorModel model;
    model.kind_ = DetectorKind::Tree;
    model.splitting_ = std::move(splitting);
    return model;
}

DetectorModel DetectorModel::parse(const std::string& text) {
    if (text == "pnr") return pnr();
    if (text.rfind("tree:", 0) != 0) {
        throw InputError("invalid detector '" + text + "': expected pnr or tree:<d>");
    }
    const std::string body = text.substr(5);
    try {
        if (body.find(',') == std::string::npos) {
            return tree(static_cast<int>(parse_u64(body, "tree detector count")));
        }
        std::vector<double> splitting;
        std::istringstream parts(body);
        std::string part;
        while (std::getline(parts, part, ',')) {
            char* end = nullptr;
            const double p = std::strtod(part.c_str(), &end);
            if (part.empty() || end != part.c_str() + part.size()) {
                throw InputError("invalid splitting probability '" + part + "'");
            }
            splitting.push_back(p);
        }
        return tree(std::move(splitting));
    } catch (const std::invalid_argument& e) {
        throw InputError("invalid detector '" + text + "': " + e.what());
    }
}

int DetectorModel::max_sampled_order() const {
    return kind_ == DetectorKind::PNR ? kMaxOrder : std::min(detectors(), kMaxOrder);
}

std::string DetectorModel::to_string() const {
    if (kind_ == DetectorKind::PNR) return "pnr";
    const double equal = 1.0 / detectors();
    bool uniform = true;
    for (double p : splitting_) uniform = uniform && p == equal;
    if (uniform) return "tree:" + std::to_string(detectors());
    std::string out = "tree:";
    for (std::size_t i = 0; i < splitting_.size(); ++i) {
        char buffer[32];
        std::snprintf(buffer, sizeof buffer, "%.17g", splitting_[i]);
        out += (i ? "," : "") + std::string(buffer);
    }
    return out;
}

std::uint64_t tally_pulses(const Tally& tally) {
    std::uint64_t n = 0;
    for (const auto& [key, count] : tally) n += count;
    return n;
}

void merge_tally(Tally& into, const Tally& from) {
    for (const auto& [key, count] : from) into[key] += count;
}

Tally PixelTally::total() const {
    Tally out;
    for (const auto& block : blocks) merge_tally(out, block);
    return out;
}

std::uint64_t PixelTally::pulses() const {
    std::uint64_t n = 0;
    for (const auto& block : blocks) n += tally_pulses(block);
    return n;
}

std::uint64_t route_photons(unsigned photons, const std::vector<double>& cumulative_splitting,
                            Xoshiro256& rng) {
    std::uint64_t mask = 0;
    const std::size_t last = cumulative_splitting.size() - 1;
    for (unsigned i = 0; i < photons; ++i) {
        const double u = rng.uniform();
        std::size_t d = 0;
        while (d < last && u >= cumulative_splitting[d]) ++d;
        mask |= std::uint64_t{1} << d;
    }
    return mask;
}

PoissonSampler::PoissonSampler(double mean) {
    if (mean <= 0.0) return;
    chunks_ = static_cast<int>(std::ceil(mean / kPoissonChunk));
    chunk_mean_ = mean / chunks_;
    p0_ = std::exp(-chunk_mean_);
}

unsigned PoissonSampler::operator()(Xoshiro256& rng) const {
    unsigned total = 0;
    for (int c = 0; c < chunks_; ++c) {
        const double u = rng.uniform();
        double p = p0_;
        double cdf = p0_;
        unsigned k = 0;
        while (u >= cdf && p > 0.0) {
            ++k;
            p *= chunk_mean_ / k;
            cdf += p;
        }
        total += k;
    }
    return total;
}

unsigned sample_poisson(double mean, Xoshiro256& rng) { return PoissonSampler(mean)(rng); }

PixelTally simulate_pixel(const Scene& scene, Point point, std::uint64_t pulses,
                          const DetectorModel& detector, std::uint64_t seed, int blocks) {
    if (pulses < 1) throw std::invalid_argument("simulate_pixel: pulses must be >= 1");
    if (blocks < 1 || static_cast<std::uint64_t>(blocks) > pulses) {
        throw std::invalid_argument("simulate_pixel: blocks must be in [1, pulses]");
    }
    const auto probs = pixel_probabilities(scene, point);
    std::vector<BernoulliSource> sources;
    for (double p : probs.emitter_probs) {
        if (p > 0.0) sources.push_back(make_source(p));
    }
    const PoissonSampler background(probs.background_mean);
    const bool is_tree = detector.kind() == DetectorKind::Tree;
    const auto splitting = cumulative(detector.splitting());

    Xoshiro256 rng(seed);
    PixelTally out;
    out.blocks.resize(static_cast<std::size_t>(blocks));
    const std::uint64_t base = pulses / static_cast<std::uint64_t>(blocks);
    const std::uint64_t extra = pulses % static_cast<std::uint64_t>(blocks);

    std::vector<std::uint64_t> histogram(is_tree ? (std::size_t{1} << detector.detectors()) : sources.size() + 2, 0);
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(blocks); ++b) {
        std::fill(histogram.begin(), histogram.end(), 0);
        const std::uint64_t block_pulses = base + (b < extra ? 1 : 0);
        for (std::uint64_t pulse = 0; pulse < block_pulses; ++pulse) {
            unsigned photons = 0;
            for (const auto& s : sources) {
                photons += s.certain || rng.next() < s.threshold;
            }
            photons += background(rng);
            if (is_tree) {
                ++histogram[route_photons(photons, splitting, rng)];
            } else {
                if (photons >= histogram.size()) histogram.resize(photons + 1, 0);
                ++histogram[photons];
            }
        }
        Tally& tally = out.blocks[b];
        for (std::size_t key = 0; key < histogram.size(); ++key) {
            if (histogram[key]) tally.emplace(key, histogram[key]);
        }
    }
    return out;
}

RawScan simulate_scan(const Scene& scene, const ScanGrid& grid, std::uint64_t pulses,
                      const DetectorModel& detector, std::uint64_t base_seed, int blocks, int threads) {
    scene.validate();
    grid.validate();
    RawScan raw;
    raw.scene = scene;
    raw.grid = grid;
    raw.detector = detector;
    raw.pulses_per_pixel = pulses;
    raw.blocks = blocks;
    raw.base_seed = base_seed;
    raw.pixels.resize(grid.pixel_count());
    const auto width = static_cast<std::size_t>(grid.width);
    parallel_for(grid.pixel_count(), threads, [&](std::size_t i) {
        const auto row = static_cast<std::uint32_t>(i / width);
        const auto col = static_cast<std::uint32_t>(i % width);
        raw.pixels[i] = simulate_pixel(scene, grid.point(i), pulses, detector,
                                       derive_pixel_seed(base_seed, row, col), blocks);
    });
    return raw;
}

void save_raw_scan(const std::filesystem::path& dir, const RawScan& raw) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["kind"] = "rawscan";
    manifest["scene_hash"] = scene_hash(raw.scene);
    nlohmann::ordered_json emitters = nlohmann::ordered_json::array();
    for (const auto& e : raw.scene.emitters) {
        emitters.push_back({{"x_nm", e.position.x}, {"y_nm", e.position.y}, {"peak_probability", e.peak_probability}});
    }
    manifest["scene"] = {{"fwhm_nm", raw.scene.psf.fwhm()},
                         {"background_mean_per_pulse", raw.scene.background_mean},
                         {"emitters", emitters}};
    manifest["grid"] = {{"origin", {raw.grid.origin.x, raw.grid.origin.y}},
                        {"pitch_nm", raw.grid.pitch},
                        {"width", raw.grid.width},
                        {"height", raw.grid.height}};
    manifest["detector"] = raw.detector.to_string();
    manifest["pulses_per_pixel"] = raw.pulses_per_pixel;
    manifest["blocks"] = raw.blocks;
    manifest["base_seed"] = raw.base_seed;
    manifest["rng"] = raw.rng_id;
    manifest["seed_derivation"] = "splitmix64(base_seed ^ splitmix64((row << 32) | col))";
    {
        std::ofstream out(dir / "rawscan.json", std::ios::binary);
        out << manifest.dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "tallies.csv", std::ios::binary);
        out << "pixel_index,outcome_key,count\n";
        for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
            for (const auto& [key, count] : raw.pixels[i].total()) {
                out << i << ',' << key << ',' << count << '\n';
            }
        }
    }
    const auto blocks_path = dir / "blocks.csv";
    if (raw.blocks > 1) {
        std::ofstream out(blocks_path, std::ios::binary);
        out << "pixel_index,block,outcome_key,count\n";
        for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
            for (std::size_t b = 0; b < raw.pixels[i].blocks.size(); ++b) {
                for (const auto& [key, count] : raw.pixels[i].blocks[b]) {
                    out << i << ',' << b << ',' << key << ',' << count << '\n';
                }
            }
        }
    } else {
        std::filesystem::remove(blocks_path);
    }
}

namespace {

std::vector<std::uint64_t> split_fields(const std::string& line, std::size_t expected, const std::string& where) {
    std::vector<std::uint64_t> out;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) out.push_back(parse_u64(field, where));
    if (out.size() != expected) {
        throw InputError(where + ": expected " + std::to_string(expected) + " fields");
    }
    return out;
}

}  // namespace

RawScan load_raw_scan(const std::filesystem::path& dir) {
    std::ifstream in(dir / "rawscan.json");
    if (!in) throw InputError("no rawscan.json in " + dir.string());
    RawScan raw;
    try {
        nlohmann::json manifest;
        in >> manifest;
        const auto& scene = manifest.at("scene");
        raw.scene.psf = PSFModel(scene.at("fwhm_nm").get<double>());
        raw.scene.background_mean = scene.at("background_mean_per_pulse").get<double>();
        for (const auto& e : scene.at("emitters")) {
            raw.scene.emitters.push_back(
                {{e.at("x_nm").get<double>(), e.at("y_nm").get<double>()}, e.at("peak_probability").get<double>()});
        }
        raw.scene.validate();
        if (scene_hash(raw.scene) != manifest.at("scene_hash").get<std::string>()) {
            throw InputError("rawscan.json: scene hash mismatch");
        }
        const auto& grid = manifest.at("grid");
        raw.grid.origin = {grid.at("origin").at(0).get<double>(), grid.at("origin").at(1).get<double>()};
        raw.grid.pitch = grid.at("pitch_nm").get<double>();
        raw.grid.width = grid.at("width").get<int>();
        raw.grid.height = grid.at("height").get<int>();
        raw.grid.validate();
        raw.detector = DetectorModel::parse(manifest.at("detector").get<std::string>());
        raw.pulses_per_pixel = manifest.at("pulses_per_pixel").get<std::uint64_t>();
        raw.blocks = manifest.at("blocks").get<int>();
        raw.base_seed = manifest.at("base_seed").get<std::uint64_t>();
        raw.rng_id = manifest.at("rng").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed rawscan.json: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw InputError("malformed rawscan.json: " + std::string(e.what()));
    }
    if (raw.blocks < 1) throw InputError("rawscan.json: blocks must be >= 1");

    const std::size_t pixels = raw.grid.pixel_count();
    raw.pixels.assign(pixels, PixelTally{std::vector<Tally>(static_cast<std::size_t>(raw.blocks))});
    std::string line;
    if (raw.blocks > 1) {
        std::ifstream blocks(dir / "blocks.csv");
        if (!blocks || !std::getline(blocks, line) || line != "pixel_index,block,outcome_key,count") {
            throw InputError("blocks.csv missing or without header in " + dir.string());
        }
        while (std::getline(blocks, line)) {
            if (line.empty()) continue;
            const auto f = split_fields(line, 4, "blocks.csv");
            if (f[0] >= pixels || f[1] >= static_cast<std::uint64_t>(raw.blocks)) {
                throw InputError("blocks.csv: index out of range");
            }
            raw.pixels[f[0]].blocks[f[1]][f[2]] += f[3];
        }
    } else {
        std::ifstream tallies(dir / "tallies.csv");
        if (!tallies || !std::getline(tallies, line) || line != "pixel_index,outcome_key,count") {
            throw InputError("tallies.csv missing or without header in " + dir.string());
        }
        while (std::getline(tallies, line)) {
            if (line.empty()) continue;
            const auto f = split_fields(line, 3, "tallies.csv");
            if (f[0] >= pixels) throw InputError("tallies.csv: pixel index out of range");
            raw.pixels[f[0]].blocks[0][f[1]] += f[2];
        }
    }
    for (std::size_t i = 0; i < pixels; ++i) {
        if (raw.pixels[i].pulses() != raw.pulses_per_pixel) {
            throw InputError("pixel " + std::to_string(i) + ": tallies do not sum to pulses_per_pixel");
        }
    }
    return raw;
}

}  // namespace abscope
