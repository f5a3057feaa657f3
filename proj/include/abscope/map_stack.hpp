#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "abscope/errors.hpp"
#include "abscope/scene.hpp"

namespace abscope {

/// One named raster. `defined[i] == 0` marks a pixel whose value is meaningless.
struct Layer {
    std::string name;
    std::vector<double> values;
    std::vector<std::uint8_t> defined;

    bool is_defined(std::size_t i) const { return defined[i] != 0; }
    void set(std::size_t i, double value) {
        values[i] = value;
        defined[i] = 1;
    }
};

/// Aligned layers over a common scan grid, kept in insertion order.
class MapStack {
public:
    MapStack() = default;
    explicit MapStack(ScanGrid grid) : grid_(grid) {}

    const ScanGrid& grid() const { return grid_; }
    const std::vector<Layer>& layers() const { return layers_; }

    /// Adds (or resets) a layer with every pixel undefined and zero.
    Layer& add_layer(const std::string& name);
    bool has(const std::string& name) const { return find(name) != nullptr; }
    const Layer* find(const std::string& name) const;
    Layer* find(const std::string& name);
    /// Throws MissingLayerError.
    const Layer& at(const std::string& name) const;

private:
    ScanGrid grid_;
    std::vector<Layer> layers_;
};

/// Affine map applied when quantizing a layer to 16 bits:
/// pixel = round((value - low) / (high - low) * 65535), undefined pixels = 0.
struct PgmScale {
    double low = 0.0;
    double high = 0.0;
};

/// `row,col,value` with 17 significant digits; undefined pixels read `undefined`.
void write_layer_csv(std::ostream& os, const MapStack& stack, const Layer& layer);
Layer read_layer_csv(std::istream& is, const ScanGrid& grid, const std::string& name);

/// Binary 16-bit PGM (P5, big-endian).
PgmScale write_layer_pgm(std::ostream& os, const MapStack& stack, const Layer& layer);

/// Writes `<layer>.csv` and `<layer>.pgm` for every layer plus `maps.json`
/// describing the grid, layer order and PGM scales.
void save_map_stack(const std::filesystem::path& dir, const MapStack& stack);
/// Reads a directory written by save_map_stack. Throws std::runtime_error on
/// malformed content.
MapStack load_map_stack(const std::filesystem::path& dir);

}  // namespace abscope
