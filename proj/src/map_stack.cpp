#include "abscope/map_stack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace abscope {
namespace {

constexpr const char* kUndefined = "undefined";

std::string format_value(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

}  // namespace

Layer& MapStack::add_layer(const std::string& name) {
    Layer fresh{name, std::vector<double>(grid_.pixel_count(), 0.0),
                std::vector<std::uint8_t>(grid_.pixel_count(), 0)};
    if (Layer* existing = find(name)) {
        *existing = std::move(fresh);
        return *existing;
    }
    layers_.push_back(std::move(fresh));
    return layers_.back();
}

const Layer* MapStack::find(const std::string& name) const {
    auto it = std::find_if(layers_.begin(), layers_.end(), [&](const Layer& l) { return l.name == name; });
    return it == layers_.end() ? nullptr : &*it;
}

Layer* MapStack::find(const std::string& name) {
    auto it = std::find_if(layers_.begin(), layers_.end(), [&](const Layer& l) { return l.name == name; });
    return it == layers_.end() ? nullptr : &*it;
}

const Layer& MapStack::at(const std::string& name) const {
    if (const Layer* layer = find(name)) return *layer;
    throw MissingLayerError(name);
}

void write_layer_csv(std::ostream& os, const MapStack& stack, const Layer& layer) {
    const auto width = static_cast<std::size_t>(stack.grid().width);
    os << "row,col,value\n";
    for (std::size_t i = 0; i < layer.values.size(); ++i) {
        os << i / width << ',' << i % width << ','
           << (layer.is_defined(i) ? format_value(layer.values[i]) : kUndefined) << '\n';
    }
}

Layer read_layer_csv(std::istream& is, const ScanGrid& grid, const std::string& name) {
    Layer layer{name, std::vector<double>(grid.pixel_count(), 0.0),
                std::vector<std::uint8_t>(grid.pixel_count(), 0)};
    std::string line;
    if (!std::getline(is, line) || line != "row,col,value") {
        throw InputError("layer " + name + ": missing `row,col,value` header");
    }
    std::vector<std::uint8_t> seen(grid.pixel_count(), 0);
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string row_text, col_text, value_text;
        if (!std::getline(fields, row_text, ',') || !std::getline(fields, col_text, ',') ||
            !std::getline(fields, value_text)) {
            throw InputError("layer " + name + ":" + std::to_string(line_no) + ": expected row,col,value");
        }
        long row = -1, col = -1;
        try {
            row = std::stol(row_text);
            col = std::stol(col_text);
        } catch (const std::exception&) {
            throw InputError("layer " + name + ":" + std::to_string(line_no) + ": bad pixel index");
        }
        if (row < 0 || row >= grid.height || col < 0 || col >= grid.width) {
            throw InputError("layer " + name + ":" + std::to_string(line_no) + ": pixel outside grid");
        }
        const auto i = static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.width) +
                       static_cast<std::size_t>(col);
        seen[i] = 1;
        if (value_text == kUndefined) continue;
        char* end = nullptr;
        const double value = std::strtod(value_text.c_str(), &end);
        if (end != value_text.c_str() + value_text.size()) {
            throw InputError("layer " + name + ":" + std::to_string(line_no) + ": bad value '" + value_text + "'");
        }
        layer.set(i, value);
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw InputError("layer " + name + ": not every pixel is present");
    }
    return layer;
}

PgmScale write_layer_pgm(std::ostream& os, const MapStack& stack, const Layer& layer) {
    PgmScale scale;
    bool any = false;
    for (std::size_t i = 0; i < layer.values.size(); ++i) {
        if (!layer.is_defined(i)) continue;
        const double v = layer.values[i];
        if (!any) {
            scale.low = scale.high = v;
            any = true;
        }
        scale.low = std::min(scale.low, v);
        scale.high = std::max(scale.high, v);
    }
    const double span = scale.high - scale.low;
    os << "P5\n" << stack.grid().width << ' ' << stack.grid().height << "\n65535\n";
    for (std::size_t i = 0; i < layer.values.size(); ++i) {
        std::uint16_t q = 0;
        if (layer.is_defined(i) && span > 0.0) {
            q = static_cast<std::uint16_t>(std::lround((layer.values[i] - scale.low) / span * 65535.0));
        }
        const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
        os.write(bytes, 2);
    }
    return scale;
}

void save_map_stack(const std::filesystem::path& dir, const MapStack& stack) {
    std::filesystem::create_directories(dir);
    const ScanGrid& grid = stack.grid();
    nlohmann::ordered_json description;
    description["grid"] = {{"origin", {grid.origin.x, grid.origin.y}},
                           {"pitch_nm", grid.pitch},
                           {"width", grid.width},
                           {"height", grid.height}};
    description["layers"] = nlohmann::ordered_json::array();
    for (const auto& layer : stack.layers()) {
        {
            std::ofstream csv(dir / (layer.name + ".csv"), std::ios::binary);
            write_layer_csv(csv, stack, layer);
        }
        std::ofstream pgm(dir / (layer.name + ".pgm"), std::ios::binary);
        const PgmScale scale = write_layer_pgm(pgm, stack, layer);
        description["layers"].push_back({{"name", layer.name},
                                         {"csv", layer.name + ".csv"},
                                         {"pgm", layer.name + ".pgm"},
                                         {"pgm_low", scale.low},
                                         {"pgm_high", scale.high}});
    }
    std::ofstream out(dir / "maps.json", std::ios::binary);
    out << description.dump(2) << '\n';
}

MapStack load_map_stack(const std::filesystem::path& dir) {
    std::ifstream in(dir / "maps.json");
    if (!in) {
        throw InputError("no maps.json in " + dir.string());
    }
    nlohmann::json description;
    try {
        in >> description;
        ScanGrid grid;
        grid.origin = {description.at("grid").at("origin").at(0).get<double>(),
                       description.at("grid").at("origin").at(1).get<double>()};
        grid.pitch = description.at("grid").at("pitch_nm").get<double>();
        grid.width = description.at("grid").at("width").get<int>();
        grid.height = description.at("grid").at("height").get<int>();
        grid.validate();
        MapStack stack(grid);
        for (const auto& entry : description.at("layers")) {
            const auto name = entry.at("name").get<std::string>();
            std::ifstream csv(dir / entry.at("csv").get<std::string>());
            if (!csv) throw InputError("missing layer file for " + name);
            stack.add_layer(name) = read_layer_csv(csv, grid, name);
        }
        return stack;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed maps.json in " + dir.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError("malformed maps.json in " + dir.string() + ": " + e.what());
    }
}

}  // namespace abscope
