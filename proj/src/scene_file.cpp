#include "abscope/scene_file.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <vector>

#include "abscope/errors.hpp"

namespace abscope {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string format_number(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

class Parser {
public:
    explicit Parser(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(int line, const std::string& message) const {
        throw InputError(source_ + ":" + std::to_string(line) + ": " + message);
    }

    double parse_number(int line, const std::string& field, const std::string& text) const {
        const std::string t = trim(text);
        char* end = nullptr;
        const double value = std::strtod(t.c_str(), &end);
        if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(value)) {
            fail(line, "field '" + field + "': expected a number, got '" + t + "'");
        }
        return value;
    }

    int parse_int(int line, const std::string& field, const std::string& text) const {
        const double value = parse_number(line, field, text);
        if (value != std::floor(value) || std::abs(value) > 1e9) {
            fail(line, "field '" + field + "': expected an integer, got '" + trim(text) + "'");
        }
        return static_cast<int>(value);
    }

    Point parse_pair(int line, const std::string& field, const std::string& text) const {
        const std::string t = trim(text);
        if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
            fail(line, "field '" + field + "': expected [x, y]");
        }
        const std::string inner = t.substr(1, t.size() - 2);
        const auto comma = inner.find(',');
        if (comma == std::string::npos || inner.find(',', comma + 1) != std::string::npos) {
            fail(line, "field '" + field + "': expected exactly two values");
        }
        return {parse_number(line, field, inner.substr(0, comma)),
                parse_number(line, field, inner.substr(comma + 1))};
    }

private:
    std::string source_;
};

struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, std::pair<int, std::string>> fields;
};

const std::map<std::string, std::set<std::string>>& allowed_fields() {
    static const std::map<std::string, std::set<std::string>> fields{
        {"psf", {"fwhm_nm"}},
        {"background", {"mean_per_pulse"}},
        {"emitter", {"x_nm", "y_nm", "peak_probability"}},
        {"grid", {"origin", "pitch_nm", "width", "height"}},
    };
    return fields;
}

}  // namespace

SceneFile parse_scene(std::istream& is, const std::string& source) {
    const Parser parser(source);
    std::vector<Section> sections;
    std::set<std::string> seen_tables;
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;

        if (line.rfind("[[", 0) == 0) {
            if (line.size() < 4 || line.substr(line.size() - 2) != "]]") parser.fail(line_no, "malformed section header");
            const std::string name = trim(line.substr(2, line.size() - 4));
            if (name != "emitter") parser.fail(line_no, "unknown array section '[[" + name + "]]'");
            sections.push_back({name, line_no, {}});
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') parser.fail(line_no, "malformed section header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (name == "emitter") parser.fail(line_no, "emitters are declared with [[emitter]]");
            if (!allowed_fields().contains(name)) parser.fail(line_no, "unknown section '[" + name + "]'");
            if (!seen_tables.insert(name).second) parser.fail(line_no, "duplicate section '[" + name + "]'");
            sections.push_back({name, line_no, {}});
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) parser.fail(line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (sections.empty()) parser.fail(line_no, "field '" + key + "' outside any section");
        Section& current = sections.back();
        if (!allowed_fields().at(current.name).contains(key)) {
            parser.fail(line_no, "unknown field '" + key + "' in section '" + current.name + "'");
        }
        if (!current.fields.emplace(key, std::make_pair(line_no, value)).second) {
            parser.fail(line_no, "duplicate field '" + key + "'");
        }
    }

    auto require = [&](const Section& s, const std::string& key) -> const std::pair<int, std::string>& {
        auto it = s.fields.find(key);
        if (it == s.fields.end()) {
            parser.fail(s.line, "section '" + s.name + "' is missing field '" + key + "'");
        }
        return it->second;
    };

    SceneFile out;
    bool have_psf = false;
    for (const auto& s : sections) {
        if (s.name == "psf") {
            const auto& [line, text] = require(s, "fwhm_nm");
            const double fwhm = parser.parse_number(line, "fwhm_nm", text);
            if (!(fwhm > 0.0)) parser.fail(line, "field 'fwhm_nm' must be positive");
            out.scene.psf = PSFModel(fwhm);
            have_psf = true;
        } else if (s.name == "background") {
            const auto& [line, text] = require(s, "mean_per_pulse");
            const double b = parser.parse_number(line, "mean_per_pulse", text);
            if (b < 0.0) parser.fail(line, "field 'mean_per_pulse' must be >= 0");
            out.scene.background_mean = b;
        } else if (s.name == "emitter") {
            Emitter e;
            {
                const auto& [line, text] = require(s, "x_nm");
                e.position.x = parser.parse_number(line, "x_nm", text);
            }
            {
                const auto& [line, text] = require(s, "y_nm");
                e.position.y = parser.parse_number(line, "y_nm", text);
            }
            const auto& [line, text] = require(s, "peak_probability");
            e.peak_probability = parser.parse_number(line, "peak_probability", text);
            if (e.peak_probability < 0.0 || e.peak_probability > 1.0) {
                parser.fail(line, "field 'peak_probability' must lie in [0,1]");
            }
            out.scene.emitters.push_back(e);
        } else if (s.name == "grid") {
            ScanGrid grid;
            {
                const auto& [line, text] = require(s, "origin");
                grid.origin = parser.parse_pair(line, "origin", text);
            }
            {
                const auto& [line, text] = require(s, "pitch_nm");
                grid.pitch = parser.parse_number(line, "pitch_nm", text);
                if (!(grid.pitch > 0.0)) parser.fail(line, "field 'pitch_nm' must be positive");
            }
            {
                const auto& [line, text] = require(s, "width");
                grid.width = parser.parse_int(line, "width", text);
                if (grid.width < 1) parser.fail(line, "field 'width' must be >= 1");
            }
            const auto& [line, text] = require(s, "height");
            grid.height = parser.parse_int(line, "height", text);
            if (grid.height < 1) parser.fail(line, "field 'height' must be >= 1");
            out.grid = grid;
        }
    }
    if (!have_psf) parser.fail(line_no, "missing required section '[psf]'");
    return out;
}

SceneFile load_scene_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open scene file " + path.string());
    }
    return parse_scene(in, path.string());
}

std::string format_scene_file(const Scene& scene, const std::optional<ScanGrid>& grid) {
    std::string out = canonical_scene_text(scene);
    if (grid) {
        out += "[grid]\norigin = [" + format_number(grid->origin.x) + ", " + format_number(grid->origin.y) +
               "]\npitch_nm = " + format_number(grid->pitch) + "\nwidth = " + std::to_string(grid->width) +
               "\nheight = " + std::to_string(grid->height) + "\n";
    }
    return out;
}

}  // namespace abscope
