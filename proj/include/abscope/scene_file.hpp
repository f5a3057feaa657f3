#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "abscope/scene.hpp"

namespace abscope {

/// Contents of a scene file. The grid section is optional.
struct SceneFile {
    Scene scene;
    std::optional<ScanGrid> grid;
};

/// Parses the TOML-style scene format:
///
///     [psf]
///     fwhm_nm = 500
///     [background]
///     mean_per_pulse = 0.002
///     [[emitter]]
///     x_nm = -135
///     y_nm = 0
///     peak_probability = 0.1
///     [grid]
///     origin = [-400, -200]
///     pitch_nm = 10
///     width = 81
///     height = 41
///
/// Throws InputError with a `source:line:` prefix on any malformed field.
SceneFile parse_scene(std::istream& is, const std::string& source = "<scene>");
SceneFile load_scene_file(const std::filesystem::path& path);

/// Inverse of parse_scene, numbers printed with 17 significant digits.
std::string format_scene_file(const Scene& scene, const std::optional<ScanGrid>& grid);

}  // namespace abscope
