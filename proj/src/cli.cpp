#include "abscope/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "abscope/analysis.hpp"
#include "abscope/errors.hpp"
#include "abscope/estimation.hpp"
#include "abscope/map_stack.hpp"
#include "abscope/montecarlo.hpp"
#include "abscope/parallel.hpp"
#include "abscope/photon_algebra.hpp"
#include "abscope/reconstruction.hpp"
#include "abscope/scene_file.hpp"

#ifndef ABSCOPE_VERSION
#define ABSCOPE_VERSION "0.0.0"
#endif

namespace abscope {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using Clock = std::chrono::system_clock;

std::string utc_timestamp(Clock::time_point t) {
    const std::time_t tt = Clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

Point parse_point(const std::string& text, const std::string& what) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument(text);
        std::size_t used_x = 0, used_y = 0;
        const std::string xs = text.substr(0, comma);
        const std::string ys = text.substr(comma + 1);
        const double x = std::stod(xs, &used_x);
        const double y = std::stod(ys, &used_y);
        if (used_x != xs.size() || used_y != ys.size()) throw std::invalid_argument(text);
        return {x, y};
    } catch (const std::exception&) {
        throw InputError(what + ": expected 'x,y', got '" + text + "'");
    }
}

/// Bare demo names resolve against the bundled scenes directory.
fs::path resolve_scene_path(const std::string& name) {
    fs::path path(name);
    if (fs::exists(path)) return path;
#ifdef ABSCOPE_SCENE_DIR
    const fs::path bundled = fs::path(ABSCOPE_SCENE_DIR) / (name + ".toml");
    if (fs::exists(bundled)) return bundled;
#endif
    throw InputError("scene file not found: " + name);
}

struct GridArgs {
    std::string origin;
    double pitch = 0.0;
    int width = 0;
    int height = 0;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--origin", origin, "grid origin 'x,y' in nm (overrides the scene file)");
        cmd.add_option("--pitch", pitch, "grid pitch in nm");
        cmd.add_option("--width", width, "grid width in pixels");
        cmd.add_option("--height", height, "grid height in pixels");
    }

    ScanGrid resolve(const std::optional<ScanGrid>& from_file) const {
        ScanGrid grid;
        const bool complete = !origin.empty() && pitch > 0.0 && width > 0 && height > 0;
        if (from_file) {
            grid = *from_file;
        } else if (!complete) {
            throw InputError("scene has no [grid] section; pass --origin, --pitch, --width and --height");
        }
        if (!origin.empty()) grid.origin = parse_point(origin, "--origin");
        if (pitch != 0.0) grid.pitch = pitch;
        if (width != 0) grid.width = width;
        if (height != 0) grid.height = height;
        try {
            grid.validate();
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
        return grid;
    }

    Json to_json(const ScanGrid& g) const {
        return {{"origin", {g.origin.x, g.origin.y}}, {"pitch_nm", g.pitch}, {"width", g.width}, {"height", g.height}};
    }
};

struct RunRecord {
    std::string subcommand;
    Json parameters = Json::object();
    Clock::time_point started = Clock::now();
};

void write_manifest(const fs::path& dir, const RunRecord& run, Json extra) {
    const auto finished = Clock::now();
    Json manifest;
    manifest["tool"] = "abscope";
    manifest["version"] = ABSCOPE_VERSION;
    manifest["subcommand"] = run.subcommand;
    manifest["parameters"] = run.parameters;
    for (auto& [key, value] : extra.items()) manifest[key] = value;
    manifest["started_at"] = utc_timestamp(run.started);
    manifest["finished_at"] = utc_timestamp(finished);
    manifest["wall_time_s"] = std::chrono::duration<double>(finished - run.started).count();
    fs::create_directories(dir);
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
}

void check_order_arg(int order) {
    if (order < 2 || order > kMaxOrder) {
        throw InputError("--order must be in [2, " + std::to_string(kMaxOrder) + "]");
    }
}

// exact ---------------------------------------------------------------------

struct ExactArgs {
    std::string scene;
    GridArgs grid;
    int order = 3;
    std::string out;
    int threads = 0;
};

int cmd_exact(const ExactArgs& a, std::ostream& out) {
    RunRecord run{"exact"};
    check_order_arg(a.order);
    const SceneFile file = load_scene_file(resolve_scene_path(a.scene));
    const ScanGrid grid = a.grid.resolve(file.grid);
    const int threads = resolve_thread_count(a.threads);
    const MapStack maps = scan_exact(file.scene, grid, a.order, threads);
    save_map_stack(a.out, maps);
    run.parameters = {{"scene", a.scene}, {"grid", a.grid.to_json(grid)}, {"order", a.order}, {"threads", threads}};
    write_manifest(a.out, run,
                   {{"kind", "mapstack"}, {"scene_hash", scene_hash(file.scene)},
                    {"scene_text", format_scene_file(file.scene, grid)}});
    out << "wrote " << maps.layers().size() << " layers to " << a.out << '\n';
    return kExitSuccess;
}

// simulate ------------------------------------------------------------------

struct SimulateArgs {
    std::string scene;
    GridArgs grid;
    std::uint64_t pulses = 100000;
    std::uint64_t seed = 1;
    std::string detector = "pnr";
    int blocks = 100;
    std::string out;
    int threads = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    RunRecord run{"simulate"};
    const DetectorModel detector = DetectorModel::parse(a.detector);
    if (a.pulses < 1) throw InputError("--pulses must be >= 1");
    if (a.blocks < 1 || static_cast<std::uint64_t>(a.blocks) > a.pulses) {
        throw InputError("--blocks must be in [1, pulses]");
    }
    const SceneFile file = load_scene_file(resolve_scene_path(a.scene));
    const ScanGrid grid = a.grid.resolve(file.grid);
    const int threads = resolve_thread_count(a.threads);
    const RawScan raw = simulate_scan(file.scene, grid, a.pulses, detector, a.seed, a.blocks, threads);
    save_raw_scan(a.out, raw);
    run.parameters = {{"scene", a.scene},   {"grid", a.grid.to_json(grid)},   {"pulses", a.pulses},
                      {"seed", a.seed},     {"detector", detector.to_string()}, {"blocks", a.blocks},
                      {"threads", threads}};
    write_manifest(a.out, run,
                   {{"kind", "rawscan"},
                    {"scene_hash", scene_hash(file.scene)},
                    {"base_seed", a.seed},
                    {"rng", std::string(kRngId)},
                    {"scene_text", format_scene_file(file.scene, grid)}});
    out << "simulated " << grid.pixel_count() << " pixels x " << a.pulses << " pulses into " << a.out << '\n';
    return kExitSuccess;
}

// reconstruct ---------------------------------------------------------------

struct ReconstructArgs {
    std::string in;
    int order = 2;
    std::string mode = "standard";
    bool certify = false;
    std::string out;
    int threads = 0;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out, std::ostream&) {
    RunRecord run{"reconstruct"};
    check_order_arg(a.order);
    const ReconstructionMode mode = parse_mode(a.mode);
    const int threads = resolve_thread_count(a.threads);
    const fs::path in(a.in);

    MapStack maps;
    Json extra{{"kind", "mapstack"}};
    if (fs::exists(in / "rawscan.json")) {
        const RawScan raw = load_raw_scan(in);
        int estimate_order = a.order;
        if (mode == ReconstructionMode::TwoEmitter) {
            estimate_order = std::min(3, raw.detector.max_sampled_order());
        }
        maps = estimate_scan(raw, estimate_order, threads);
        extra["scene_hash"] = scene_hash(raw.scene);
        extra["base_seed"] = raw.base_seed;
        extra["rng"] = raw.rng_id;
        extra["source"] = "rawscan";
    } else if (fs::exists(in / "maps.json")) {
        const MapStack source = load_map_stack(in);
        maps = MapStack(source.grid());
        auto copy = [&](const std::string& name) {
            if (const Layer* layer = source.find(name)) maps.add_layer(name) = *layer;
        };
        for (const auto& name : required_layers(a.order, mode)) {
            maps.add_layer(name) = source.at(name);
            copy("se_" + name);
        }
        copy("g3");
        copy("se_g3");
        extra["source"] = "mapstack";
    } else {
        throw InputError("input directory " + a.in + " holds neither rawscan.json nor maps.json");
    }

    if (a.certify) {
        if (mode != ReconstructionMode::TwoEmitter) throw InputError("--certify applies to two-emitter mode only");
        const auto cert = certify_two_emitter(maps);
        extra["two_emitter_certificate"] = {{"passed", cert.passed},
                                            {"pixels_checked", cert.pixels_checked},
                                            {"pixels_incompatible", cert.pixels_incompatible}};
        if (!cert.passed) {
            throw PreconditionError("two-emitter certification failed: g3 incompatible with 0 at " +
                                    std::to_string(cert.pixels_incompatible) + " of " +
                                    std::to_string(cert.pixels_checked) + " pixels");
        }
    }
    for (int k = 2; k <= a.order; ++k) add_reconstruction(maps, k, mode);
    save_map_stack(a.out, maps);
    run.parameters = {{"in", a.in}, {"order", a.order}, {"mode", to_string(mode)}, {"certify", a.certify},
                      {"threads", threads}};
    write_manifest(a.out, run, extra);
    out << "wrote " << maps.layers().size() << " layers to " << a.out << '\n';
    return kExitSuccess;
}

// analyze -------------------------------------------------------------------

struct AnalyzeArgs {
    std::string in;
    std::string emitter;
    bool two_peak = false;
    std::vector<int> orders;
    std::string layer;
    int row = -1;
    std::string out;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    RunRecord run{"analyze"};
    if (a.emitter.empty() == !a.two_peak) {
        throw InputError("analyze needs exactly one of --emitter x,y or --two-peak");
    }
    const MapStack maps = load_map_stack(a.in);
    fs::create_directories(a.out);
    Json extra{{"kind", "report"}};
    run.parameters = {{"in", a.in}};

    if (!a.emitter.empty()) {
        const Point emitter = parse_point(a.emitter, "--emitter");
        std::vector<int> orders = a.orders;
        if (orders.empty()) {
            orders.push_back(1);
            for (int k = 2; k <= kMaxOrder; ++k) {
                if (maps.has(order_layer_name(k))) orders.push_back(k);
            }
        }
        const auto rows = narrowing_report(maps, emitter, orders);
        std::ofstream csv(fs::path(a.out) / "narrowing.csv", std::ios::binary);
        write_narrowing_csv(csv, rows);
        run.parameters["emitter"] = {emitter.x, emitter.y};
        run.parameters["orders"] = orders;
        const bool all_converged =
            std::all_of(rows.begin(), rows.end(), [](const NarrowingRow& r) { return r.converged; });
        extra["all_converged"] = all_converged;
        out << "narrowing report: " << rows.size() << " orders, "
            << (all_converged ? "all fits converged" : "some fits did not converge") << '\n';
    } else {
        std::string layer = a.layer;
        if (layer.empty()) {
            for (int k = kMaxOrder; k >= 2 && layer.empty(); --k) {
                if (maps.has(order_layer_name(k))) layer = order_layer_name(k);
            }
            if (layer.empty()) throw MissingLayerError("sr<k>");
        }
        const std::optional<int> row = a.row >= 0 ? std::optional<int>(a.row) : std::nullopt;
        const auto report = two_peak_report(maps, layer, row);
        std::ofstream csv(fs::path(a.out) / "two_peak.csv", std::ios::binary);
        write_two_peak_csv(csv, report);
        run.parameters["two_peak"] = true;
        run.parameters["layer"] = layer;
        run.parameters["row"] = report.row;
        out << "separation " << report.fit.separation << " +/- " << report.fit.separation_se << " nm ("
            << (report.fit.converged ? "converged" : "not converged")
            << (report.fit.degenerate ? ", degenerate" : "") << ")\n";
    }
    write_manifest(a.out, run, extra);
    return kExitSuccess;
}

// coefficients --------------------------------------------------------------

int cmd_coefficients(int max_order, const std::string& out_path, std::ostream& out) {
    if (max_order < 1 || max_order > kMaxOrder) {
        throw InputError("--max-order must be in [1, " + std::to_string(kMaxOrder) + "]");
    }
    std::vector<PowerSumExpansion> expansions;
    for (int k = 1; k <= max_order; ++k) expansions.push_back(power_sum_expansion(k));
    if (out_path.empty()) {
        write_coefficient_csv(out, expansions);
    } else {
        std::ofstream file(out_path, std::ios::binary);
        write_coefficient_csv(file, expansions);
    }
    return kExitSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"abscope: photon-statistics super-resolution simulator", "abscope"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ABSCOPE_VERSION);

    ExactArgs exact;
    auto* exact_cmd = app.add_subcommand("exact", "noise-free maps of a scene");
    exact_cmd->add_option("--scene", exact.scene, "scene file or bundled demo name")->required();
    exact.grid.add_to(*exact_cmd);
    exact_cmd->add_option("--order", exact.order, "highest correlation order K");
    exact_cmd->add_option("--out", exact.out, "output directory")->required();
    exact_cmd->add_option("--threads", exact.threads, "worker threads (default ABSCOPE_THREADS or all cores)");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo acquisition of a scene");
    sim_cmd->add_option("--scene", sim.scene, "scene file or bundled demo name")->required();
    sim.grid.add_to(*sim_cmd);
    sim_cmd->add_option("--pulses", sim.pulses, "excitation pulses per pixel");
    sim_cmd->add_option("--seed", sim.seed, "base seed");
    sim_cmd->add_option("--detector", sim.detector, "pnr | tree:<d> | tree:<p1>,<p2>,...");
    sim_cmd->add_option("--blocks", sim.blocks, "pulse blocks per pixel kept for the jackknife");
    sim_cmd->add_option("--out", sim.out, "output directory")->required();
    sim_cmd->add_option("--threads", sim.threads, "worker threads");

    ReconstructArgs rec;
    auto* rec_cmd = app.add_subcommand("reconstruct", "estimate g maps and super-resolved images");
    rec_cmd->add_option("--in", rec.in, "rawscan or map-stack directory")->required();
    rec_cmd->add_option("--order", rec.order, "highest super-resolution order");
    rec_cmd->add_option("--mode", rec.mode, "standard | two-emitter");
    rec_cmd->add_flag("--certify", rec.certify, "require g3 compatible with 0 before two-emitter reconstruction");
    rec_cmd->add_option("--out", rec.out, "output directory")->required();
    rec_cmd->add_option("--threads", rec.threads, "worker threads");

    AnalyzeArgs ana;
    auto* ana_cmd = app.add_subcommand("analyze", "FWHM narrowing and two-peak reports");
    ana_cmd->add_option("--in", ana.in, "map-stack directory")->required();
    ana_cmd->add_option("--emitter", ana.emitter, "emitter position 'x,y' for the narrowing report");
    ana_cmd->add_flag("--two-peak", ana.two_peak, "fit two Gaussians to a super-resolved layer");
    ana_cmd->add_option("--orders", ana.orders, "orders for the narrowing report")->delimiter(',');
    ana_cmd->add_option("--layer", ana.layer, "layer for --two-peak (default highest sr layer)");
    ana_cmd->add_option("--row", ana.row, "grid row for --two-peak (default row of the maximum)");
    ana_cmd->add_option("--out", ana.out, "output directory")->required();

    int coeff_order = 5;
    std::string coeff_out;
    auto* coeff_cmd = app.add_subcommand("coefficients", "export the power-sum coefficient table as CSV");
    coeff_cmd->add_option("--max-order", coeff_order, "highest order");
    coeff_cmd->add_option("--out", coeff_out, "output file (default stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitInputError;
    }

    try {
        if (*exact_cmd) return cmd_exact(exact, out);
        if (*sim_cmd) return cmd_simulate(sim, out);
        if (*rec_cmd) return cmd_reconstruct(rec, out, err);
        if (*ana_cmd) return cmd_analyze(ana, out);
        if (*coeff_cmd) return cmd_coefficients(coeff_order, coeff_out, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << '\n';
        return kExitPreconditionError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace abscope
