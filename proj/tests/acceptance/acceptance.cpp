// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "abscope/analysis.hpp"
#include "abscope/cli.hpp"
#include "abscope/estimation.hpp"
#include "abscope/montecarlo.hpp"
#include "abscope/photon_algebra.hpp"
#include "abscope/reconstruction.hpp"
#include "abscope/scene.hpp"
#include "abscope/scene_file.hpp"

using namespace abscope;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    std::optional<double> budget_s;
    std::function<Outcome()> run;
};

std::string format(const char* fmt, auto... args) {
    char buffer[512];
    std::snprintf(buffer, sizeof buffer, fmt, args...);
    return buffer;
}

SceneFile demo_scene(const std::string& name) {
    return load_scene_file(fs::path(ABSCOPE_SCENE_DIR) / (name + ".toml"));
}

ScanGrid line_grid(double from, double y, double pitch, int width) {
    ScanGrid g;
    g.origin = {from, y};
    g.pitch = pitch;
    g.width = width;
    g.height = 1;
    return g;
}

std::vector<double> row_values(const MapStack& maps, const std::string& layer, int row) {
    const Layer& l = maps.at(layer);
    const auto width = static_cast<std::size_t>(maps.grid().width);
    const auto start = static_cast<std::size_t>(row) * width;
    return {l.values.begin() + static_cast<std::ptrdiff_t>(start),
            l.values.begin() + static_cast<std::ptrdiff_t>(start + width)};
}

int count_local_maxima(const std::vector<double>& v) {
    int n = 0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) n += v[i] > v[i - 1] && v[i] > v[i + 1];
    return n;
}

// 1 -------------------------------------------------------------------------

Outcome coefficient_table() {
    using Table = std::vector<std::pair<std::vector<int>, Rational>>;
    const std::vector<Table> golden{
        {{{2}, Rational(-1)}, {{1, 1}, Rational(1)}},
        {{{3}, Rational(1, 2)}, {{2, 1}, Rational(-3, 2)}, {{1, 1, 1}, Rational(1)}},
        {{{4}, Rational(-1, 6)},
         {{3, 1}, Rational(2, 3)},
         {{2, 2}, Rational(1, 2)},
         {{2, 1, 1}, Rational(-2)},
         {{1, 1, 1, 1}, Rational(1)}},
        {{{5}, Rational(1, 24)},
         {{4, 1}, Rational(-5, 24)},
         {{3, 2}, Rational(-5, 12)},
         {{3, 1, 1}, Rational(5, 6)},
         {{2, 2, 1}, Rational(5, 4)},
         {{2, 1, 1, 1}, Rational(-5, 2)},
         {{1, 1, 1, 1, 1}, Rational(1)}},
    };
    int compared = 0;
    for (int k = 2; k <= 5; ++k) {
        const auto expansion = power_sum_expansion(k);
        const Table& table = golden[static_cast<std::size_t>(k - 2)];
        if (expansion.terms().size() != table.size()) {
            return {false, format("k=%d: %zu terms, expected %zu", k, expansion.terms().size(), table.size())};
        }
        for (std::size_t i = 0; i < table.size(); ++i) {
            const auto& term = expansion.terms()[i];
            if (!(term.partition == Partition(table[i].first)) || !(term.coefficient == table[i].second)) {
                return {false, format("k=%d term %zu: got %s %s", k, i, term.partition.to_string().c_str(),
                                      term.coefficient.to_string().c_str())};
            }
            ++compared;
        }
    }
    return {true, format("%d coefficients match exactly", compared)};
}

// 2 -------------------------------------------------------------------------

Outcome oracle_equivalence() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> count(1, 6);
    std::vector<PowerSumExpansion> expansions;
    for (int k = 1; k <= 6; ++k) expansions.push_back(power_sum_expansion(k));
    double worst = 0.0;
    int checks = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> probs(static_cast<std::size_t>(count(rng)));
        for (auto& p : probs) p = 1.0 - u(rng);  // (0, 1]
        const auto f = oracle::factorial_moments(oracle::emitter_count_distribution(probs), 6);
        std::vector<double> g(6);
        for (std::size_t k = 0; k < 6; ++k) g[k] = f[k] / std::pow(f[0], static_cast<double>(k + 1));
        g[0] = 1.0;
        for (int k = 1; k <= 6; ++k) {
            const double expected = oracle::power_sum(probs, k);
            const double got = evaluate_power_sum(expansions[static_cast<std::size_t>(k - 1)], f[0], GVector(g));
            worst = std::max(worst, std::abs(got - expected) / expected);
            ++checks;
        }
    }
    return {worst <= 1e-12, format("%d comparisons, worst relative error %.2e (limit 1e-12)", checks, worst)};
}

// 3 -------------------------------------------------------------------------

Outcome exact_narrowing() {
    Scene scene;
    scene.psf = PSFModel(500.0);
    scene.emitters = {{{0.0, 0.0}, 0.1}};
    ScanGrid grid;
    grid.origin = {-800.0, -50.0};
    grid.pitch = 5.0;
    grid.width = 321;
    grid.height = 21;
    MapStack maps = scan_exact(scene, grid, 3);
    const std::vector<int> orders{1, 2, 3};
    const auto rows = narrowing_report(maps, {0.0, 0.0}, orders);
    const double sr2 = rows[1].fitted_fwhm;
    const double sr3 = rows[2].fitted_fwhm;
    const bool ok = rows[1].converged && rows[2].converged && std::abs(sr2 / 353.6 - 1.0) <= 0.01 &&
                    std::abs(sr3 / 288.7 - 1.0) <= 0.01;
    return {ok, format("intensity %.2f nm, sr2 %.2f nm (353.6 +/- 1%%), sr3 %.2f nm (288.7 +/- 1%%)",
                       rows[0].fitted_fwhm, sr2, sr3)};
}

// 4 -------------------------------------------------------------------------

Outcome monte_carlo_narrowing() {
    Scene scene;
    scene.psf = PSFModel(500.0);
    scene.background_mean = 0.005;
    scene.emitters = {{{0.0, 0.0}, 0.1}};
    const ScanGrid grid = line_grid(-700.0, 0.0, 20.0, 71);
    MapStack maps = estimate_scan(simulate_scan(scene, grid, 1'000'000, DetectorModel::pnr(), 4242, 100), 2);
    add_reconstruction(maps, 2, ReconstructionMode::Standard);
    const auto fit = fit_gaussian_1d(row_profile(maps, "sr2", 0));
    const double target = 500.0 / std::sqrt(2.0);
    const double deviation = fit.params.fwhm / target - 1.0;
    return {fit.converged && std::abs(deviation) <= 0.10,
            format("sr2 FWHM %.1f nm vs %.1f nm (deviation %+.2f%%, limit 10%%), 71 px x 1e6 pulses, seed 4242",
                   fit.params.fwhm, target, 100.0 * deviation)};
}

// 5 -------------------------------------------------------------------------

Outcome two_emitter_resolution() {
    const SceneFile demo = demo_scene("two_centres_270nm");
    const double truth = std::abs(demo.scene.emitters[1].position.x - demo.scene.emitters[0].position.x);

    MapStack exact = scan_exact(demo.scene, *demo.grid, 2);
    add_reconstruction(exact, 5, ReconstructionMode::TwoEmitter);
    const int row = nearest_row(exact.grid(), demo.scene.emitters[0].position.y);
    const int intensity_peaks = count_local_maxima(row_values(exact, "intensity", row));
    const int sr5_peaks = count_local_maxima(row_values(exact, "sr5", row));
    const auto exact_fit = fit_two_gaussians_1d(row_profile(exact, "sr5", row));

    const ScanGrid line = line_grid(demo.grid->origin.x, demo.scene.emitters[0].position.y, demo.grid->pitch,
                                    demo.grid->width);
    MapStack mc = estimate_scan(simulate_scan(demo.scene, line, 10'000'000, DetectorModel::pnr(), 270, 100), 2);
    add_reconstruction(mc, 5, ReconstructionMode::TwoEmitter);
    const auto mc_fit = fit_two_gaussians_1d(row_profile(mc, "sr5", 0));

    const bool ok = intensity_peaks == 1 && sr5_peaks == 2 && exact_fit.converged &&
                    std::abs(exact_fit.separation - truth) <= 15.0 && mc_fit.converged &&
                    std::abs(mc_fit.separation - truth) <= 70.0;
    return {ok, format("intensity maxima %d, exact sr5 maxima %d, exact separation %.1f nm (+/-15), "
                       "Monte Carlo 101 px x 1e7 pulses separation %.1f +/- %.2g nm (+/-70)",
                       intensity_peaks, sr5_peaks, exact_fit.separation, mc_fit.separation,
                       mc_fit.separation_se)};
}

// 6 -------------------------------------------------------------------------

Outcome estimator_scaling() {
    const std::vector<double> probs{0.1, 0.1};
    const auto f = oracle::factorial_moments(oracle::emitter_count_distribution(probs), 2);
    const double truth = f[1] / (f[0] * f[0]);
    Scene scene;
    scene.emitters = {{{0, 0}, 0.1}, {{0, 0}, 0.1}};

    const std::vector<std::uint64_t> pulses{10'000, 100'000, 1'000'000};
    const int seeds = 50;
    std::vector<double> rms;
    double last_mean = 0.0;
    for (std::uint64_t m : pulses) {
        double ss = 0.0;
        double sum = 0.0;
        for (int s = 0; s < seeds; ++s) {
            const auto stats = estimate_from_counts(
                simulate_pixel(scene, {0, 0}, m, DetectorModel::pnr(), 600000 + m + static_cast<std::uint64_t>(s)), 2);
            const double e = stats.g_at(2) - truth;
            ss += e * e;
            sum += stats.g_at(2);
        }
        rms.push_back(std::sqrt(ss / seeds));
        last_mean = sum / seeds;
    }
    bool ok = true;
    std::string ratios;
    for (std::size_t i = 0; i + 1 < rms.size(); ++i) {
        const double ratio = (rms[i] / rms[i + 1]) / std::sqrt(10.0);
        ok = ok && ratio >= 1.0 / 1.5 && ratio <= 1.5;
        ratios += format("%s%.3f", i ? ", " : "", ratio);
    }
    const double mean_se = rms.back() / std::sqrt(static_cast<double>(seeds));
    ok = ok && std::abs(last_mean - truth) <= 4.0 * mean_se;
    return {ok, format("oracle %.3f, RMS %.4f / %.4f / %.5f, normalized ratios [%s] (limit 1.5x), mean at 1e6 %.5f",
                       truth, rms[0], rms[1], rms[2], ratios.c_str(), last_mean)};
}

// 7 -------------------------------------------------------------------------

Outcome tree_correctness() {
    const auto tree = DetectorModel::tree(3);
    Scene single;
    single.emitters = {{{0, 0}, 0.9}};
    const Tally tally = simulate_pixel(single, {0, 0}, 10'000'000, tree, 77).total();
    std::uint64_t coincidences = 0;
    for (const auto& [mask, count] : tally) {
        if (std::popcount(mask) >= 2) coincidences += count;
    }

    Scene background;
    background.background_mean = 0.1;
    ScanGrid grid;
    grid.origin = {0, 0};
    grid.pitch = 100;
    grid.width = 3;
    grid.height = 3;
    const MapStack maps = estimate_scan(simulate_scan(background, grid, 2'000'000, tree, 78, 100), 3);
    double worst = 0.0;
    bool defined = true;
    for (std::size_t i = 0; i < grid.pixel_count(); ++i) {
        for (const char* k : {"2", "3"}) {
            const Layer& g = maps.at(std::string("g") + k);
            const Layer& se = maps.at(std::string("se_g") + k);
            defined = defined && g.is_defined(i) && se.is_defined(i) && se.values[i] > 0.0;
            if (defined) worst = std::max(worst, std::abs(g.values[i] - 1.0) / se.values[i]);
        }
    }
    return {coincidences == 0 && defined && worst < 4.0,
            format("%llu multi-detector coincidences in 1e7 pulses; background-only g2/g3 worst deviation %.2f "
                   "std. err. over 9 pixels (limit 4)",
                   static_cast<unsigned long long>(coincidences), worst)};
}

// 8 -------------------------------------------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    return run_cli(args, out, err);
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "abscope_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::string> grid{"--origin", "-600,-600", "--pitch", "60", "--width", "21", "--height", "21"};
    int files = 0;
    std::string failure;
    auto compare = [&](const fs::path& a, const fs::path& b) {
        for (const auto& entry : fs::directory_iterator(a)) {
            const auto ext = entry.path().extension();
            if (ext != ".csv" && entry.path().filename() != "rawscan.json") continue;
            ++files;
            if (slurp(entry.path()) != slurp(b / entry.path().filename())) {
                failure = entry.path().filename().string() + " differs between " + a.filename().string() + " and " +
                          b.filename().string();
            }
        }
    };

    for (const std::string detector : {"pnr", "tree:3"}) {
        std::vector<fs::path> raws;
        std::vector<fs::path> recs;
        for (const std::string threads : {"1", "1", "4"}) {
            const auto tag = detector.substr(0, 3) + "_" + std::to_string(raws.size()) + "_t" + threads;
            auto args = std::vector<std::string>{"simulate", "--scene", "three_centres", "--pulses", "20000",
                                                 "--seed",   "12345",   "--detector", detector,   "--blocks",
                                                 "10",       "--threads", threads,   "--out",    (root / ("raw_" + tag)).string()};
            args.insert(args.end(), grid.begin(), grid.end());
            if (cli(args) != kExitSuccess) return {false, "simulate failed"};
            raws.push_back(root / ("raw_" + tag));
            if (cli({"reconstruct", "--in", raws.back().string(), "--order", "3", "--threads", threads, "--out",
                     (root / ("rec_" + tag)).string()}) != kExitSuccess) {
                return {false, "reconstruct failed"};
            }
            recs.push_back(root / ("rec_" + tag));
        }
        for (std::size_t i = 1; i < raws.size(); ++i) {
            compare(raws[0], raws[i]);
            compare(recs[0], recs[i]);
        }
    }
    std::vector<fs::path> exacts;
    for (const std::string threads : {"1", "1", "4"}) {
        const fs::path dir = root / ("exact_" + std::to_string(exacts.size()) + "_t" + threads);
        auto args = std::vector<std::string>{"exact", "--scene", "three_centres", "--order", "4",
                                             "--threads", threads, "--out", dir.string()};
        args.insert(args.end(), grid.begin(), grid.end());
        if (cli(args) != kExitSuccess) return {false, "exact failed"};
        exacts.push_back(dir);
    }
    for (std::size_t i = 1; i < exacts.size(); ++i) compare(exacts[0], exacts[i]);
    fs::remove_all(root);
    if (!failure.empty()) return {false, failure};
    return {files > 0, format("%d file comparisons byte-identical (PNR and tree tallies, CSV layers; 3 runs, "
                              "threads 1/1/4)",
                              files)};
}

// 9 -------------------------------------------------------------------------

// |analytic - fd| relative to the analytic value, floored at the largest
// component of the same gradient so exact zeros do not divide by zero.
double relative_gap(double analytic, double fd, double scale) {
    return std::abs(analytic - fd) / std::max(std::abs(analytic), scale);
}

Outcome derivative_checks() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_delta = 0.0;
    double worst_jacobian = 0.0;
    for (int point = 0; point < 100; ++point) {
        const int k = 2 + point % 7;
        const auto expansion = power_sum_expansion(k);
        const double n = 0.01 + 1.5 * u(rng);
        std::vector<double> g(static_cast<std::size_t>(k));
        g[0] = 1.0;
        for (std::size_t j = 1; j < g.size(); ++j) g[j] = 0.05 + 1.5 * u(rng);
        const auto grad = power_sum_gradient(expansion, n, GVector(g));
        double scale = std::abs(grad.d_mean_n);
        for (double d : grad.d_g) scale = std::max(scale, std::abs(d));

        const double hn = 1e-6 * n;
        const double fd_n =
            (evaluate_power_sum(expansion, n + hn, GVector(g)) - evaluate_power_sum(expansion, n - hn, GVector(g))) /
            (2 * hn);
        worst_delta = std::max(worst_delta, relative_gap(grad.d_mean_n, fd_n, scale));
        for (int j = 2; j <= k; ++j) {
            auto up = g;
            auto down = g;
            const auto slot = static_cast<std::size_t>(j - 1);
            const double h = 1e-6 * g[slot];
            up[slot] += h;
            down[slot] -= h;
            const double fd =
                (evaluate_power_sum(expansion, n, GVector(up)) - evaluate_power_sum(expansion, n, GVector(down))) /
                (2 * h);
            worst_delta = std::max(worst_delta, relative_gap(grad.d_g[static_cast<std::size_t>(j)], fd, scale));
        }

        const GaussianParams gp{0.05 + u(rng), -300 + 600 * u(rng), 150 + 500 * u(rng), -0.05 + 0.1 * u(rng)};
        const TwoPeakParams tp{0.05 + u(rng), 0.05 + u(rng), -300 + 250 * u(rng), 50 + 250 * u(rng),
                               150 + 400 * u(rng), 0.05 * u(rng)};
        const double x = -600 + 1200 * u(rng);

        const auto jg = gaussian_jacobian(gp, x);
        double jg_scale = 0.0;
        for (double v : jg) jg_scale = std::max(jg_scale, std::abs(v));
        for (std::size_t j = 0; j < 4; ++j) {
            GaussianParams plus = gp;
            GaussianParams minus = gp;
            double* pf[] = {&plus.amplitude, &plus.center, &plus.fwhm, &plus.offset};
            double* mf[] = {&minus.amplitude, &minus.center, &minus.fwhm, &minus.offset};
            const double h = 1e-6 * std::max(std::abs(*pf[j]), 1.0);
            *pf[j] += h;
            *mf[j] -= h;
            const double fd = (gaussian_model(plus, x) - gaussian_model(minus, x)) / (2 * h);
            worst_jacobian = std::max(worst_jacobian, relative_gap(jg[j], fd, jg_scale));
        }
        const auto jt = two_gaussian_jacobian(tp, x);
        double jt_scale = 0.0;
        for (double v : jt) jt_scale = std::max(jt_scale, std::abs(v));
        for (std::size_t j = 0; j < 6; ++j) {
            TwoPeakParams plus = tp;
            TwoPeakParams minus = tp;
            double* pf[] = {&plus.amplitude1, &plus.amplitude2, &plus.center1, &plus.center2, &plus.fwhm, &plus.offset};
            double* mf[] = {&minus.amplitude1, &minus.amplitude2, &minus.center1, &minus.center2, &minus.fwhm,
                            &minus.offset};
            const double h = 1e-6 * std::max(std::abs(*pf[j]), 1.0);
            *pf[j] += h;
            *mf[j] -= h;
            const double fd = (two_gaussian_model(plus, x) - two_gaussian_model(minus, x)) / (2 * h);
            worst_jacobian = std::max(worst_jacobian, relative_gap(jt[j], fd, jt_scale));
        }
    }
    return {worst_delta <= 1e-6 && worst_jacobian <= 1e-6,
            format("100 points each: delta-method worst %.2e, least-squares Jacobian worst %.2e (limit 1e-6)",
                   worst_delta, worst_jacobian)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "coefficient table k=2..5", 1.0, coefficient_table},
        {2, "brute-force oracle equivalence", 30.0, oracle_equivalence},
        {3, "exact sqrt(k) narrowing", 60.0, exact_narrowing},
        {4, "Monte Carlo narrowing", 300.0, monte_carlo_narrowing},
        {5, "two-emitter resolution", 900.0, two_emitter_resolution},
        {6, "estimator statistics", 300.0, estimator_scaling},
        {7, "detector tree correctness", std::nullopt, tree_correctness},
        {8, "determinism", std::nullopt, determinism},
        {9, "gradient and Jacobian checks", std::nullopt, derivative_checks},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s && seconds > *c.budget_s) {
            outcome.pass = false;
            outcome.detail += format("; runtime %.1f s over budget %.0f s", seconds, *c.budget_s);
        }
        failures += outcome.pass ? 0 : 1;
        std::printf("%s  [%d] %s (%.2f s): %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), seconds,
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
