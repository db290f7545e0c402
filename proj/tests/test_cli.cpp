#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "commands.hpp"

namespace fs = std::filesystem;
using namespace rydcav;
using nlohmann::json;

namespace {

// Reduced grids so the whole suite runs in seconds.
ExperimentConfig small_config() {
    ExperimentConfig c;
    c.electrostatics.grid_points = 33;
    c.electrostatics.voltages_v = {0.0, 62.5, 125.0};
    c.rydberg.time_points = 101;
    c.rydberg.max_group_size = 2;
    c.detection.n_records = 20000;
    c.holography.grid_size = 64;
    c.holography.spot_rows = 3;
    c.holography.spot_cols = 3;
    c.holography.spot_pitch = 6;
    c.holography.center_row = 32;
    c.holography.center_col = 32;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::current_path() / "cli_test_out" / name;
    fs::remove_all(d);
    return d;
}

// Every file of run a equals run b byte for byte; manifests only differ in
// label and wall time.
void check_same_outputs(const fs::path& a, const fs::path& b) {
    REQUIRE(fs::exists(a / "manifest.json"));
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        REQUIRE_MESSAGE(fs::exists(b / name), name.string());
        if (name == "manifest.json") {
            json ma = read_json(a / name), mb = read_json(b / name);
            for (auto* m : {&ma, &mb}) {
                m->erase("wall_time_s");
                m->erase("label");
            }
            CHECK(ma == mb);
        } else {
            CHECK_MESSAGE(slurp(e.path()) == slurp(b / name), name.string());
        }
    }
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(RYDCAV_TOOL) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("every command is byte-identical across runs and on replay") {
    const fs::path root = fresh_dir("determinism");
    cli::RunRequest req;
    req.command = "all";
    req.config = small_config();
    req.config.rng_seed = 77;
    req.out_root = root;
    req.label = "first";
    const auto first = cli::run_command(req);
    req.label = "second";
    const auto second = cli::run_command(req);
    REQUIRE(first.run_dirs.size() == cli::command_names().size());
    CHECK(first.exit_code == 0);
    CHECK(second.exit_code == 0);
    for (std::size_t i = 0; i < first.run_dirs.size(); ++i) check_same_outputs(first.run_dirs[i], second.run_dirs[i]);

    for (const auto& dir : first.run_dirs) {
        const json m = read_json(dir / "manifest.json");
        CHECK(m.at("seed") == 77);
        CHECK(m.at("toolkit_version") == cli::kToolkitVersion);
        CHECK(m.at("ok") == true);
        CHECK(m.contains("wall_time_s"));
        for (const auto& f : m.at("outputs")) CHECK(fs::exists(dir / f.get<std::string>()));
        auto replay = cli::request_from_manifest(m);
        replay.out_root = root;
        replay.label = "replayed";
        const auto rep = cli::run_command(replay);
        REQUIRE(rep.run_dirs.size() == 1);
        check_same_outputs(dir, rep.run_dirs[0]);
    }
}

TEST_CASE("a different seed changes the stochastic outputs") {
    const fs::path root = fresh_dir("seeds");
    cli::RunRequest req;
    req.command = "detection-stats";
    req.config = small_config();
    req.out_root = root;
    req.label = "s1";
    const auto a = cli::run_command(req);
    req.config.rng_seed = 2;
    req.label = "s2";
    const auto b = cli::run_command(req);
    CHECK(slurp(a.run_dirs[0] / "detection_stats.json") != slurp(b.run_dirs[0] / "detection_stats.json"));
}

TEST_CASE("spectrum: zero atoms give no shift, doubled atoms double it") {
    const fs::path dir = fresh_dir("spectrum");
    auto measure = [&](double n, const std::string& sub) {
        auto cfg = small_config();
        cfg.spectrum.n_atoms = n;
        fs::create_directories(dir / sub);
        const auto out = cli::cmd_cavity_spectrum(cfg, dir / sub);
        REQUIRE(out.ok);
        return std::pair{out.summary.at("measured_shift_hz").get<double>(),
                         out.summary.at("measured_shift_sigma_hz").get<double>()};
    };
    const auto [s0, e0] = measure(0.0, "zero");
    CHECK(std::abs(s0) < 3.0 * e0);
    const auto [s1, e1] = measure(23.3, "one");
    const auto [s2, e2] = measure(46.6, "two");
    const double ratio = s2 / s1;
    const double ratio_sigma = ratio * std::hypot(e1 / s1, e2 / s2);
    CHECK(std::abs(ratio - 2.0) < 3.0 * ratio_sigma);
    CHECK(s1 == doctest::Approx(206.8e3).epsilon(0.15));
}

TEST_CASE("stark sweep: zero volts give zero shift") {
    const fs::path dir = fresh_dir("stark");
    fs::create_directories(dir);
    const auto out = cli::cmd_stark_sweep(small_config(), dir);
    REQUIRE(out.ok);
    std::ifstream in(dir / "stark_sweep.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "voltage_v,e_unshielded_v_per_m,shift_unshielded_hz,e_shielded_v_per_m,shift_shielded_hz");
    CHECK(first == "0,0,0,0,0");
}

TEST_CASE("holography: single spot is perfectly uniform") {
    const fs::path dir = fresh_dir("holo");
    fs::create_directories(dir);
    auto cfg = small_config();
    cfg.holography.spot_rows = 1;
    cfg.holography.spot_cols = 1;
    const auto out = cli::cmd_holography(cfg, dir);
    CHECK(out.summary.at("uniformity").get<double>() == 1.0);
    CHECK(fs::file_size(dir / "mask.pgm") > 64 * 64 * 2);
}

TEST_CASE("solver trouble sets a nonzero exit code") {
    cli::RunRequest req;
    req.command = "stark-sweep";
    req.config = small_config();
    req.config.electrostatics.max_iters = 5;
    req.out_root = fresh_dir("flagged");
    req.label = "x";
    const auto rep = cli::run_command(req);
    CHECK(rep.exit_code == 1);
    const json m = read_json(rep.run_dirs[0] / "manifest.json");
    CHECK(m.at("ok") == false);
    CHECK_FALSE(m.at("flags").empty());
}

TEST_CASE("command-line front end") {
    const fs::path dir = fresh_dir("tool");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "bad.json") << R"({"cavity": {"length_mm": -1}})";
        std::ofstream(dir / "typo.json") << R"({"cavity": {"kapa_mhz": 1}})";
        std::ofstream(dir / "broken.json") << "{ not json";
        json small = to_json(small_config());
        std::ofstream(dir / "small.json") << small.dump(2);
    }
    CHECK(run_tool("defaults") == 0);
    CHECK(run_tool("validate " + (dir / "small.json").string()) == 0);
    CHECK(run_tool("validate " + (dir / "bad.json").string()) == 2);
    CHECK(run_tool("validate " + (dir / "typo.json").string()) == 2);
    CHECK(run_tool("validate " + (dir / "broken.json").string()) == 2);
    CHECK(run_tool("holography --config " + (dir / "bad.json").string()) == 2);
    CHECK(run_tool("no-such-command") != 0);

    const std::string common = " --config " + (dir / "small.json").string() + " --out " + (dir / "out").string();
    REQUIRE(run_tool("holography --seed 5 --label one --threads 1" + common) == 0);
    REQUIRE(run_tool("holography --seed 5 --label two" + common) == 0);
    check_same_outputs(dir / "out/holography/one", dir / "out/holography/two");
    CHECK(read_json(dir / "out/holography/one/manifest.json").at("seed") == 5);
    REQUIRE(run_tool("replay " + (dir / "out/holography/one/manifest.json").string() + " --label three --out " +
                     (dir / "out").string()) == 0);
    check_same_outputs(dir / "out/holography/one", dir / "out/holography/three");
    // unlabeled runs land in a timestamped directory
    REQUIRE(run_tool("detection-stats" + common) == 0);
    CHECK(std::distance(fs::directory_iterator(dir / "out/detection-stats"), fs::directory_iterator{}) == 1);
}

TEST_CASE("manifest config carries the resolved defaults") {
    auto parsed = parse_config(json::object());
    REQUIRE(parsed.ok());
    cli::RunRequest req;
    req.command = "holography";
    req.config = small_config();
    req.defaults_applied = parsed.defaults_applied;
    req.out_root = fresh_dir("defaults");
    req.label = "d";
    const auto rep = cli::run_command(req);
    const json m = read_json(rep.run_dirs[0] / "manifest.json");
    CHECK(m.at("metadata").at("defaults_applied").size() == parsed.defaults_applied.size());
    CHECK(m.at("metadata").at("gamma_e_hz") == 6.065e6);
    auto back = parse_config(m.at("config"));
    REQUIRE(back.ok());
    CHECK(to_json(*back.config) == m.at("config"));
    CHECK_THROWS(cli::request_from_manifest(json{{"command", "holography"}, {"seed", 1}, {"config", {{"x", 1}}}}));
}
