#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "contra/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("contra_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(std::initializer_list<std::string> args) {
    return contra::cli::run(std::vector<std::string>(args));
}

const char* kConfig = R"({
  "version": 1,
  "seed": 42,
  "alpha": 0.1,
  "method": "contra",
  "dataset": {"generator": "mixture", "n": 400, "seed": 7},
  "split": {"train": 250, "cal": 100, "test": 50, "seed": 3},
  "flow": {"layers": 2, "hidden": 8, "epochs": 3, "batch": 128},
  "predict": {"levels": [0.5, 0.9], "boundary_points": 32, "volume_b": 200, "samples": 20}
})";

}  // namespace

TEST_CASE("cli pipeline: generate, train, calibrate, predict, diagnose") {
    TempDir dir;
    const std::string cfg = dir.file("config.json");
    write_file(cfg, kConfig);

    // generate twice: byte-identical CSVs
    REQUIRE(run_cli({"generate", "-c", cfg, "-o", dir.file("data_a.csv")}) == 0);
    REQUIRE(run_cli({"generate", "-c", cfg, "-o", dir.file("data_b.csv")}) == 0);
    CHECK(read_file(dir.file("data_a.csv")) == read_file(dir.file("data_b.csv")));

    REQUIRE(run_cli({"train", "-c", cfg, "-o", dir.file("model.json")}) == 0);
    CHECK(fs::exists(dir.file("model.json")));
    CHECK(fs::exists(dir.file("model.json.loss.csv")));

    REQUIRE(run_cli({"calibrate", "-c", cfg, "-m", dir.file("model.json"), "-o",
                     dir.file("pred.json")}) == 0);
    CHECK(fs::exists(dir.file("pred.json")));
    CHECK(fs::exists(dir.file("pred.json.diagnostics.json")));

    REQUIRE(run_cli({"predict", "-c", cfg, "-P", dir.file("pred.json"), "-x", "-2.0,-1.5",
                     "-y", "7.0,8.0", "-o", dir.file("out")}) == 0);
    CHECK(fs::exists(dir.file("out/boundary_0.csv")));
    CHECK(fs::exists(dir.file("out/volume_0.json")));
    CHECK(fs::exists(dir.file("out/membership_0.json")));
    CHECK(fs::exists(dir.file("out/region_0.svg")));

    // One closed path per requested level.
    const std::string svg = read_file(dir.file("out/region_0.svg"));
    std::size_t paths = 0, pos = 0;
    while ((pos = svg.find("<path", pos)) != std::string::npos) {
        ++paths;
        pos += 5;
    }
    CHECK(paths == 2);
    CHECK(svg.find(" Z\"") != std::string::npos);

    REQUIRE(run_cli({"diagnose", "-P", dir.file("pred.json"), "-o",
                     dir.file("diag.json")}) == 0);
    CHECK(read_file(dir.file("diag.json")).find("flag") != std::string::npos);
}

TEST_CASE("cli eval writes report files") {
    TempDir dir;
    const std::string cfg = dir.file("config.json");
    write_file(cfg, R"({
  "version": 1,
  "seed": 11,
  "alpha": 0.1,
  "dataset": {"generator": "mixture", "n": 300, "seed": 5},
  "split": {"train": 180, "cal": 80, "test": 40, "seed": 2},
  "flow": {"layers": 2, "hidden": 8, "epochs": 2},
  "quantile": {"hidden": 8, "epochs": 2},
  "eval": {"methods": ["contra", "rcp"], "replications": 2, "volume_b": 150, "volume_points": 5}
})");
    REQUIRE(run_cli({"eval", "-c", cfg, "-o", dir.file("report")}) == 0);
    CHECK(fs::exists(dir.file("report/replications.csv")));
    CHECK(fs::exists(dir.file("report/summary.json")));
    CHECK(fs::exists(dir.file("report/table.txt")));
    const std::string csv = read_file(dir.file("report/replications.csv"));
    CHECK(csv.find("contra") != std::string::npos);
    CHECK(csv.find("rcp") != std::string::npos);
}

TEST_CASE("cli rejects unknown config keys with the config exit code") {
    TempDir dir;
    const std::string cfg = dir.file("bad.json");
    write_file(cfg, R"({"version": 1, "seed": 1, "tpyo_key": true})");
    CHECK(run_cli({"generate", "-c", cfg, "-o", dir.file("x.csv")}) == contra::cli::kExitConfig);

    write_file(cfg, R"({"version": 2, "seed": 1})");
    CHECK(run_cli({"generate", "-c", cfg, "-o", dir.file("x.csv")}) == contra::cli::kExitConfig);
}

TEST_CASE("cli reports missing files with the data exit code") {
    TempDir dir;
    CHECK(run_cli({"generate", "-c", dir.file("nope.json"), "-o", dir.file("x.csv")}) ==
          contra::cli::kExitData);

    const std::string cfg = dir.file("csvcfg.json");
    write_file(cfg, R"({
  "version": 1, "seed": 1,
  "dataset": {"csv": ")" + dir.file("missing.csv") + R"(", "p": 2, "q": 2},
  "split": {"train": 10, "cal": 5, "test": 5}
})");
    CHECK(run_cli({"train", "-c", cfg, "-o", dir.file("m.json")}) == contra::cli::kExitData);
}

TEST_CASE("cli mcqr and rcp paths produce region and volume files") {
    TempDir dir;
    const std::string cfg = dir.file("config.json");
    write_file(cfg, R"({
  "version": 1,
  "seed": 9,
  "alpha": 0.1,
  "method": "mcqr",
  "dataset": {"generator": "mixture", "n": 300, "seed": 5},
  "split": {"train": 180, "cal": 80, "test": 40, "seed": 2},
  "quantile": {"hidden": 8, "epochs": 2}
})");
    REQUIRE(run_cli({"train", "-c", cfg, "-o", dir.file("mq.json")}) == 0);
    REQUIRE(run_cli({"calibrate", "-c", cfg, "-m", dir.file("mq.json"), "-o",
                     dir.file("mqp.json")}) == 0);
    REQUIRE(run_cli({"predict", "-c", cfg, "-P", dir.file("mqp.json"), "-x", "-2.0,-1.5",
                     "-o", dir.file("mq_out")}) == 0);
    const std::string box = read_file(dir.file("mq_out/region_0.json"));
    CHECK(box.find("lower") != std::string::npos);
    CHECK(box.find("volume") != std::string::npos);

    const std::string rcp_cfg = dir.file("rcp.json");
    write_file(rcp_cfg, R"({
  "version": 1,
  "seed": 9,
  "alpha": 0.1,
  "method": "rcp",
  "dataset": {"generator": "mixture", "n": 300, "seed": 5},
  "split": {"train": 180, "cal": 80, "test": 40, "seed": 2},
  "ridge": {"ridge": 0.01}
})");
    REQUIRE(run_cli({"train", "-c", rcp_cfg, "-o", dir.file("rcp_m.json")}) == 0);
    REQUIRE(run_cli({"calibrate", "-c", rcp_cfg, "-m", dir.file("rcp_m.json"), "-o",
                     dir.file("rcp_p.json")}) == 0);
    REQUIRE(run_cli({"predict", "-c", rcp_cfg, "-P", dir.file("rcp_p.json"), "-x",
                     "-2.0,-1.5", "-o", dir.file("rcp_out")}) == 0);
    CHECK(fs::exists(dir.file("rcp_out/volume_0.json")));
    CHECK(fs::exists(dir.file("rcp_out/boundary_0.csv")));
}
