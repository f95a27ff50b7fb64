#include "doctest.h"
#include "helpers.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "mwreg/volume_io.hpp"

using testing_util::TempDir;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args)
{
    const std::string cmd = std::string(MWREG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

const char* kSpec = R"({
  "seed": 3, "num_samples": 2, "dims": [12, 12, 12], "spacing": [5, 5, 5],
  "deformation_mm": 4, "control_spacing_mm": 25,
  "classes": [
    {"id": 0, "name": "background", "intensity": 0.5},
    {"id": 1, "name": "blob", "transform": "inverted", "intensity": 0.9}
  ],
  "structures": [{"class": 1, "center": [28, 28, 28], "radii": [14, 12, 13]}]
})";

const char* kFastConfig = R"({
  "pyramid_levels": 1, "refine_steps": 2, "labels_per_axis": 3, "grid_spacing_mm": 20,
  "hyperparams": {"max_outer": 2, "max_inner": 3}
})";

} // namespace

TEST_CASE("synth is deterministic and rejects bad specs")
{
    TempDir dir("mwreg_cli_synth");
    put(dir / "spec.json", kSpec);
    const std::string spec = (dir / "spec.json").string();
    REQUIRE(run("synth --spec " + spec + " --out " + (dir / "a").string()) == 0);
    REQUIRE(run("synth --spec " + spec + " --out " + (dir / "b").string()) == 0);
    for (const char* f : {"pair000_source.vvol", "pair001_target.vvol", "pair001_target_seg.vvol", "pair000_truth.vvol"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(fs::exists(dir / "a" / "manifest.json"));

    put(dir / "bad.json", R"({"classes": [{"id": 0}], "noise_sigma": -1})");
    CHECK(run("synth --spec " + (dir / "bad.json").string() + " --out " + (dir / "c").string()) == 2);
    put(dir / "broken.json", "{ not json");
    CHECK(run("synth --spec " + (dir / "broken.json").string() + " --out " + (dir / "c").string()) == 2);
}

TEST_CASE("train, register and evaluate end to end")
{
    TempDir dir("mwreg_cli_e2e");
    put(dir / "spec.json", kSpec);
    put(dir / "fast.json", kFastConfig);
    const std::string data = (dir / "data").string(), cfg = " --config " + (dir / "fast.json").string();
    REQUIRE(run("synth --spec " + (dir / "spec.json").string() + " --out " + data) == 0);
    const std::string manifest = (dir / "data" / "manifest.json").string();

    REQUIRE(run("train --manifest " + manifest + " --class all --out " + (dir / "w.json").string() + " --report " +
                (dir / "r.jsonl").string() + cfg) == 0);
    const auto w = nlohmann::json::parse(slurp(dir / "w.json"));
    CHECK(w.size() == 2);
    CHECK(w["1"]["metric_weights"].size() == 4);
    CHECK(w["1"]["pairwise_weight"].get<double>() >= 0.0);
    std::istringstream report(slurp(dir / "r.jsonl"));
    std::string line;
    std::getline(report, line);
    CHECK(nlohmann::json::parse(line).contains("header"));

    REQUIRE(run("evaluate --manifest " + manifest + " --weights " + (dir / "w.json").string() + " --csv " +
                (dir / "e.csv").string() + " --svg " + (dir / "e.svg").string() + cfg) == 0);
    std::istringstream csv(slurp(dir / "e.csv"));
    std::getline(csv, line);
    CHECK(line == "pair_id,class,sad,mi,ncc,dwt,mw");
    // Foreground classes only: two pair rows and one mean row.
    std::vector<std::string> rows;
    while (std::getline(csv, line))
        if (!line.empty())
            rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].rfind("pair000,1,", 0) == 0);
    CHECK(rows[2].rfind("mean,1,", 0) == 0);
    CHECK(slurp(dir / "e.svg").find("<svg") != std::string::npos);

    const std::string pair = " --source " + data + "/pair000_source.vvol --target " + data + "/pair000_target.vvol";
    const std::string out = (dir / "reg").string();
    CHECK(run("register" + pair + " --source-seg " + data + "/pair000_source_seg.vvol --weights " +
              (dir / "w.json").string() + " --out " + out + cfg) == 0);
    CHECK(fs::exists(dir / "reg" / "field.vvol"));
    CHECK(fs::exists(dir / "reg" / "warped_seg.vvol"));
    CHECK(nlohmann::json::parse(slurp(dir / "reg" / "trace.json")).is_object());

    // A single-column weight file works for any segmentation.
    put(dir / "one.json", R"({"0": {"metric_weights": [0, 1, 0, 0], "pairwise_weight": 0.1}})");
    CHECK(run("register" + pair + " --source-seg " + data + "/pair000_source_seg.vvol --weights " +
              (dir / "one.json").string() + " --out " + (dir / "reg1").string() + cfg) == 0);
    CHECK(run("register" + pair + " --metric ncc --out " + (dir / "reg2").string() + cfg) == 0);
    CHECK(mwreg::load_field(dir / "reg2" / "field.vvol").geometry() == mwreg::load_volume(data + "/pair000_target.vvol").geometry());
}

TEST_CASE("error exit codes")
{
    TempDir dir("mwreg_cli_err");
    put(dir / "spec.json", kSpec);
    const std::string data = (dir / "data").string();
    REQUIRE(run("synth --spec " + (dir / "spec.json").string() + " --out " + data) == 0);

    // Geometry mismatch.
    mwreg::save_native(dir / "small.vvol", testing_util::random_volume(testing_util::geom(6, 6, 6, 5.0), 1));
    CHECK(run("register --source " + (dir / "small.vvol").string() + " --target " + data +
              "/pair000_target.vvol --metric sad --out " + (dir / "x").string()) == 4);

    // Missing pair files and empty manifests.
    put(dir / "w.json", R"({"0": {"metric_weights": [1, 1, 1, 1], "pairwise_weight": 0.1},
                            "1": {"metric_weights": [1, 1, 1, 1], "pairwise_weight": 0.1}})");
    fs::remove(dir / "data" / "pair001_target.vvol");
    const std::string ev = " --weights " + (dir / "w.json").string() + " --csv " + (dir / "e.csv").string();
    CHECK(run("evaluate --manifest " + data + "/manifest.json" + ev) == 5);
    CHECK(run("evaluate --manifest " + (dir / "nope.json").string() + ev) == 5);

    // Generic failures.
    CHECK(run("register --source " + data + "/pair000_source.vvol --target " + data +
              "/pair000_target.vvol --metric ssd --out " + (dir / "y").string()) == 1);
    CHECK(run("register --source " + data + "/pair000_source.vvol --target " + data +
              "/pair000_target.vvol --weights " + (dir / "w.json").string() + " --out " + (dir / "y").string()) == 1);
    CHECK(run("") != 0);
}
