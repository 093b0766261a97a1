#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floqskin/csv.hpp"
#include "floqskin/harness.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace floqskin;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("floqskin_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("numbers carry 12 significant digits") {
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(-2.5e-9) == "-2.5e-09");
    CHECK(format_number(100.0) == "100");
}

TEST_CASE("csv rows must match the header") {
    const auto dir = scratch("csv");
    fs::create_directories(dir);
    {
        CsvWriter w(dir / "a.csv", {"x", "y"});
        w.row({1.0, 2.0});
        w.cell(3.0);
        CHECK_THROWS_AS(w.end_row(), ConfigError);
    }
    CHECK(slurp(dir / "a.csv").rfind("x,y\n1,2\n", 0) == 0);
}

TEST_CASE("config parsing rejects unknown keys and bad knobs") {
    CHECK_NOTHROW(config_from_json({{"experiment", "bands"}}));
    CHECK_THROWS_AS(config_from_json({{"experiment", "bands"}, {"colour", 1}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", ""}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "dance"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "bands"}, {"knobs", {{"n_q", 3}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "bands"}, {"knobs", {{"n_k", 2}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "bands"}, {"knobs", {{"n_k", 10.5}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "skin"}, {"knobs", {{"filter", "some"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "evolve"}, {"knobs", {{"init", {{"kind", "box"}}}}}}),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "evolve"}, {"knobs", {{"init", {{"x0", 400}}}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "phi-scan"}}), WrongModel);
    CHECK_THROWS_AS(config_from_json({{"experiment", "bands"}, {"model", {{"flux", {{"real", 0.3}}}}}}),
                    UnsupportedRepresentation);
    const auto c = config_from_json({{"experiment", "decay"}});
    CHECK(c.knobs["n_periods"] == 300);
    CHECK(c.knobs["sub_period"] == true);
}

TEST_CASE("overrides follow dotted paths") {
    json doc{{"experiment", "bands"}};
    apply_override(doc, "model.omega=1.2");
    apply_override(doc, "knobs.n_k=101");
    apply_override(doc, "model.boundary=OBC");
    CHECK(doc["model"]["omega"] == 1.2);
    CHECK(doc["knobs"]["n_k"] == 101);
    CHECK(doc["model"]["boundary"] == "OBC");
    CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "experiment.x=1"), ConfigError);
}

TEST_CASE("hash ignores key order") {
    const auto a = json::parse(R"({"experiment":"bands","model":{"u":1,"v":2}})");
    const auto b = json::parse(R"({"model":{"v":2,"u":1},"experiment":"bands"})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(json::parse(R"({"experiment":"bands"})")));
}

TEST_CASE("preset catalog") {
    std::set<std::string> names;
    for (const auto& p : list_presets()) {
        names.insert(p.name);
        CHECK(!p.steps.empty());
        for (auto s : p.steps) CHECK_NOTHROW(s.validate());
    }
    for (const char* n : {"fig1c", "fig1d", "fig1e", "fig1f", "fig2", "fig3", "figS0", "figS2", "figS3",
                          "incomm-half", "figR1"})
        CHECK(names.count(n) == 1);
    const auto* fig3 = find_preset("fig3");
    REQUIRE(fig3);
    CHECK(fig3->steps[0].model.gamma[0] == -1.2);
    CHECK(fig3->steps[0].model.period() == doctest::Approx(5.0 * pi));
    const auto* r1 = find_preset("figR1");
    REQUIRE(r1);
    CHECK(r1->steps[0].knobs["omegas"] == json::array({0.4, 1.2}));
    CHECK(find_preset("fig9") == nullptr);
}

TEST_CASE("runs are complete, listed and deterministic") {
    auto cfg = config_from_json(
        {{"experiment", "bands"}, {"knobs", {{"n_k", 21}, {"n_steps", 40}}}, {"model", {{"n_cells", 10}}}});
    const auto a = scratch("run_a"), b = scratch("run_b");
    const auto m = run({cfg}, a);
    run({cfg}, b);
    std::set<std::string> on_disk;
    for (const auto& e : fs::directory_iterator(a)) on_disk.insert(e.path().filename().string());
    CHECK(on_disk == std::set<std::string>(m.files.begin(), m.files.end()));
    CHECK(on_disk.count("manifest.json") == 1);
    CHECK(slurp(a / "bands.csv") == slurp(b / "bands.csv"));
    CHECK(slurp(a / "bands.csv").rfind("k,band,re,im,velocity\n", 0) == 0);
    const auto manifest = json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["config_hash"] == m.config_hash);
    CHECK(manifest["convergence"].contains("bands"));
    CHECK_THROWS_AS(run({cfg}, a), ConfigError);
}

TEST_CASE("module errors name the experiment; partial output has no manifest") {
    auto cfg = config_from_json({{"experiment", "symmetry-check"}, {"knobs", {{"n_steps", 41}}}});
    const auto dir = scratch("run_err");
    try {
        run({cfg}, dir);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("symmetry-check") != std::string::npos);
        CHECK(std::string(e.what()).find("n_steps") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(dir / "manifest.json"));
}
