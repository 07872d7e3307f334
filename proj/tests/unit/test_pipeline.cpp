#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/error.hpp"
#include "common/io.hpp"
#include "pipeline/config.hpp"
#include "pipeline/manifest.hpp"
#include "pipeline/stages.hpp"
#include "pipeline/tables.hpp"

using namespace gbias;
using namespace gbias::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kData = GB_TEST_DATA_DIR;

nlohmann::json example_json() {
  return nlohmann::json::parse(read_text_file((kData / "example.config.json").string()), nullptr, true, true);
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

Config example_config(const fs::path& run_dir, Overrides ov = {}) {
  ov.run_dir = run_dir.string();
  return parse_config(example_json(), kData, ov);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("example config parses") {
    auto c = parse_config(example_json(), kData);
    CHECK(c.seed == 20240601);
    CHECK(c.backends.size() == 2);
    CHECK(c.backends[0].name == "mock-a");
    CHECK(c.chat_backends.size() == 1);
    CHECK(c.apx_direction == apx::Direction::AsPrinted);
    CHECK(c.surface.alpha == doctest::Approx(0.01));
    CHECK(c.run_id.size() == 16);
  }

  TEST_CASE("config errors are validation failures") {
    auto j = example_json();
    j["colour"] = "blue";
    CHECK(code_of([&] { parse_config(j, kData); }) == ErrorCode::Validation);

    j = example_json();
    j.erase("seed");
    CHECK(message_of([&] { parse_config(j, kData); }).find("seed") != std::string::npos);

    j = example_json();
    j["seed"] = -3;
    CHECK(code_of([&] { parse_config(j, kData); }) == ErrorCode::Validation);

    j = example_json();
    j["inputs"]["names"] = "no_such_file.csv";
    CHECK(message_of([&] { parse_config(j, kData); }).find("no_such_file.csv") != std::string::npos);

    j = example_json();
    j["names_mode"] = "loose";
    CHECK(code_of([&] { parse_config(j, kData); }) == ErrorCode::Validation);

    j = example_json();
    j["report"]["format"] = "xml";
    CHECK(message_of([&] { parse_config(j, kData); }).find("xml") != std::string::npos);

    j = example_json();
    j["surface"]["alpha"] = 0.7;
    CHECK(code_of([&] { parse_config(j, kData); }) == ErrorCode::Validation);

    j = example_json();
    j["backends"]["mock-a"]["kind"] = "telepathy";
    CHECK(code_of([&] { parse_config(j, kData); }) == ErrorCode::Validation);
  }

  TEST_CASE("missing config file and broken JSON") {
    CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == ErrorCode::Io);
    auto d = fresh_dir("gb_test_pipeline_badjson");
    fs::create_directories(d);
    write_file_atomic(d / "c.json", "{ \"seed\": ");
    CHECK(code_of([&] { load_config(d / "c.json"); }) == ErrorCode::Parse);
  }

  TEST_CASE("comments are accepted") {
    auto c = load_config(kData / "example.config.json");
    CHECK(c.inputs.names.filename() == "names.example.csv");
  }

  TEST_CASE("run id ignores run_dir but follows every knob") {
    auto a = example_config("/tmp/somewhere");
    auto b = example_config("/var/elsewhere");
    CHECK(a.run_id == b.run_id);

    Overrides ov;
    ov.seed = 7;
    CHECK(example_config("/tmp/x", ov).run_id != a.run_id);
    Overrides ov2;
    ov2.alpha = 0.05;
    CHECK(example_config("/tmp/x", ov2).run_id != a.run_id);
    Overrides ov3;
    ov3.apx_direction = "inverse";
    auto inv = example_config("/tmp/x", ov3);
    CHECK(inv.apx_direction == apx::Direction::Inverse);
    CHECK(inv.run_id != a.run_id);
  }

  TEST_CASE("backend filter keeps one backend") {
    Overrides ov;
    ov.backend = "mock-confounded";
    auto c = example_config("/tmp/x", ov);
    REQUIRE(c.backends.size() == 1);
    CHECK(c.backends[0].name == "mock-confounded");
    ov.backend = "nobody";
    CHECK(code_of([&] { example_config("/tmp/x", ov); }) == ErrorCode::Validation);
  }
}

TEST_SUITE("stages") {
  TEST_CASE("a stage without its inputs names the stage to run") {
    auto c = example_config(fresh_dir("gb_test_pipeline_missing"));
    CHECK(message_of([&] { run_stage("apx", c); }).find("'expand'") != std::string::npos);
    run_stage("expand", c);
    CHECK(message_of([&] { run_stage("apx", c); }).find("'score'") != std::string::npos);
    CHECK(code_of([&] { run_stage("apx", c); }) == ErrorCode::MissingArtifact);
    CHECK(code_of([&] { run_stage("validate", c); }) == ErrorCode::MissingArtifact);
    CHECK(code_of([&] { run_stage("analyze", c); }) == ErrorCode::MissingArtifact);
    CHECK(code_of([&] { run_stage("bake", c); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("full run writes a relocatable manifest and all report tables") {
    auto dir = fresh_dir("gb_test_pipeline_full");
    auto c = example_config(dir);
    for (const char* s : {"expand", "score", "apx", "validate", "surface", "generate", "analyze", "jsd", "report"})
      run_stage(s, c);

    auto text = read_text_file((dir / kManifestFile).string());
    CHECK(text.find(dir.string()) == std::string::npos);
    CHECK(text.find(kData.string()) == std::string::npos);
    auto m = read_manifest(c);
    CHECK(m["run_id"] == c.run_id);
    std::vector<std::string> order;
    for (const auto& [k, v] : m["stages"].items()) order.push_back(k);
    std::vector<std::string> expected = {"expand", "score", "apx", "validate", "surface",
                                         "generate", "analyze", "jsd", "report"};
    CHECK(order == expected);
    CHECK(m["stages"]["expand"]["counts"]["sentences"] == 80 * 10 * 3);

    for (const char* f : {"validation.csv", "accuracy.csv", "jsd.csv", "surfaced_mock-a.csv", "report.json",
                          "elimination_ethnicity.csv"})
      CHECK_MESSAGE(fs::exists(dir / "report" / f), f);

    auto acc = read_text_file((dir / "report/accuracy.csv").string());
    CHECK(acc.rfind("model,gender_ethnicity,ethnicity,gender\nChance Level,", 0) == 0);

    // no temporary files survive the atomic writes
    for (const auto& e : fs::recursive_directory_iterator(dir))
      CHECK_MESSAGE(e.path().filename().string().find(".tmp") == std::string::npos, e.path().string());
  }

  TEST_CASE("report format selects the outputs") {
    auto dir = fresh_dir("gb_test_pipeline_format");
    Overrides ov;
    ov.format = "csv";
    auto c = example_config(dir, ov);
    c.report_sections = {"validation"};
    run_stage("expand", c);
    run_stage("score", c);
    run_stage("apx", c);
    run_stage("validate", c);
    run_stage("report", c);
    CHECK(fs::exists(dir / "report/validation.csv"));
    CHECK_FALSE(fs::exists(dir / "report/report.json"));

    fs::remove_all(dir / "report");
    c.report_format = "json";
    run_stage("report", c);
    CHECK_FALSE(fs::exists(dir / "report/validation.csv"));
    REQUIRE(fs::exists(dir / "report/report.json"));
    auto doc = nlohmann::json::parse(read_text_file((dir / "report/report.json").string()));
    CHECK(doc["tables"]["validation"].size() == 2);

    c.report_format = "yaml";
    CHECK(code_of([&] { run_stage("report", c); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("rerunning a stage leaves its artifacts unchanged") {
    auto dir = fresh_dir("gb_test_pipeline_rerun");
    auto c = example_config(dir);
    run_stage("expand", c);
    run_stage("score", c);
    run_stage("apx", c);
    auto before = read_text_file((dir / "bias/mock-a.apx.csv").string());
    auto scores = read_text_file((dir / "scores/mock-a.jsonl").string());
    run_stage("score", c);
    run_stage("apx", c);
    CHECK(read_text_file((dir / "bias/mock-a.apx.csv").string()) == before);
    CHECK(read_text_file((dir / "scores/mock-a.jsonl").string()) == scores);
  }
}

TEST_SUITE("tables") {
  TEST_CASE("percent and signed points") {
    CHECK(format_percent(0.5) == "50.0");
    CHECK(format_percent(0.0) == "0.0");
    CHECK(format_percent(1.0) == "100.0");
    CHECK(format_percent(0.12345) == "12.3");
    CHECK(format_signed_points(1.26) == "+1.3");
    CHECK(format_signed_points(-0.44) == "-0.4");
    CHECK(format_signed_points(0.0) == "0.0");
    CHECK(format_signed_points(-0.04) == "0.0");
    CHECK(format_signed_points(0.04) == "0.0");
  }

  TEST_CASE("validation table") {
    std::vector<ModelValidation> rows(1);
    rows[0].model = "m";
    rows[0].report.accuracy_ppl = 0.25;
    rows[0].report.accuracy_apx = 0.5;
    rows[0].report.mrr_ppl = 0.4;
    rows[0].report.mrr_apx = 0.625;
    CHECK(validation_table_csv(rows) == "model,acc_ppl,acc_apx,mrr_ppl,mrr_apx\nm,25.0,50.0,40.0,62.5\n");
  }

  TEST_CASE("accuracy table chance row") {
    std::vector<profileanalysis::Task> tasks(profileanalysis::kAllTasks.begin(), profileanalysis::kAllTasks.end());
    std::vector<double> chance = {1.0 / 40.0, 1.0 / 20.0, 0.5};
    std::vector<ModelAccuracy> rows = {{"m", {0.9, 0.8, 0.7}}};
    auto out = accuracy_table_csv(tasks, chance, rows);
    CHECK(out.find("Chance Level,2.5,5,50\n") != std::string::npos);
    CHECK(out.find("m,90.0,80.0,70.0\n") != std::string::npos);
    std::vector<double> short_chance = {0.5};
    CHECK(code_of([&] { accuracy_table_csv(tasks, short_chance, rows); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("elimination table layout") {
    std::vector<ModelElimination> ms(2);
    for (std::size_t i = 0; i < 2; ++i) {
      ms[i].model = i == 0 ? "a" : "b";
      ms[i].report.baseline_accuracy = {0.8};
      profileanalysis::EliminationRow r;
      r.removed = profileanalysis::FeatureGroup::Religion;
      r.delta_points = {i == 0 ? -12.34 : 0.01};
      ms[i].report.rows.push_back(r);
    }
    auto out = elimination_table_csv(0, ms);
    CHECK(out == "feature,a,b\nOverall Accuracy (%),80.0,80.0\nreligion,-12.3,0.0\n");
  }
}
