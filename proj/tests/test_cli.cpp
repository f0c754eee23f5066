#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = 0;
    std::string out;
};

// Runs dispatch with stdout captured; stderr is left alone.
RunResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "carrysim");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());

    std::stringstream captured;
    std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
    RunResult result;
    try {
        result.exit_code =
            carrysim::cli::dispatch(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cout.rdbuf(old);
        throw;
    }
    std::cout.rdbuf(old);
    result.out = captured.str();
    return result;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("carrysim_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

std::size_t count_lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run_cli({}).exit_code == 2);
    CHECK(run_cli({"frobnicate"}).exit_code == 2);
    CHECK(run_cli({"gen-data"}).exit_code == 2);                      // missing --op
    CHECK(run_cli({"gen-data", "--op", "mul"}).exit_code == 2);       // bad operator
    CHECK(run_cli({"train", "--op", "add", "--theta", "2"}).exit_code == 2);
    CHECK(run_cli({"analyze"}).exit_code == 2);                       // no mode
    CHECK(run_cli({"analyze", "--in", "x.csv"}).exit_code == 2);      // missing columns
}

TEST_CASE("runtime errors exit with 1") {
    CHECK(run_cli({"analyze", "--summary", "/nonexistent/file.csv"}).exit_code == 1);
    CHECK(run_cli({"trace", "--params", "/nonexistent.json", "--op", "1,2"}).exit_code == 1);
    CHECK(run_cli({"run", "--plan", "/nonexistent_plan.json"}).exit_code == 1);
    CHECK(run_cli({"report", "--trials", "/nonexistent_dir"}).exit_code == 1);
}

TEST_CASE("gen-data emits a full operation table") {
    const RunResult add = run_cli({"gen-data", "--op", "add"});
    CHECK(add.exit_code == 0);
    CHECK(count_lines(add.out) == 257);  // header + 256 operations
    CHECK(add.out.rfind("a_bits,b_bits,op,z_bits,carries\n", 0) == 0);
    CHECK(add.out.find("0110,1101,add,10011,2") != std::string::npos);

    TempDir dir("gen");
    const fs::path out = dir.path / "sub.csv";
    CHECK(run_cli({"gen-data", "--op", "sub", "--out", out.string()}).exit_code == 0);
    CHECK(count_lines(slurp(out)) == 137);
}

TEST_CASE("analyze --summary recovers the reference F statistic") {
    TempDir dir("summary");
    const fs::path csv = dir.path / "table.csv";
    spit(csv,
         "label,n,mean,sd\n"
         "0,90,3.81,0.69\n"
         "1,90,4.29,0.88\n"
         "2,90,4.75,0.94\n"
         "3,90,5.43,1.25\n"
         "4,90,6.11,1.86\n");
    const fs::path out = dir.path / "result.json";
    const RunResult r = run_cli({"analyze", "--summary", csv.string(), "--out", out.string()});
    CHECK(r.exit_code == 0);
    // JSON went to the file; the chain is printed.
    CHECK(r.out.find("0 < 1 < 2 < 3 < 4") != std::string::npos);

    const nlohmann::json result = nlohmann::json::parse(slurp(out));
    CHECK(result.at("anova").at("f").get<double>() == doctest::Approx(51.84).epsilon(0.02));
    CHECK(result.at("anova").at("df_between").get<int>() == 4);
    CHECK(result.at("anova").at("df_within").get<int>() == 445);
    CHECK(result.at("anova").at("eta_squared").get<double>() ==
          doctest::Approx(0.32).epsilon(0.05));
    CHECK(result.at("posthoc").at("pairs").size() == 10);
}

TEST_CASE("analyze --in groups a long-format table") {
    TempDir dir("long");
    const fs::path csv = dir.path / "obs.csv";
    spit(csv,
         "condition,value\n"
         "a,1\na,2\na,3\n"
         "b,4\nb,5\nb,6\n");
    const RunResult r = run_cli(
        {"analyze", "--in", csv.string(), "--group-col", "condition", "--value-col", "value"});
    CHECK(r.exit_code == 0);
    const auto json_end = r.out.rfind('}');
    REQUIRE(json_end != std::string::npos);
    const nlohmann::json result = nlohmann::json::parse(r.out.substr(0, json_end + 1));
    CHECK(result.at("anova").at("f").get<double>() == doctest::Approx(13.5).epsilon(1e-9));
    CHECK(r.out.find("a < b") != std::string::npos);
}

TEST_CASE("analyze --rt runs the response-time pipeline per operator") {
    TempDir dir("rt");
    const fs::path csv = dir.path / "rt.csv";
    std::string rows = "participant_id,operator,carries,rt_seconds,correct\n";
    for (int participant = 0; participant < 3; ++participant) {
        for (int cls = 0; cls < 3; ++cls) {
            for (int rep = 0; rep < 4; ++rep) {
                rows += "p" + std::to_string(participant) + ",add," + std::to_string(cls) +
                        "," + std::to_string(2.0 + cls + 0.1 * participant) + ",1\n";
            }
        }
    }
    spit(csv, rows);
    const fs::path out = dir.path / "rt.json";
    const RunResult r = run_cli({"analyze", "--rt", csv.string(), "--out", out.string()});
    CHECK(r.exit_code == 0);
    const nlohmann::json result = nlohmann::json::parse(slurp(out));
    REQUIRE(result.contains("add"));
    CHECK_FALSE(result.contains("sub"));
    CHECK(result.at("add").at("per_class").size() == 3);
    CHECK(result.at("add").at("posthoc").at("chain").get<std::string>().find("0 < 1 < 2") == 0);
}

TEST_CASE("train writes a trial record and optional weights") {
    TempDir dir("train");
    const fs::path trial = dir.path / "trial.json";
    const fs::path weights = dir.path / "weights.json";
    // A 5-epoch budget exercises the full pipeline without converging.
    const RunResult r = run_cli({"train", "--op", "sub", "--hidden", "8", "--seed", "3",
                                 "--max-epochs", "5", "--out", trial.string(),
                                 "--params-out", weights.string()});
    CHECK(r.exit_code == 0);
    const nlohmann::json record = nlohmann::json::parse(slurp(trial));
    CHECK(record.at("epochs_to_converge").is_null());
    CHECK(record.at("config").at("hidden_dim").get<int>() == 8);
    CHECK(record.at("config").at("op").get<std::string>() == "sub");

    const nlohmann::json params = nlohmann::json::parse(slurp(weights));
    CHECK(params.at("w1").at("rows").get<int>() == 8);
    CHECK(params.at("w1").at("cols").get<int>() == 12);  // 8 inputs + 4 fed-back outputs

    // Identical invocations produce identical bytes.
    const fs::path trial2 = dir.path / "trial2.json";
    CHECK(run_cli({"train", "--op", "sub", "--hidden", "8", "--seed", "3", "--max-epochs",
                   "5", "--out", trial2.string()})
              .exit_code == 0);
    CHECK(slurp(trial) == slurp(trial2));
}

TEST_CASE("trace replays an operation against saved weights") {
    TempDir dir("trace");
    const fs::path weights = dir.path / "weights.json";
    REQUIRE(run_cli({"train", "--op", "sub", "--hidden", "8", "--seed", "3", "--max-epochs",
                     "1", "--out", (dir.path / "t.json").string(), "--params-out",
                     weights.string()})
                .exit_code == 0);

    const RunResult r = run_cli({"trace", "--params", weights.string(), "--op", "9,4"});
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("9 - 4 = 0101") != std::string::npos);
    CHECK(r.out.find("step 0: p =") != std::string::npos);
    const bool answered = r.out.find("answer step: ") != std::string::npos;
    const bool unanswered = r.out.find("no answer within 30 steps") != std::string::npos;
    CHECK((answered || unanswered));

    CHECK(run_cli({"trace", "--params", weights.string(), "--op", "99"}).exit_code == 1);
    CHECK(run_cli({"trace", "--params", weights.string(), "--op", "1,200"}).exit_code == 1);
}

TEST_CASE("run executes a plan and report rebuilds the same aggregate") {
    TempDir dir("run");
    const fs::path plan_path = dir.path / "plan.json";
    spit(plan_path, R"({
      "operators": ["sub"],
      "thresholds": [0.9],
      "hidden_dims": [10],
      "trials_per_config": 2,
      "master_seed": 11,
      "max_epochs": 4000,
      "output_dir": ")" + (dir.path / "results").string() + R"("
    })");

    const RunResult r = run_cli({"run", "--plan", plan_path.string(), "--workers", "2"});
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir.path / "results" / "aggregate.csv"));
    CHECK(fs::exists(dir.path / "results" / "analyses.json"));
    CHECK(fs::exists(dir.path / "results" / "trials" / "sub_0.9_10_000.json"));
    CHECK(fs::exists(dir.path / "results" / "trials" / "sub_0.9_10_001.json"));
    CHECK(fs::exists(dir.path / "results" / "fig_data" / "answer_steps_by_class_sub.csv"));

    const std::string aggregate = slurp(dir.path / "results" / "aggregate.csv");
    CHECK(count_lines(aggregate) == 2);  // header + one cell
    CHECK(aggregate.find("sub,0.9,10,2,") != std::string::npos);

    // report over the persisted trials reproduces the aggregate bytes.
    const RunResult rebuilt =
        run_cli({"report", "--trials", (dir.path / "results" / "trials").string(), "--out",
                 (dir.path / "rebuilt").string()});
    CHECK(rebuilt.exit_code == 0);
    CHECK(slurp(dir.path / "rebuilt" / "aggregate.csv") == aggregate);
}
