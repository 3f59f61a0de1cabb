#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(AUTOBO_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("autobo_cli_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    return p;
}

const std::string quick = " --reps 2 --iters 2 --init 3 --grid-size 50 --gp-restarts 2 --bootstrap-samples 20";

} // namespace

TEST(Cli, ListBenchmarks) { EXPECT_EQ(cli("list-benchmarks"), 0); }

TEST(Cli, SpecErrors) {
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("run --bogus-flag"), 2);
    EXPECT_EQ(cli("run --policy ei"), 2);
    EXPECT_EQ(cli("run --objective nope --policy ei"), 2);
    EXPECT_EQ(cli("run --objective branin --policy weighted:0.9/0.9/0.9"), 2);
    EXPECT_EQ(cli("run --objective branin --reps 0"), 2);
}

TEST(Cli, RunThenVerify) {
    const auto dir = scratch("run");
    EXPECT_EQ(cli("run --objective branin --policy ei --policy hedge --seed 4 --out " + dir.string() + quick), 0);
    EXPECT_TRUE(fs::exists(dir / "raw.csv"));
    EXPECT_TRUE(fs::exists(dir / "regret.svg"));
    EXPECT_EQ(cli("verify --out " + dir.string()), 0);

    std::ifstream in(dir / "summary.json");
    auto j = nlohmann::json::parse(in);
    in.close();
    j["metric"] = "something else";
    std::ofstream(dir / "summary.json") << j.dump(2) << '\n';
    EXPECT_EQ(cli("verify --out " + dir.string()), 3);
    fs::remove_all(dir);
}

TEST(Cli, ExternalObjectiveExitCodes) {
    const auto dir = scratch("ext");
    const std::string base = " --dim 2 --bounds 0:1,0:1 --out " + dir.string() + quick;
    EXPECT_EQ(cli("run --external-cmd '" + std::string(FAKE_OBJECTIVE) + " sum'" + base), 0);
    EXPECT_EQ(cli("run --external-cmd '" + std::string(FAKE_OBJECTIVE) + " garbage'" + base), 4);
    EXPECT_EQ(cli("run --external-cmd '" + std::string(FAKE_OBJECTIVE) + " exit'" + base), 3);
    EXPECT_EQ(cli("run --external-cmd 'true' --dim 3 --bounds 0:1,0:1 --out " + dir.string()), 2);
    fs::remove_all(dir);
}

TEST(Cli, Meta) {
    const auto dir = scratch("meta");
    EXPECT_EQ(cli("meta --objective branin --outer-init 3 --outer-iters 1 --inner-reps 1 --iters 2 --init 3 "
                  "--grid-size 50 --gp-restarts 2 --out " +
                  dir.string()),
              0);
    std::ifstream in(dir / "meta.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("weights").size(), 3u);
    EXPECT_TRUE(fs::exists(dir / "outer_trace.csv"));
    fs::remove_all(dir);
}
