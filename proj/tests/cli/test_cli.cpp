#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lowlight_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" LOWLIGHT_CLI "' " + args + " >out.txt 2>err.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }
  std::string read(const std::string& name) const {
    std::ifstream f(dir_ / name, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }

  fs::path dir_;
};

const char* kTinyTrain = R"({"num_train": 16, "num_heldout": 8, "image_size": 8, "epochs": 1, "batch_size": 8)";

}  // namespace

TEST_F(Cli, HelpIsSuccess) { EXPECT_EQ(run("--help"), 0); }

TEST_F(Cli, MissingSubcommandOrOptionIsConfigError) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("fold-check"), 2);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, UnknownConfigKeyIsConfigError) {
  write("c.json", R"({"epochs": 1, "epochz": 2})");
  EXPECT_EQ(run("train-toy --config c.json --out m.csv"), 2);
  EXPECT_NE(read("err.txt").find("epochz"), std::string::npos);
}

TEST_F(Cli, MalformedJsonIsConfigError) {
  write("c.json", R"({"epochs": 1,})");
  EXPECT_EQ(run("train-toy --config c.json --out m.csv"), 2);
}

TEST_F(Cli, OutOfRangeValueIsConfigError) {
  write("c.json", R"({"learning_rate": -1})");
  EXPECT_EQ(run("train-toy --config c.json --out m.csv"), 2);
  EXPECT_EQ(run("fold-check --n 2 --out f.csv --tolerance -1"), 2);
}

TEST_F(Cli, MissingFilesAreIoErrors) {
  EXPECT_EQ(run("train-toy --config missing.json --out m.csv"), 3);
  EXPECT_EQ(run("quantize --input missing.tnsr --csv q.csv"), 3);
  EXPECT_EQ(run("synth --input missing.png --out s"), 3);
  EXPECT_EQ(run("fold-check --n 2 --out no/such/dir/f.csv"), 3);
}

TEST_F(Cli, CorruptTensorIsIoError) {
  write("bad.tnsr", "TNSR garbage");
  EXPECT_EQ(run("quantize --input bad.tnsr --csv q.csv"), 3);
}

TEST_F(Cli, FoldDivergenceAboveToleranceIsInvariantViolation) {
  EXPECT_EQ(run("fold-check --n 5 --out f.csv --tolerance 0"), 4);
  EXPECT_EQ(run("fold-check --n 5 --out f.csv"), 0);
}

TEST_F(Cli, SeedFlagOverridesConfigSeed) {
  write("a.json", std::string(kTinyTrain) + R"(, "seed": 1})");
  write("b.json", std::string(kTinyTrain) + R"(, "seed": 7})");
  ASSERT_EQ(run("train-toy --config a.json --out a.csv --seed 7 --quiet"), 0);
  ASSERT_EQ(run("train-toy --config b.json --out b.csv --quiet"), 0);
  ASSERT_EQ(run("train-toy --config a.json --out c.csv --quiet"), 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  EXPECT_NE(read("a.csv"), read("c.csv"));
}
