#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "support.hpp"

using namespace gir;
using gir::test::TempDir;

namespace {

const std::filesystem::path kFixtures = GIR_FIXTURE_DIR;

struct RunResult {
  int code = -1;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  RunResult run(const std::string& args, const std::string& env = "") {
    const auto out = tmp_ / "stdout.txt", err = tmp_ / "stderr.txt";
    const std::string cmd = env + " '" + std::string(GIR_CLI_PATH) + "' " + args + " >'" + out.string() + "' 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
  }

  std::string p(const std::string& name) const { return "'" + (tmp_ / name).string() + "'"; }

  void SetUp() override { save_image(gir::test::scene_image(48, 40, 3), tmp_ / "in.png"); }

  TempDir tmp_{"cli"};
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("degrade --in " + p("in.png")).code, 2);
  EXPECT_EQ(run("pipeline --in " + p("in.png") + " --out " + p("o.png")).code, 2);
  EXPECT_EQ(run("build-testset --gt " + p("gt") + " --out " + p("set")).code, 2);
  EXPECT_EQ(run("encode --in " + p("in.png") + " --out " + p("x.jpg") + " --quality 0").code, 2);
  EXPECT_EQ(run("degrade --in " + p("in.png") + " --out " + p("o.png") + " --kind noise", "GIR_THREADS=abc").code, 0);
  EXPECT_EQ(run("build-testset --gt " + p("gt") + " --out " + p("set") + " --default-bank", "GIR_THREADS=0").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, RuntimeErrorsExitOne) {
  auto r = run("degrade --in " + p("missing.png") + " --out " + p("o.png") + " --kind noise");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("FileNotFound"), std::string::npos);
  EXPECT_EQ(run("degrade --in " + p("in.png") + " --out " + p("o.png") + " --kind fog").code, 2);
  EXPECT_EQ(run("degrade --in " + p("in.png") + " --out " + p("o.png") + " --kind blur --params '{\"ksize\":4}'").code, 2);
  std::ofstream(tmp_ / "bad.json") << "{\"schema_version\": 1}";
  EXPECT_EQ(run("pipeline --in " + p("in.png") + " --out " + p("o.png") + " --recipe " + p("bad.json")).code, 1);
  std::ofstream(tmp_ / "bad.png") << "garbage";
  EXPECT_EQ(run("decode --in " + p("bad.png") + " --out " + p("o.png")).code, 1);
  EXPECT_FALSE(std::filesystem::exists(tmp_ / "o.png"));
}

TEST_F(Cli, DegradeIsDeterministicAndPrintsRecipe) {
  auto a = run("degrade --in " + p("in.png") + " --out " + p("a.png") + " --kind noise --seed 7");
  auto b = run("degrade --in " + p("in.png") + " --out " + p("b.png") + " --kind noise --seed 7");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_text_file(tmp_ / "a.png"), read_text_file(tmp_ / "b.png"));
  const auto r = parse_recipe(a.out);
  EXPECT_EQ(r.master_seed, 7u);
  EXPECT_EQ(r.steps.at(0).params, representative_params(DegradationKind::Noise));
  run("degrade --in " + p("in.png") + " --out " + p("c.png") + " --kind noise --seed 8");
  EXPECT_NE(read_text_file(tmp_ / "a.png"), read_text_file(tmp_ / "c.png"));
}

TEST_F(Cli, HazeWithoutDepthSaysSo) {
  const auto r = run("degrade --in " + p("in.png") + " --out " + p("h.png") + " --kind haze");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("procedural depth"), std::string::npos);
  save_image(ImageF32(48, 40, 0.0f), tmp_ / "depth.png");
  const auto d = run("degrade --in " + p("in.png") + " --out " + p("h0.png") + " --kind haze --depth " + p("depth.png"));
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_EQ(d.err.find("procedural depth"), std::string::npos);
  EXPECT_EQ(load_image(tmp_ / "h0.png"), load_image(tmp_ / "in.png"));
}

TEST_F(Cli, BlurOverrideReproducesRepresentativeTask) {
  ASSERT_EQ(run("degrade --in " + p("in.png") + " --out " + p("b.png") + " --kind blur --params '{\"ksize\":15,\"sigma\":2.0}'").code, 0);
  const auto expect = quantize_to_8bit(degrade_blur(load_image(tmp_ / "in.png"), {15, 2.0}));
  EXPECT_EQ(load_image(tmp_ / "b.png"), expect);
}

TEST_F(Cli, PipelineWritesBoundRecipe) {
  const auto r = run("pipeline --in " + p("in.png") + " --out " + p("p.png") + " --order 3 --seed 4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recipe = parse_recipe(read_text_file(tmp_ / "p.png.recipe.json"));
  EXPECT_EQ(recipe.steps.size(), 3u);
  const auto again = run("pipeline --in " + p("in.png") + " --out " + p("q.png") + " --recipe " + p("p.png.recipe.json"));
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(read_text_file(tmp_ / "p.png"), read_text_file(tmp_ / "q.png"));
}

TEST_F(Cli, JpegRoundTrip) {
  ASSERT_EQ(run("encode --in " + p("in.png") + " --out " + p("x.jpg") + " --quality 90").code, 0);
  const auto r = run("decode --in " + p("x.jpg") + " --out " + p("x.png"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("width 48"), std::string::npos);
  const auto expect = quantize_to_8bit(jpeg::jpeg_decode(jpeg::jpeg_encode(load_image(tmp_ / "in.png"), 90)));
  EXPECT_EQ(load_image(tmp_ / "x.png"), expect);
  EXPECT_GT(psnr(load_image(tmp_ / "x.png"), load_image(tmp_ / "in.png")), 22.0);
}

TEST_F(Cli, EvaluateFixtureColumn) {
  const auto base = (kFixtures / "appendix_baseline.csv").string();
  const auto r = run("evaluate --model '" + (kFixtures / "appendix_gir_rrdb.csv").string() + "#df2k_all' --acceptance '" +
                     base + "#acceptance' --excellence '" + base + "#excellence' --report " + p("rep.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("AR 0.4600"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("ER 0.0000"), std::string::npos);
  const auto at = r.out.find("avg_psnr ");
  ASSERT_NE(at, std::string::npos);
  EXPECT_NEAR(std::stod(r.out.substr(at + 9)), 25.67, 0.02);
  EXPECT_NE(r.out.find("tasks 100"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(tmp_ / "rep.csv.txt"));
}

TEST_F(Cli, BuildThenEvaluateIdentityOutputs) {
  gir::test::write_gt_dir(tmp_ / "gt", 2, 32, 32);
  std::vector<TaskSpec> bank = {default_task_bank(0)[1], default_task_bank(0)[8]};
  save_task_bank(bank, tmp_ / "bank.json");
  const auto b = run("build-testset --gt " + p("gt") + " --bank " + p("bank.json") + " --out " + p("set") + " --seed 3");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("entries 4"), std::string::npos);
  EXPECT_EQ(run("build-testset --gt " + p("gt") + " --bank " + p("bank.json") + " --out " + p("set")).code, 1);
  const auto m = load_manifest(tmp_ / "set" / "manifest.json");
  for (const auto& e : m.entries) {
    std::filesystem::create_directories((tmp_ / "restored" / e.lq_path).parent_path());
    std::filesystem::copy_file(tmp_ / "gt" / (e.gt_id + ".png"), tmp_ / "restored" / e.lq_path);
  }
  std::ofstream(tmp_ / "acc.csv") << "task_id,score\n2,25\n9,20\n";
  std::ofstream(tmp_ / "exc.csv") << "task_id,score\n2,30\n9,28\n";
  const auto r = run("evaluate --outputs " + p("restored") + " --gt " + p("gt") + " --manifest " + p("set/manifest.json") +
                     " --acceptance " + p("acc.csv") + " --excellence " + p("exc.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("AR 1.0000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("ER 1.0000"), std::string::npos);
  std::filesystem::remove(tmp_ / "restored" / m.entries[0].lq_path);
  const auto miss = run("evaluate --outputs " + p("restored") + " --gt " + p("gt") + " --manifest " +
                        p("set/manifest.json") + " --acceptance " + p("acc.csv") + " --excellence " + p("exc.csv") +
                        " --report " + p("partial.csv"));
  EXPECT_EQ(miss.code, 1);
  EXPECT_NE(miss.err.find("MissingOutput"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(tmp_ / "partial.csv"));
}

TEST_F(Cli, BuildIsThreadCountIndependent) {
  gir::test::write_gt_dir(tmp_ / "gt", 2, 24, 24);
  std::vector<TaskSpec> bank = {default_task_bank(0)[3], default_task_bank(0)[20], default_task_bank(0)[60]};
  save_task_bank(bank, tmp_ / "bank.json");
  ASSERT_EQ(run("build-testset --gt " + p("gt") + " --bank " + p("bank.json") + " --out " + p("t1") + " --threads 1").code, 0);
  ASSERT_EQ(run("build-testset --gt " + p("gt") + " --bank " + p("bank.json") + " --out " + p("t4") + " --threads 4").code, 0);
  ASSERT_EQ(run("build-testset --gt " + p("gt") + " --bank " + p("bank.json") + " --out " + p("te"), "GIR_THREADS=3").code, 0);
  const auto t1 = gir::test::read_tree(tmp_ / "t1");
  EXPECT_EQ(t1, gir::test::read_tree(tmp_ / "t4"));
  EXPECT_EQ(t1, gir::test::read_tree(tmp_ / "te"));
}

TEST_F(Cli, SelectTasksWritesDistinctRepresentatives) {
  gir::test::write_gt_dir(tmp_ / "gt", 2, 40, 40);
  const auto r = run("select-tasks --gt " + p("gt") + " --out " + p("sel.json") +
                     " --candidates 12 --per-order 3 --orders 2..3 --crop 32 --seed 5");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto bank = load_task_bank(tmp_ / "sel.json");
  ASSERT_EQ(bank.size(), 6u);
  std::set<std::string> ids;
  for (const auto& t : bank) ids.insert(t.task_id);
  EXPECT_EQ(ids.size(), 6u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(bank[i].order, 2);
  const auto prov = Json::parse(read_text_file(tmp_ / "sel.json.provenance.json"));
  EXPECT_EQ(prov.at("bins").get<int>(), 32);
  EXPECT_EQ(prov.at("crop").get<int>(), 32);
  const auto again = run("select-tasks --gt " + p("gt") + " --out " + p("sel2.json") +
                         " --candidates 12 --per-order 3 --orders 2..3 --crop 32 --seed 5 --threads 1");
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(read_text_file(tmp_ / "sel.json"), read_text_file(tmp_ / "sel2.json"));
  EXPECT_EQ(run("select-tasks --gt " + p("gt") + " --out " + p("x.json") + " --orders 0..9").code, 2);
}
