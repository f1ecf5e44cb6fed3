#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "fixtures.hpp"

namespace kgrec {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string output;
};

// Runs the CLI inside `dir` with stdout and stderr captured.
Run kgrec_cli(const fs::path& dir, const std::string& args) {
  const auto log = dir / "cli.log";
  const std::string cmd = "cd '" + dir.string() + "' && '" + KGREC_CLI + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::slurp(log)};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

TEST(CliTest, ExpandFiveChain) {
  const auto dir = testing::scratch_dir("cli_expand");
  write_file(dir / "toy.tsv", "a\thypernym\tb\nb\thypernym\tc\nc\thypernym\td\nd\thypernym\te\n");
  const auto r = kgrec_cli(dir, "expand --in toy.tsv --relations hypernym --depth 4 --out big.tsv");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto big = load_triples((dir / "big.tsv").string());
  EXPECT_EQ(big.size(), 10u);
  const auto manifest = read_json_file((dir / "big.tsv.manifest.json").string(), "kgrec-run-v1");
  EXPECT_EQ(manifest.at("subcommand"), "expand");
  EXPECT_EQ(manifest.at("options").at("depth"), 4);
  EXPECT_EQ(manifest.at("options").at("relations"), nlohmann::json::array({"hypernym"}));
}

TEST(CliTest, TrainKgIsDeterministic) {
  const auto dir = testing::scratch_dir("cli_train");
  ASSERT_EQ(kgrec_cli(dir, "gen-toy --branching 2 --depth 3 --meronyms 4 --seed 7 --out toy.tsv").code, 0);
  const std::string train = "train-kg --train toy.tsv --variant sntl --dim 6 --slices 2 --epochs 5 "
                            "--batch-size 8 --seed 7 --report ";
  ASSERT_EQ(kgrec_cli(dir, train + "r1.csv --out m1.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, train + "r2.csv --out m2.json").code, 0);
  EXPECT_EQ(testing::slurp(dir / "m1.json"), testing::slurp(dir / "m2.json"));
  EXPECT_EQ(testing::slurp(dir / "r1.csv"), testing::slurp(dir / "r2.csv"));
  const auto m = load_model((dir / "m1.json").string());
  EXPECT_EQ(m.variant(), Variant::sntl);
  EXPECT_EQ(m.dim(), 6);
}

TEST(CliTest, EvalSummaryWithContext) {
  const auto dir = testing::scratch_dir("cli_eval");
  ASSERT_EQ(kgrec_cli(dir, "gen-toy --branching 2 --depth 3 --meronyms 4 --seed 1 --out toy.tsv").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "train-kg --train toy.tsv --variant ntl --dim 6 --slices 2 --epochs 20 "
                           "--batch-size 8 --out m.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "fit-context --model m.json --train toy.tsv --false-sample 200 --out c.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "gen-features --model m.json --per-entity 2 --out q.features").code, 0);
  const auto r = kgrec_cli(dir, "eval --model m.json --queries q.features --context c.json --truth toy.tsv "
                                "--n 3 --summary s.json --report rank.csv");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto s = nlohmann::json::parse(testing::slurp(dir / "s.json"));
  for (const char* key : {"mu_r", "t_at_n", "f_at_n", "n", "mode"}) EXPECT_TRUE(s.contains(key)) << key;
  EXPECT_EQ(s.at("n"), 3);
  EXPECT_TRUE(fs::exists(dir / "rank.csv"));

  // Standard link prediction on the training triples themselves.
  const auto std_run = kgrec_cli(dir, "eval --model m.json --test toy.tsv --summary std.json");
  ASSERT_EQ(std_run.code, 0) << std_run.output;
  // Per-class prediction with unlabeled images included.
  ASSERT_EQ(kgrec_cli(dir, "gen-features --model m.json --per-entity 2 --unlabeled --out ow.features").code, 0);
  const auto p = kgrec_cli(dir, "predict --model m.json --features ow.features --context c.json --top 2 --out p.csv");
  ASSERT_EQ(p.code, 0) << p.output;
  const auto csv = testing::slurp(dir / "p.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "query_id,rank,relation,entity,raw_score,u_score,is_true");
  const auto proj = kgrec_cli(dir, "project --model m.json --features q.features --out proj.csv");
  ASSERT_EQ(proj.code, 0) << proj.output;
  const auto pcsv = testing::slurp(dir / "proj.csv");
  EXPECT_EQ(pcsv.rfind("# explained_variance:", 0), 0u);
  EXPECT_NE(pcsv.find("\nid,pc1,pc2\n"), std::string::npos);
}

TEST(CliTest, ImagePipelineRoundTrip) {
  const auto dir = testing::scratch_dir("cli_images");
  ASSERT_EQ(kgrec_cli(dir, "gen-toy --branching 2 --depth 3 --meronyms 4 --out toy.tsv").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "split --in toy.tsv --holdout-count 2 --out-dir s").code, 0);
  EXPECT_TRUE(fs::exists(dir / "s" / "splits.json"));
  EXPECT_TRUE(fs::exists(dir / "s" / "holdout.txt"));
  ASSERT_EQ(kgrec_cli(dir, "train-kg --train s/train.tsv --dim 6 --slices 2 --epochs 10 --batch-size 8 "
                           "--out m.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "gen-features --model m.json --feature-dim 10 --per-entity 3 --out tr.features").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "train-img --model m.json --features tr.features --hidden 16 --epochs 3 "
                           "--out e.json --report img.csv").code, 0);
  const auto ow = kgrec_cli(dir, "gen-features --model m.json --links toy.tsv --labels s/holdout.txt "
                                 "--feature-dim 10 --out ow.features");
  ASSERT_EQ(ow.code, 0) << ow.output;
  const auto r = kgrec_cli(dir, "eval --model m.json --queries ow.features --embedder e.json "
                                "--truth s/hard_test.tsv --per-class --summary s.json");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(nlohmann::json::parse(testing::slurp(dir / "s.json")).at("mode"), "per_class");
  // Feature width differs from the model without an embedder.
  EXPECT_EQ(kgrec_cli(dir, "eval --model m.json --queries ow.features --summary x.json").code, 2);
}

TEST(CliTest, ExitCodesAndMessages) {
  const auto dir = testing::scratch_dir("cli_errors");
  const auto unknown = kgrec_cli(dir, "expand --in a.tsv --out b.tsv --bogus");
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.output.find("--bogus"), std::string::npos) << unknown.output;
  EXPECT_EQ(kgrec_cli(dir, "").code, 1);
  EXPECT_EQ(kgrec_cli(dir, "no-such-command").code, 1);
  EXPECT_EQ(kgrec_cli(dir, "train-kg --train t.tsv --out m.json --variant rescal").code, 1);

  const auto missing = kgrec_cli(dir, "expand --in nowhere.tsv --out b.tsv");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("cannot open"), std::string::npos) << missing.output;

  write_file(dir / "old.json", R"({"format":"kgrec-model-v0"})");
  const auto schema = kgrec_cli(dir, "predict --model old.json --features f --out p.csv");
  EXPECT_EQ(schema.code, 2);
  EXPECT_NE(schema.output.find("schema version mismatch"), std::string::npos) << schema.output;

  write_file(dir / "bad.tsv", "a\tb\n");
  const auto malformed = kgrec_cli(dir, "expand --in bad.tsv --out b.tsv");
  EXPECT_EQ(malformed.code, 2);
  EXPECT_NE(malformed.output.find("bad.tsv:1:"), std::string::npos) << malformed.output;

  EXPECT_EQ(kgrec_cli(dir, "--help").code, 0);
}

TEST(CliTest, HelpDocumentsEveryFlag) {
  const auto dir = testing::scratch_dir("cli_help");
  ASSERT_EQ(kgrec_cli(dir, "gen-toy --out toy.tsv").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "train-kg --train toy.tsv --epochs 1 --dim 4 --slices 1 --out m.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "fit-context --model m.json --train toy.tsv --false-sample 20 --out c.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "gen-features --model m.json --per-entity 1 --out f.features").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "train-img --model m.json --features f.features --epochs 1 --hidden 4 --out e.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "expand --in toy.tsv --out big.tsv").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "split --in toy.tsv --out-dir s").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "eval --model m.json --queries f.features --truth toy.tsv --summary s.json").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "predict --model m.json --features f.features --out p.csv").code, 0);
  ASSERT_EQ(kgrec_cli(dir, "project --model m.json --out proj.csv").code, 0);
  const std::vector<std::pair<std::string, fs::path>> runs{
      {"gen-toy", "toy.tsv"},         {"train-kg", "m.json"},      {"fit-context", "c.json"},
      {"gen-features", "f.features"}, {"train-img", "e.json"},     {"expand", "big.tsv"},
      {"split", "s/split"},           {"eval", "s.json"},          {"predict", "p.csv"},
      {"project", "proj.csv"}};
  for (const auto& [sub, out] : runs) {
    const auto manifest =
        read_json_file((dir / out).string() + ".manifest.json", "kgrec-run-v1");
    EXPECT_EQ(manifest.at("subcommand"), sub);
    const auto help = kgrec_cli(dir, sub + " --help");
    ASSERT_EQ(help.code, 0);
    for (const auto& [name, value] : manifest.at("options").items()) {
      const auto pos = help.output.find("--" + name + " ");
      EXPECT_NE(pos, std::string::npos) << sub << " --" << name;
    }
  }
}

}  // namespace
}  // namespace kgrec
