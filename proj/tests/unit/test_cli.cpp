#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lre/cli.hpp"
#include "lre/corpus.hpp"

namespace fs = std::filesystem;
using namespace lre;

namespace {

const fs::path kData = LRE_TEST_DATA_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result lre_run(std::vector<std::string> args,
               const std::map<std::string, std::string>& env = {}) {
  args.insert(args.begin(), "lre");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err,
                            [&](const std::string& k) -> std::optional<std::string> {
                              auto it = env.find(k);
                              if (it == env.end()) return std::nullopt;
                              return it->second;
                            });
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string s;
  while (std::getline(in, s)) ++n;
  return n;
}

std::string value_of(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with(key + "=")) return line.substr(key.size() + 1);
  }
  return {};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("lre_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string corpus() { return (kData / "fixture.txt").string(); }

}  // namespace

TEST_CASE("count matches the golden files") {
  TempDir t("golden");
  auto r = lre_run({"count", "--corpus", corpus(), "--out", t / "w2.cooc", "--window", "2"});
  REQUIRE(r.code == 0);
  CHECK(slurp(t / "w2.cooc") == slurp(kData / "fixture_w2.cooc"));
  CHECK(slurp(t / "w2.cooc.vocab") == slurp(kData / "fixture_w2.cooc.vocab"));
  const auto stats = load_cooc(t / "w2.cooc");
  CHECK(value_of(r.out, "nonzero_pairs") == std::to_string(stats.nonzero_count()));
  CHECK(value_of(r.out, "vocab_size") == std::to_string(stats.vocab_size()));

  r = lre_run({"count", "--corpus", corpus(), "--out", t / "w3.cooc", "--window", "3",
               "--weighting", "harmonic"});
  REQUIRE(r.code == 0);
  CHECK(slurp(t / "w3.cooc") == slurp(kData / "fixture_w3h.cooc"));
}

TEST_CASE("count errors") {
  TempDir t("count_err");
  auto r = lre_run({"count", "--corpus", t / "missing.txt", "--out", t / "x"});
  CHECK(r.code == 2);
  CHECK(r.err.find("no such corpus") != std::string::npos);
  r = lre_run({"count", "--corpus", corpus(), "--out", t / "x", "--window", "0"});
  CHECK(r.code == 2);
  CHECK(r.err.find("invalid window") != std::string::npos);
  r = lre_run({"count", "--corpus", corpus()});
  CHECK(r.code == 2);
  r = lre_run({"bogus"});
  CHECK(r.code == 2);
}

TEST_CASE("train is deterministic and eval reads the model back") {
  TempDir t("train");
  REQUIRE(lre_run({"count", "--corpus", corpus(), "--out", t / "s", "--window", "2"}).code == 0);
  std::vector<std::string> args = {"train", "--stats", t / "s", "--family", "glove",
                                   "--dim", "32", "--seed", "7", "--epochs", "5"};
  auto a = args;
  a.insert(a.end(), {"--out", t / "a"});
  auto b = args;
  b.insert(b.end(), {"--out", t / "b"});
  REQUIRE(lre_run(a).code == 0);
  REQUIRE(lre_run(b).code == 0);
  for (const char* ext : {".vectors.txt", ".covectors.txt", ".biases.txt"}) {
    REQUIRE(fs::exists(t / (std::string("a") + ext)));
    CHECK(slurp(t / (std::string("a") + ext)) == slurp(t / (std::string("b") + ext)));
  }

  auto e = lre_run({"eval", "--model", t / "a", "--stats", t / "s", "--count-floor", "1",
                    "--diagnostics", t / "diag"});
  REQUIRE(e.code == 0);
  CHECK(value_of(e.out, "family") == "glove");
  const auto stats = load_cooc(t / "s");
  CHECK(lines(t / "diag.pmi.tsv") == stats.nonzero_count() + 1);
  // Summary comment and column header, then one row per word.
  CHECK(lines(t / "diag.bias.tsv") == stats.vocab_size() + 2);
}

TEST_CASE("train config errors") {
  TempDir t("train_err");
  REQUIRE(lre_run({"count", "--corpus", corpus(), "--out", t / "s"}).code == 0);
  auto r = lre_run({"train", "--stats", t / "s", "--out", t / "m", "--family", "sgns",
                    "--pair-policy", "nonzero-only"});
  CHECK(r.code == 2);
  CHECK(r.err.find("SGNS requires all_pairs") != std::string::npos);
  r = lre_run({"train", "--stats", t / "s", "--out", t / "m", "--family", "word2vec"});
  CHECK(r.code == 2);
  r = lre_run({"train", "--stats", t / "nope", "--out", t / "m", "--family", "glove"});
  CHECK(r.code == 2);
}

TEST_CASE("divergence exits with code 3") {
  TempDir t("diverge");
  REQUIRE(lre_run({"count", "--corpus", corpus(), "--out", t / "s", "--window", "3"}).code == 0);
  auto r = lre_run({"train", "--stats", t / "s", "--out", t / "m", "--family", "svd-mse",
                    "--eta", "1e9", "--newton-cap", "false", "--normalize-multiplier", "false",
                    "--max-restarts", "0", "--epochs", "3"});
  CHECK(r.code == 3);
  CHECK(r.err.find("diverged at epoch") != std::string::npos);
  CHECK(r.err.find("last finite loss") != std::string::npos);
}

TEST_CASE("full-rank svd is exact") {
  TempDir t("svd");
  REQUIRE(lre_run({"count", "--corpus", corpus(), "--out", t / "s", "--window", "2"}).code == 0);
  auto r = lre_run({"train", "--stats", t / "s", "--out", t / "m", "--family", "svd",
                    "--rank", "full", "--count-floor", "1"});
  REQUIRE(r.code == 0);
  CHECK(std::stod(value_of(r.out, "rmse")) < 1e-8);
  auto e = lre_run({"eval", "--model", t / "m", "--stats", t / "s", "--count-floor", "1"});
  REQUIRE(e.code == 0);
  CHECK(value_of(e.out, "pearson_r") == "1.0000");
  CHECK(std::stod(value_of(e.out, "rmse")) < 1e-8);

  auto f = lre_run({"factorize", "--stats", t / "s", "--out", t / "f", "--rank", "full",
                    "--count-floor", "1"});
  REQUIRE(f.code == 0);
  CHECK(slurp(t / "f.vectors.txt") == slurp(t / "m.vectors.txt"));
}

TEST_CASE("vocabulary mismatch") {
  TempDir t("mismatch");
  REQUIRE(lre_run({"count", "--corpus", corpus(), "--out", t / "s"}).code == 0);
  std::ofstream(t / "other.txt") << "entirely different words here and here\n";
  REQUIRE(lre_run({"count", "--corpus", t / "other.txt", "--out", t / "o"}).code == 0);
  REQUIRE(lre_run({"train", "--stats", t / "o", "--out", t / "m", "--family", "svd",
                   "--dim", "2"})
              .code == 0);
  auto e = lre_run({"eval", "--model", t / "m", "--stats", t / "s"});
  CHECK(e.code == 2);
  CHECK(e.err.find("vocabulary mismatch: 'the'") != std::string::npos);
}

TEST_CASE("settings precedence and config replay") {
  TempDir t("precedence");
  std::ofstream(t / "cfg") << "# fixture settings\nwindow = 3\nmin-count=2\n";
  auto r = lre_run({"count", "--corpus", corpus(), "--out", t / "a", "--config", t / "cfg"});
  REQUIRE(r.code == 0);
  auto cfg = cli::read_config_file(t / "a.config");
  CHECK(cfg.at("window") == "3");
  CHECK(cfg.at("min-count") == "2");

  r = lre_run({"count", "--corpus", corpus(), "--out", t / "b", "--config", t / "cfg"},
              {{"LRE_WINDOW", "4"}, {"LRE_MIN_COUNT", "1"}});
  REQUIRE(r.code == 0);
  cfg = cli::read_config_file(t / "b.config");
  CHECK(cfg.at("window") == "4");
  CHECK(cfg.at("min-count") == "1");

  r = lre_run({"count", "--corpus", corpus(), "--out", t / "c", "--config", t / "cfg",
               "--window", "5"},
              {{"LRE_WINDOW", "4"}});
  REQUIRE(r.code == 0);
  CHECK(cli::read_config_file(t / "c.config").at("window") == "5");

  std::ofstream(t / "bad") << "windw=3\n";
  r = lre_run({"count", "--corpus", corpus(), "--out", t / "d", "--config", t / "bad"});
  CHECK(r.code == 2);

  // Re-running from the echoed config reproduces the outputs.
  r = lre_run({"count", "--config", t / "a.config", "--out", t / "e"});
  REQUIRE(r.code == 0);
  CHECK(slurp(t / "e") == slurp(t / "a"));

  REQUIRE(lre_run({"train", "--stats", t / "a", "--out", t / "m", "--family", "lds",
                   "--dim", "4", "--epochs", "3"})
              .code == 0);
  REQUIRE(lre_run({"train", "--config", t / "m.config", "--out", t / "m2"}).code == 0);
  CHECK(slurp(t / "m2.vectors.txt") == slurp(t / "m.vectors.txt"));
  CHECK(slurp(t / "m2.covectors.txt") == slurp(t / "m.covectors.txt"));
}

TEST_CASE("fasttext trains through the cli") {
  TempDir t("fasttext");
  REQUIRE(lre_run({"count", "--corpus", corpus(), "--out", t / "s"}).code == 0);
  auto r = lre_run({"train", "--stats", t / "s", "--out", t / "m", "--family", "fasttext",
                    "--dim", "4", "--epochs", "2", "--count-floor", "1"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(t / "m.ngrams.txt"));
  auto e = lre_run({"eval", "--model", t / "m", "--stats", t / "s", "--count-floor", "1"});
  CHECK(e.code == 0);
}

TEST_CASE("checkpoints") {
  TempDir t("ckpt");
  REQUIRE(lre_run({"count", "--corpus", corpus(), "--out", t / "s"}).code == 0);
  auto r = lre_run({"train", "--stats", t / "s", "--out", t / "m", "--family", "glove",
                    "--dim", "4", "--epochs", "4", "--checkpoint-every", "2"});
  REQUIRE(r.code == 0);
  const auto meta = slurp(t / "m.checkpoint.meta");
  CHECK(meta.find("epoch=3") != std::string::npos);
  CHECK(meta.find("config_hash=") != std::string::npos);
}
