// End-to-end checks of the command-line surface: validation exits, error
// messages, the repeat wiring and the embedding ingestion path.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tsfract/ingest.hpp"
#include "tsfract/rng.hpp"

namespace fs = std::filesystem;
using namespace tsfract;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  const fs::path log = fs::path("cli_test_out.log");
  const std::string cmd = std::string(TSFRACT_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  CliResult result;
  const int raw = std::system(cmd.c_str());
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::ostringstream text;
  text << in.rdbuf();
  result.output = text.str();
  return result;
}

fs::path scratch() {
  const fs::path dir = "cli_test_scratch";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synth rejects an out-of-range Hurst parameter") {
  const fs::path dir = scratch();
  const CliResult r =
      run_cli("synth --kind fgn --hurst 1.2 --n 256 --count 1 --seed 1 --out " +
              (dir / "x.jsonl").string());
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("(0, 1)") != std::string::npos);
}

TEST_CASE("analyze rejects an empty input file") {
  const fs::path dir = scratch();
  std::ofstream(dir / "empty.jsonl").close();
  const CliResult r = run_cli("analyze --input " + (dir / "empty.jsonl").string() +
                              " --out " + (dir / "out.csv").string());
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("no records") != std::string::npos);
}

TEST_CASE("eval fails cleanly on a missing checkpoint") {
  const fs::path dir = scratch();
  const CliResult r = run_cli("eval --checkpoint " + (dir / "nope.json").string() +
                              " --input " + (dir / "nope.jsonl").string() +
                              " --out-dir " + dir.string());
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("cannot open") != std::string::npos);
}

TEST_CASE("duplicate record ids are rejected") {
  const fs::path dir = scratch();
  run_cli("synth --kind white --n 128 --count 2 --seed 1 --out " +
          (dir / "a.jsonl").string());
  std::ofstream joined(dir / "dup.jsonl", std::ios::binary);
  std::ifstream a1(dir / "a.jsonl"), a2(dir / "a.jsonl");
  joined << a1.rdbuf() << a2.rdbuf();
  joined.close();
  const CliResult r = run_cli("analyze --input " + (dir / "dup.jsonl").string() +
                              " --out " + (dir / "out.csv").string());
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("duplicate record id") != std::string::npos);
}

TEST_CASE("train averages repetitions into the report") {
  const fs::path dir = scratch();
  run_cli("synth --kind fgn --hurst 0.3 --n 256 --count 20 --seed 21"
          " --severity 1 --out " + (dir / "a.jsonl").string());
  run_cli("synth --kind fgn --hurst 0.8 --n 256 --count 20 --seed 22"
          " --severity 2 --out " + (dir / "b.jsonl").string());
  {
    std::ofstream joined(dir / "ds.jsonl", std::ios::binary);
    std::ifstream a(dir / "a.jsonl"), b(dir / "b.jsonl");
    joined << a.rdbuf() << b.rdbuf();
  }
  const CliResult r = run_cli(
      "train --input " + (dir / "ds.jsonl").string() + " --out-dir " +
      (dir / "model").string() +
      " --aspect severity --num-classes 2 --fusion-dim 8 --lr 1e-3"
      " --epochs 2 --batch 8 --seed 5 --repeat 2");
  CHECK(r.exit_code == 0);
  std::ifstream report(dir / "model" / "report.json");
  nlohmann::json obj;
  report >> obj;
  CHECK(obj["splits"]["test"]["repetitions"].get<int>() == 2);
}

TEST_CASE("analyze ingests embedding records through the reduction") {
  const fs::path dir = scratch();
  std::vector<HaERecord> records;
  Rng rng(77);
  for (int r = 0; r < 2; ++r) {
    HaERecord rec;
    rec.id = "emb-" + std::to_string(r);
    rec.labels = Labels{1, 1, 1};
    Eigen::MatrixXd m(6, kEmbeddingWidth);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < kEmbeddingWidth; ++j) m(i, j) = rng.next_gaussian();
    rec.embedding = std::move(m);
    records.push_back(std::move(rec));
  }
  {
    std::ofstream out(dir / "emb.jsonl");
    write_records(out, records);
  }
  const CliResult r = run_cli("analyze --input " + (dir / "emb.jsonl").string() +
                              " --out " + (dir / "out.csv").string());
  CHECK(r.exit_code == 0);
  std::ifstream csv(dir / "out.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line))
    if (line.rfind("emb-", 0) == 0) ++rows;
  CHECK(rows == 2 * 41);  // default q grid per record

  // the other reduction axis yields a 6-point series, too short to analyze
  const CliResult short_axis =
      run_cli("analyze --input " + (dir / "emb.jsonl").string() + " --out " +
              (dir / "short.csv").string() + " --axis dims");
  CHECK(short_axis.exit_code != 0);
}

TEST_CASE("white-noise analysis summary sits at one half") {
  const fs::path dir = scratch();
  run_cli("synth --kind white --n 4096 --count 10 --seed 50 --out " +
          (dir / "wn.jsonl").string());
  const CliResult r = run_cli("analyze --input " + (dir / "wn.jsonl").string() +
                              " --out " + (dir / "wn.csv").string());
  CHECK(r.exit_code == 0);
  std::ifstream csv(dir / "wn.csv");
  std::string line;
  double mean_h2 = -1.0;
  while (std::getline(csv, line)) {
    const auto pos = line.find("mean_h2=");
    if (pos != std::string::npos)
      mean_h2 = std::atof(line.c_str() + pos + std::string("mean_h2=").size());
  }
  CHECK(mean_h2 > 0.45);
  CHECK(mean_h2 < 0.55);
}

TEST_CASE("eval scores a solved checkpoint at its training performance") {
  const fs::path dir = scratch();
  run_cli("synth --kind fgn --hurst 0.3 --n 256 --count 40 --seed 41"
          " --severity 1 --out " + (dir / "a.jsonl").string());
  run_cli("synth --kind fgn --hurst 0.8 --n 256 --count 40 --seed 42"
          " --severity 2 --out " + (dir / "b.jsonl").string());
  {
    std::ofstream joined(dir / "ds.jsonl", std::ios::binary);
    std::ifstream a(dir / "a.jsonl"), b(dir / "b.jsonl");
    joined << a.rdbuf() << b.rdbuf();
  }
  const CliResult trained = run_cli(
      "train --input " + (dir / "ds.jsonl").string() + " --out-dir " +
      (dir / "model").string() +
      " --aspect severity --num-classes 2 --fusion-dim 16 --lr 1e-3"
      " --epochs 40 --batch 16 --seed 8");
  CHECK(trained.exit_code == 0);

  const CliResult evaled =
      run_cli("eval --checkpoint " + (dir / "model" / "checkpoint.json").string() +
              " --input " + (dir / "ds.jsonl").string() + " --out-dir " +
              (dir / "evalout").string());
  CHECK(evaled.exit_code == 0);
  std::ifstream report(dir / "evalout" / "report.json");
  nlohmann::json obj;
  report >> obj;
  CHECK(obj["splits"]["all"]["macro"]["f1"].get<double>() >= 0.9);
}

TEST_CASE("eval rejects labels beyond the checkpoint's class count") {
  const fs::path dir = scratch();
  run_cli("synth --kind fgn --hurst 0.3 --n 256 --count 10 --seed 31"
          " --severity 1 --out " + (dir / "a.jsonl").string());
  run_cli("synth --kind fgn --hurst 0.8 --n 256 --count 10 --seed 32"
          " --severity 2 --out " + (dir / "b.jsonl").string());
  {
    std::ofstream joined(dir / "ds.jsonl", std::ios::binary);
    std::ifstream a(dir / "a.jsonl"), b(dir / "b.jsonl");
    joined << a.rdbuf() << b.rdbuf();
  }
  run_cli("train --input " + (dir / "ds.jsonl").string() + " --out-dir " +
          (dir / "model").string() +
          " --aspect severity --num-classes 2 --fusion-dim 8 --lr 1e-3"
          " --epochs 1 --batch 8 --seed 6");

  run_cli("synth --kind fgn --hurst 0.5 --n 256 --count 10 --seed 33"
          " --severity 4 --out " + (dir / "high.jsonl").string());
  const CliResult r =
      run_cli("eval --checkpoint " + (dir / "model" / "checkpoint.json").string() +
              " --input " + (dir / "high.jsonl").string() + " --out-dir " +
              (dir / "evalout").string());
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("classes") != std::string::npos);
}
