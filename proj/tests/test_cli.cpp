#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dance/util.hpp"

namespace fs = std::filesystem;
using namespace dance;

namespace {

#ifndef DANCE_CLI_PATH
#error "DANCE_CLI_PATH must point at the dance binary"
#endif

const std::string kCli = DANCE_CLI_PATH;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int count_lines(const std::string& path) {
  const std::string text = read_text_file(path);
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

// minimal XML well-formedness: tag stack balance plus header
bool xml_well_formed(const std::string& text) {
  if (text.rfind("<?xml", 0) != 0) return false;
  std::vector<std::string> stack;
  std::size_t i = 0;
  while ((i = text.find('<', i)) != std::string::npos) {
    if (text[i + 1] == '?') {
      i = text.find('>', i);
      continue;
    }
    const std::size_t end = text.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(i + 1, end - i - 1);
    if (tag.empty()) return false;
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (tag.back() != '/') {
      const std::size_t space = tag.find_first_of(" \t\n");
      stack.push_back(space == std::string::npos ? tag : tag.substr(0, space));
    }
    i = end + 1;
  }
  return stack.empty();
}

}  // namespace

TEST_CASE("gen-dataset: deterministic files, opt/rand ratio, usage errors") {
  TempDir tmp("dance_cli_gen");
  const std::string a = tmp.str("a");
  const std::string b = tmp.str("b");
  REQUIRE(run_cli("gen-dataset --networks 30 --seed 5 --out " + a) == 0);
  REQUIRE(run_cli("gen-dataset --networks 30 --seed 5 --out " + b) == 0);
  CHECK(read_text_file(a + "/dataset.csv") == read_text_file(b + "/dataset.csv"));
  CHECK(fs::exists(a + "/manifest.json"));

  // default ratio 1 opt : 8 rand
  const std::string text = read_text_file(a + "/dataset.csv");
  std::size_t opt = 0, rnd = 0, pos = 0;
  while ((pos = text.find(",opt,", pos)) != std::string::npos) ++opt, ++pos;
  pos = 0;
  while ((pos = text.find(",rand,", pos)) != std::string::npos) ++rnd, ++pos;
  CHECK(opt == 30);
  CHECK(rnd == 240);

  CHECK(run_cli("gen-dataset --networks 0 --out " + tmp.str("zero")) == 2);
  CHECK(run_cli("gen-dataset --out " + tmp.str("c") + " --bogus-flag") == 2);

  // collision policy: refuse without --force
  CHECK(run_cli("gen-dataset --networks 5 --seed 5 --out " + a) == 1);
  CHECK(run_cli("gen-dataset --networks 5 --seed 5 --out " + a + " --force") == 0);
}

TEST_CASE("full command chain on a tiny dataset") {
  TempDir tmp("dance_cli_chain");
  const std::string data_dir = tmp.str("data");
  const std::string model = tmp.str("model.bin");
  const std::string run = tmp.str("run1");
  const std::string report_dir = tmp.str("rep");

  REQUIRE(run_cli("gen-dataset --networks 40 --seed 3 --out " + data_dir) == 0);
  REQUIRE(run_cli("train-evaluator --dataset " + data_dir +
                  "/dataset.csv --out " + model +
                  " --seed 4 --set evaluator.hwgen.epochs=8 --set evaluator.costest.epochs=8 "
                  "--set evaluator.hwgen.lr0=0.02") == 0);
  CHECK(fs::exists(model));
  CHECK(fs::exists(model + ".manifest.json"));

  REQUIRE(run_cli("eval-evaluator --model " + model + " --dataset " + data_dir +
                  "/dataset.csv --report " + tmp.str("acc.csv")) == 0);
  CHECK(count_lines(tmp.str("acc.csv")) == 5);  // header + 4 rows

  REQUIRE(run_cli("search --evaluator " + model + " --out " + run +
                  " --cost edap --lambda2 0.001 --epochs 4 --seed 7 --warmup 1,0 "
                  "--set toy_task.n_train=256 --set toy_task.n_val=128") == 0);
  CHECK(fs::exists(run + "/arch.json"));
  CHECK(fs::exists(run + "/trace.csv"));
  CHECK(fs::exists(run + "/alpha_trace.csv"));
  CHECK(count_lines(run + "/trace.csv") == 5);  // header + 4 epochs

  REQUIRE(run_cli("finalize --run " + run) == 0);
  CHECK(fs::exists(run + "/final.json"));
  CHECK(fs::exists(run + "/layers.csv"));
  const auto fin = nlohmann::json::parse(read_text_file(run + "/final.json"));
  CHECK(fin.contains("accelerator"));
  CHECK(fin.at("cost").get<double>() > 0.0);

  // EDAP column consistency and svg well-formedness via report
  REQUIRE(run_cli("report --out " + report_dir + " " + run) == 0);
  const std::string report = read_text_file(report_dir + "/report.csv");
  CHECK(count_lines(report_dir + "/report.csv") == 2);  // header + 1 run

  // edap column equals latency*energy*area within 1e-9 relative
  std::istringstream rows(report);
  std::string header, line;
  std::getline(rows, header);
  std::getline(rows, line);
  std::vector<std::string> fields;
  std::stringstream ls(line);
  std::string f;
  while (std::getline(ls, f, ',')) fields.push_back(f);
  REQUIRE(fields.size() == 8);
  const double lat = std::stod(fields[3]), en = std::stod(fields[4]), ar = std::stod(fields[5]);
  const double edap = std::stod(fields[6]);
  CHECK(std::abs(1.0 - edap / (lat * en * ar)) < 1e-9);

  CHECK(xml_well_formed(read_text_file(report_dir + "/scatter.svg")));

  // missing final.json -> skipped with exit 0
  const std::string empty_run = tmp.str("empty_run");
  fs::create_directories(empty_run);
  CHECK(run_cli("report --out " + tmp.str("rep2") + " " + empty_run) == 0);
  CHECK(count_lines(tmp.str("rep2") + "/report.csv") == 1);  // header only
}

TEST_CASE("pipeline smoke: reproducible report, resume skips finished phases") {
  TempDir tmp("dance_cli_pipe");
  const std::string p1 = tmp.str("p1");
  const std::string p2 = tmp.str("p2");

  const std::string overrides =
      " --set dataset.networks=40 --set evaluator.hwgen.epochs=4 "
      "--set evaluator.costest.epochs=4 --set search.epochs=4 "
      "--set toy_task.n_train=256 --set toy_task.n_val=128";

  REQUIRE(run_cli("pipeline --seed 2 --out " + p1 + overrides) == 0);
  REQUIRE(run_cli("pipeline --seed 2 --out " + p2 + overrides) == 0);
  CHECK(read_text_file(p1 + "/report.csv") == read_text_file(p2 + "/report.csv"));
  CHECK(xml_well_formed(read_text_file(p1 + "/scatter.svg")));

  // one row per run: no_penalty + 2 dance + edd
  CHECK(count_lines(p1 + "/report.csv") >= 4);

  // resume: drop the report and one run, keep dataset/evaluator
  fs::remove(p1 + "/report.csv");
  fs::remove_all(p1 + "/runs/edd_original");
  REQUIRE(run_cli("pipeline --seed 2 --out " + p1 + " --resume" + overrides) == 0);
  CHECK(read_text_file(p1 + "/report.csv") == read_text_file(p2 + "/report.csv"));

  // different seed changes the report
  const std::string p3 = tmp.str("p3");
  REQUIRE(run_cli("pipeline --seed 3 --out " + p3 + overrides) == 0);
  CHECK(read_text_file(p3 + "/report.csv") != read_text_file(p1 + "/report.csv"));
}

TEST_CASE("config file and dotted overrides reach the cost model") {
  TempDir tmp("dance_cli_cfg");
  write_text_file(tmp.str("cfg.json"),
                  "{\"cost_model\":{\"e_dram_pj\":100.0},\"dataset\":{\"networks\":5}}\n");
  const std::string out_a = tmp.str("a");
  const std::string out_b = tmp.str("b");
  REQUIRE(run_cli("gen-dataset --config " + tmp.str("cfg.json") + " --seed 1 --out " + out_a) ==
          0);
  REQUIRE(run_cli("gen-dataset --seed 1 --set dataset.networks=5 --out " + out_b) == 0);
  // different DRAM energy shifts the stored costs
  CHECK(read_text_file(out_a + "/dataset.csv") != read_text_file(out_b + "/dataset.csv"));

  CHECK(run_cli("gen-dataset --set hw_space.pe_min=9 --networks 2 --out " + tmp.str("c")) == 1);
}
