// Exercises the command-line surface end to end by spawning the real binary
// (path passed as argv[1]). Keeps to fast subcommands; training depth is
// covered by the unit and acceptance suites.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

namespace {

int g_failures = 0;

#define CHECK_MSG(cond, msg)                                                  \
  do {                                                                        \
    if (!(cond)) {                                                            \
      std::cerr << "FAIL: " << msg << " (" << #cond << ")\n";                 \
      ++g_failures;                                                           \
    }                                                                         \
  } while (0)

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& cmd) {
  const std::string full = cmd + " 2>&1";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(full.c_str(), "r"), pclose);
  RunResult result{-1, {}};
  if (!pipe) return result;
  std::array<char, 4096> buf;
  while (fgets(buf.data(), buf.size(), pipe.get())) result.output += buf.data();
  const int status = pclose(pipe.release());
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: test_cli <path-to-binary>\n";
    return 1;
  }
  const std::string bin = argv[1];
  const std::string dir = "/tmp/horo_cli_test";
  std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());

  // Unknown flags and missing subcommands exit 1 with usage text.
  {
    const RunResult r = run(bin + " --definitely-not-a-flag");
    CHECK_MSG(r.exit_code == 1, "unknown flag exits 1");
  }
  {
    const RunResult r = run(bin);
    CHECK_MSG(r.exit_code == 1, "missing subcommand exits 1");
  }

  // Generators are deterministic and loadable.
  {
    const RunResult r = run(bin + " gen-tree --depth 3 --branch 3 --mode per_level --out " +
                            dir + "/tree.tsv");
    CHECK_MSG(r.exit_code == 0, "gen-tree succeeds");
    const RunResult r2 = run(bin + " gen-tree --depth 3 --branch 3 --mode per_level --out " +
                             dir + "/tree2.tsv");
    CHECK_MSG(r2.exit_code == 0, "gen-tree twice");
    CHECK_MSG(slurp(dir + "/tree.tsv") == slurp(dir + "/tree2.tsv"),
              "gen-tree output is deterministic");
  }
  {
    const RunResult r = run(bin + " gen-kg --entities 30 --relations 3 --density 0.03 --seed 5"
                                  " --out " + dir + "/kg.tsv");
    CHECK_MSG(r.exit_code == 0, "gen-kg succeeds");
  }

  // Query sampling: identical seeds give identical JSONL bytes.
  {
    const std::string base = bin + " sample-queries --data " + dir +
                             "/kg.tsv --structure 2i --count 10 --seed 7 --out ";
    CHECK_MSG(run(base + dir + "/q1.jsonl").exit_code == 0, "sample-queries succeeds");
    CHECK_MSG(run(base + dir + "/q2.jsonl").exit_code == 0, "sample-queries twice");
    const std::string q1 = slurp(dir + "/q1.jsonl");
    CHECK_MSG(!q1.empty() && q1 == slurp(dir + "/q2.jsonl"),
              "sample-queries output is byte-identical across runs");
    CHECK_MSG(q1.find("\"structure\":\"2i\"") != std::string::npos,
              "sample output carries the structure tag");
  }

  // Missing dataset is a data error (exit 2).
  {
    const RunResult r = run(bin + " sample-queries --data " + dir +
                            "/nope.tsv --structure 1t --count 1 --seed 1 --out " + dir +
                            "/x.jsonl");
    CHECK_MSG(r.exit_code == 2, "missing dataset exits 2");
  }

  // Tiny end-to-end train -> eval -> analyze -> viz.
  {
    std::ofstream cfg(dir + "/run.cfg");
    cfg << "dataset = " << dir << "/tree.tsv\n"
        << "d = 4\nepochs = 4\nbatch = 16\nnegatives = 8\n"
        << "query_mix = 1t,2t\nqueries_per_structure = 30\nsplit = 1,0,0\nseed = 3\n";
    cfg.close();
    const RunResult t = run(bin + " train --config " + dir + "/run.cfg --out " + dir +
                            "/model.ckpt --deterministic");
    CHECK_MSG(t.exit_code == 0, "train succeeds: " + t.output);
    CHECK_MSG(t.output.find("epoch 4/4") != std::string::npos, "train logs epochs");

    const RunResult s = run(bin + " sample-queries --data " + dir +
                            "/tree.tsv --structure 1t --count 10 --seed 2 --out " + dir +
                            "/eval.jsonl");
    CHECK_MSG(s.exit_code == 0, "eval queries sampled");
    const RunResult e = run(bin + " eval --checkpoint " + dir + "/model.ckpt --queries " + dir +
                            "/eval.jsonl --json " + dir + "/metrics.json");
    CHECK_MSG(e.exit_code == 0, "eval succeeds: " + e.output);
    CHECK_MSG(e.output.find("hits@3") != std::string::npos, "eval prints the metric table");
    const std::string metrics = slurp(dir + "/metrics.json");
    for (const char* key : {"\"1t\"", "\"2t\"", "\"3t\"", "\"2i\"", "\"3i\"", "\"2u\"",
                            "\"ip\"", "\"pi\"", "\"up\"", "\"avg\""})
      CHECK_MSG(metrics.find(key) != std::string::npos,
                std::string("metrics JSON contains ") + key);

    // Digest mismatch warns but succeeds.
    std::ofstream cfg2(dir + "/other.cfg");
    cfg2 << "dataset = " << dir << "/tree.tsv\nd = 4\nmargin = 3.0\n";
    cfg2.close();
    const RunResult w = run(bin + " eval --checkpoint " + dir + "/model.ckpt --queries " + dir +
                            "/eval.jsonl --config " + dir + "/other.cfg");
    CHECK_MSG(w.exit_code == 0, "digest mismatch still succeeds");
    CHECK_MSG(w.output.find("warning") != std::string::npos, "digest mismatch warns");

    const RunResult a = run(bin + " analyze-distances --checkpoint " + dir +
                            "/model.ckpt --data " + dir + "/tree.tsv --metric hyp --out " + dir +
                            "/dist.csv");
    CHECK_MSG(a.exit_code == 0, "analyze-distances succeeds: " + a.output);
    CHECK_MSG(slurp(dir + "/dist.csv").find("intra,") != std::string::npos,
              "distance CSV has intra rows");

    const RunResult v = run(bin + " export-viz --checkpoint " + dir + "/model.ckpt --data " +
                            dir + "/tree.tsv --json " + dir + "/viz.json --svg " + dir +
                            "/viz.svg");
    CHECK_MSG(v.exit_code == 0, "export-viz succeeds: " + v.output);
    CHECK_MSG(slurp(dir + "/viz.json").find("\"center\"") != std::string::npos,
              "viz JSON has centers");
    CHECK_MSG(slurp(dir + "/viz.svg").find("<svg") != std::string::npos, "viz SVG exists");

    // Determinism: re-train with the same seed, byte-compare checkpoints.
    const RunResult t2 = run(bin + " train --config " + dir + "/run.cfg --out " + dir +
                             "/model2.ckpt --deterministic");
    CHECK_MSG(t2.exit_code == 0, "second train succeeds");
    CHECK_MSG(slurp(dir + "/model.ckpt") == slurp(dir + "/model2.ckpt"),
              "deterministic training is byte-identical");
  }

  // Empty query file: empty report, success.
  {
    std::ofstream empty(dir + "/empty.jsonl");
    empty.close();
    const RunResult e = run(bin + " eval --checkpoint " + dir + "/model.ckpt --queries " + dir +
                            "/empty.jsonl");
    CHECK_MSG(e.exit_code == 0, "empty query file exits 0");
  }

  // gradcheck: fast pass with few configurations per op, exit 0.
  {
    const RunResult g = run(bin + " gradcheck --configs 2");
    CHECK_MSG(g.exit_code == 0, "gradcheck passes: " + g.output);
    CHECK_MSG(g.output.find("overall max relative error") != std::string::npos,
              "gradcheck prints the table");
  }

  std::system(("rm -rf " + dir).c_str());
  if (g_failures == 0) {
    std::cout << "cli surface: all checks passed\n";
    return 0;
  }
  std::cerr << g_failures << " cli checks failed\n";
  return 1;
}
