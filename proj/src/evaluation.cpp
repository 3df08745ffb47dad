#include "forge/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "forge/error.hpp"

namespace forge::evaluation {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(ScaleClass s) {
  switch (s) {
    case ScaleClass::Small: return "small";
    case ScaleClass::Medium: return "medium";
    case ScaleClass::Large: return "large";
  }
  return "large";
}

ScaleClass classify_scale(std::int64_t code_lines, std::int64_t submodule_count) {
  if (code_lines < 0) throw DomainError("code_lines must be >= 0");
  if (submodule_count < 1) throw DomainError("submodule_count must be >= 1");
  if (code_lines < 100) return ScaleClass::Small;
  if (submodule_count == 1 && code_lines <= 400) return ScaleClass::Medium;
  if (submodule_count > 1 && code_lines < 300) return ScaleClass::Medium;
  return ScaleClass::Large;
}

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n)
    throw DomainError("pass_at_k needs 0 <= c <= n and 1 <= k <= n (n=" + std::to_string(n) +
                      ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")");
  if (n - c < k) return 1.0;
  double fail = 1.0;
  for (int i = n - c + 1; i <= n; ++i) fail *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - fail;
}

double average_pass_at_k(const std::vector<double>& per_case) {
  if (per_case.empty()) throw EmptySetError("average pass@k over an empty set");
  for (double v : per_case)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("pass@k value outside [0, 1]");
  return std::accumulate(per_case.begin(), per_case.end(), 0.0) / static_cast<double>(per_case.size());
}

namespace {

std::vector<int> resolve_ks(const std::vector<int>& ks, int trials) {
  std::vector<int> out = ks;
  if (out.empty())
    for (int k = 1; k <= trials; ++k) out.push_back(k);
  for (int k : out)
    if (k < 1 || k > trials)
      throw DomainError("k=" + std::to_string(k) + " outside 1.." + std::to_string(trials));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

BenchmarkSummary summarize(const std::vector<BenchmarkCase>& cases, const std::vector<TrialRecord>& records,
                           const std::vector<int>& ks) {
  if (cases.empty()) throw EmptySetError("benchmark has no cases");
  BenchmarkSummary s;
  std::size_t syntax = 0, functional = 0;
  std::map<int, std::vector<double>> all;
  std::map<ScaleClass, std::map<int, std::vector<double>>> by_scale;

  for (const auto& c : cases) {
    CaseSummary cs;
    cs.name = c.name;
    cs.scale = classify_scale(c.code_lines, c.submodule_count);
    for (const auto& r : records) {
      if (r.case_name != c.name) continue;
      ++cs.trials;
      cs.syntax_passes += r.syntax_pass;
      cs.functional_passes += r.functional_pass;
    }
    syntax += static_cast<std::size_t>(cs.syntax_passes);
    functional += static_cast<std::size_t>(cs.functional_passes);
    for (int k : ks) {
      if (k > cs.trials) continue;
      const double p = pass_at_k(cs.trials, cs.functional_passes, k);
      cs.pass_at_k[k] = p;
      all[k].push_back(p);
      by_scale[cs.scale][k].push_back(p);
    }
    s.cases.push_back(std::move(cs));
  }
  if (!records.empty()) {
    s.sp = static_cast<double>(syntax) / static_cast<double>(records.size());
    s.fp = static_cast<double>(functional) / static_cast<double>(records.size());
  }
  for (const auto& [k, vals] : all) s.average_pass_at_k[k] = average_pass_at_k(vals);
  for (const auto& [scale, per_k] : by_scale)
    for (const auto& [k, vals] : per_k) s.average_pass_at_k_by_scale[scale][k] = average_pass_at_k(vals);
  return s;
}

BenchmarkResult run_benchmark(const std::vector<BenchmarkCase>& cases, const BenchmarkOptions& options,
                              const TrialRunner& runner) {
  if (cases.empty()) throw EmptySetError("benchmark has no cases");
  if (options.trials_per_case < 1) throw DomainError("trials_per_case must be >= 1");
  const auto ks = resolve_ks(options.ks, options.trials_per_case);

  const std::size_t total = cases.size() * static_cast<std::size_t>(options.trials_per_case);
  std::vector<TrialRecord> records(total);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      const auto& c = cases[job / static_cast<std::size_t>(options.trials_per_case)];
      const int trial = static_cast<int>(job % static_cast<std::size_t>(options.trials_per_case));
      TrialRecord& r = records[job];
      r.case_name = c.name;
      r.trial_index = trial;
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto out = runner(c, trial);
        r.syntax_pass = out.syntax_pass;
        r.functional_pass = out.functional_pass && out.syntax_pass;
        r.note = out.note;
      } catch (const std::exception& e) {
        r.note = std::string("trial error: ") + e.what();
      } catch (...) {
        r.note = "trial error";
      }
      r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(total)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  BenchmarkResult result;
  result.records = std::move(records);
  result.summary = summarize(cases, result.records, ks);
  return result;
}

namespace {

ojson k_map(const std::map<int, double>& m) {
  ojson j = ojson::object();
  for (const auto& [k, v] : m) j["pass@" + std::to_string(k)] = v;
  return j;
}

}  // namespace

ojson BenchmarkResult::to_json() const {
  ojson j;
  j["records"] = ojson::array();
  for (const auto& r : records)
    j["records"].push_back({{"case_name", r.case_name},
                            {"trial_index", r.trial_index},
                            {"syntax_pass", r.syntax_pass},
                            {"functional_pass", r.functional_pass},
                            {"wall_s", r.wall_s},
                            {"note", r.note}});
  ojson s;
  s["sp"] = summary.sp;
  s["fp"] = summary.fp;
  s["cases"] = ojson::array();
  for (const auto& c : summary.cases)
    s["cases"].push_back({{"name", c.name},
                          {"scale", to_string(c.scale)},
                          {"trials", c.trials},
                          {"syntax_passes", c.syntax_passes},
                          {"functional_passes", c.functional_passes},
                          {"pass_at_k", k_map(c.pass_at_k)}});
  s["average_pass_at_k"] = k_map(summary.average_pass_at_k);
  s["average_pass_at_k_by_scale"] = ojson::object();
  for (const auto& [scale, m] : summary.average_pass_at_k_by_scale)
    s["average_pass_at_k_by_scale"][to_string(scale)] = k_map(m);
  j["summary"] = std::move(s);
  return j;
}

std::string BenchmarkResult::to_csv() const {
  std::ostringstream out;
  out << "case_name,trial_index,syntax_pass,functional_pass,wall_s\n";
  for (const auto& r : records)
    out << r.case_name << ',' << r.trial_index << ',' << r.syntax_pass << ',' << r.functional_pass << ','
        << r.wall_s << '\n';
  return out.str();
}

std::vector<BenchmarkCase> load_benchmark_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("benchmark directory " + dir.string() + " does not exist");
  std::vector<BenchmarkCase> cases;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const fs::path root = entry.path();
    if (!fs::exists(root / "spec.md")) continue;
    BenchmarkCase c;
    c.name = root.filename().string();
    c.spec_path = root / "spec.md";
    c.testbench_path = root / "testbench";
    const fs::path meta_path = root / "meta.json";
    if (!fs::exists(meta_path)) throw ConfigError("case " + c.name + " lacks meta.json");
    std::ifstream in(meta_path);
    try {
      const auto meta = json::parse(in);
      c.code_lines = meta.at("code_lines").get<std::int64_t>();
      c.submodule_count = meta.at("submodule_count").get<std::int64_t>();
      if (meta.contains("golden")) c.golden_path = root / meta.at("golden").get<std::string>();
    } catch (const json::exception& e) {
      throw ConfigError("case " + c.name + ": bad meta.json: " + e.what());
    }
    if (c.code_lines < 0 || c.submodule_count < 1)
      throw ConfigError("case " + c.name + ": code_lines must be >= 0 and submodule_count >= 1");
    cases.push_back(std::move(c));
  }
  std::sort(cases.begin(), cases.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  if (cases.empty()) throw EmptySetError("no benchmark cases under " + dir.string());
  return cases;
}

}  // namespace forge::evaluation
