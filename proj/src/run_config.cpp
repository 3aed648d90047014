#include "msbo/run_config.hpp"

#include <sstream>
#include <stdexcept>

#include "msbo/bench.hpp"

namespace msbo {

void RunConfig::validate() const {
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (iterations && *iterations < 0) throw std::invalid_argument("config: iters must be >= 0");
  if (!fantasy_bench) {
    if (functions.empty()) throw std::invalid_argument("config: missing key 'functions'");
    for (const auto& name : functions) benchmark_by_name(name);  // throws on unknown names
    if (policies.empty()) throw std::invalid_argument("config: missing key 'policy'");
    for (const auto& spec : policies) {
      PolicyConfig policy = parse_policy(spec);
      if (!fantasy_counts.empty()) {
        if (policy.type != PolicyType::KStep && policy.type != PolicyType::KPath)
          throw std::invalid_argument(
              "config: fantasy.counts only applies to k-step/k-path policies");
        if (static_cast<int>(fantasy_counts.size()) != policy.horizon - 1)
          throw std::invalid_argument(
              "config: fantasy.counts length conflicts with the policy horizon");
        policy.fantasies = fantasy_counts;
      }
      policy.validate();
    }
  } else {
    if (bench_reps < 1) throw std::invalid_argument("config: bench.reps must be >= 1");
    for (int n : bench_sizes)
      if (n < 1 || n > 2048) throw std::invalid_argument("config: bench sizes must be in [1,2048]");
    for (int m : bench_fantasies)
      if (m < 1) throw std::invalid_argument("config: bench fantasy counts must be >= 1");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    try {
      size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key '" + key + "' expects integers, got '" + item + "'");
    }
  }
  return out;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + s + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "functions" || key == "function") {
        config.functions = split_list(value);
      } else if (key == "policy" || key == "policies") {
        config.policies = split_list(value);
      } else if (key == "repeats") {
        config.repeats = std::stoi(value);
      } else if (key == "seed") {
        config.seed = std::stoull(value);
      } else if (key == "iters" || key == "iterations") {
        config.iterations = std::stoi(value);
      } else if (key == "out") {
        config.out_dir = value;
      } else if (key == "threads") {
        config.threads = std::stoi(value);
      } else if (key == "fantasy.counts") {
        config.fantasy_counts = split_ints(value, key);
      } else if (key == "zero_timing") {
        config.zero_timing = parse_bool(value, key);
      } else if (key == "fantasy_bench") {
        config.fantasy_bench = parse_bool(value, key);
      } else if (key == "bench.sizes") {
        config.bench_sizes = split_ints(value, key);
      } else if (key == "bench.fantasies") {
        config.bench_fantasies = split_ints(value, key);
      } else if (key == "bench.reps") {
        config.bench_reps = std::stoi(value);
      } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& err) {
      if (std::string(err.what()).rfind("config:", 0) == 0) throw;
      throw std::invalid_argument("config: bad value for key '" + key + "': " + value);
    }
  }
  return config;
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

std::string join_ints(const std::vector<int>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(items[i]);
  }
  return out;
}

}  // namespace

std::string emit_config_text(const RunConfig& c) {
  std::ostringstream out;
  out << "functions = " << join(c.functions) << "\n";
  out << "policy = " << join(c.policies) << "\n";
  out << "repeats = " << c.repeats << "\n";
  out << "seed = " << c.seed << "\n";
  if (c.iterations) out << "iters = " << *c.iterations << "\n";
  out << "out = " << c.out_dir << "\n";
  out << "threads = " << c.threads << "\n";
  if (!c.fantasy_counts.empty()) out << "fantasy.counts = " << join_ints(c.fantasy_counts) << "\n";
  out << "zero_timing = " << (c.zero_timing ? "true" : "false") << "\n";
  out << "fantasy_bench = " << (c.fantasy_bench ? "true" : "false") << "\n";
  out << "bench.sizes = " << join_ints(c.bench_sizes) << "\n";
  out << "bench.fantasies = " << join_ints(c.bench_fantasies) << "\n";
  out << "bench.reps = " << c.bench_reps << "\n";
  return out.str();
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.functions == b.functions && a.policies == b.policies && a.repeats == b.repeats &&
         a.seed == b.seed && a.iterations == b.iterations && a.out_dir == b.out_dir &&
         a.threads == b.threads && a.fantasy_counts == b.fantasy_counts &&
         a.zero_timing == b.zero_timing && a.fantasy_bench == b.fantasy_bench &&
         a.bench_sizes == b.bench_sizes && a.bench_fantasies == b.bench_fantasies &&
         a.bench_reps == b.bench_reps;
}

}  // namespace msbo
