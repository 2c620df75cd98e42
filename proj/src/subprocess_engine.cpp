#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/solver.hpp"

namespace nlmilp {

namespace {

namespace fs = std::filesystem;

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

SolveStatus status_from_text(const std::string& s) {
  if (s == "Optimal") return SolveStatus::kOptimal;
  if (s == "Infeasible") return SolveStatus::kInfeasible;
  if (s == "Unbounded") return SolveStatus::kUnbounded;
  if (s == "TimeLimit") return SolveStatus::kTimeLimit;
  return SolveStatus::kError;
}

class SubprocessEngine : public Engine {
 public:
  SubprocessEngine(std::string id, std::string command) : id_(std::move(id)), command_(std::move(command)) {}

  std::string id() const override { return id_; }
  EngineCapabilities capabilities() const override {
    EngineCapabilities c;
    c.duals = true;
    return c;
  }

  Solution solve_native(const GroundModel& model, const SolverParams& params) const override {
    static std::atomic<long> counter{0};
    auto start = std::chrono::steady_clock::now();
    fs::path dir = fs::temp_directory_path() /
                   ("nlmilp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(dir);
    fs::path lp = dir / "model.lp";
    fs::path out = dir / "solution.txt";
    json_util::write_text(lp, write_lp(model));
    std::string cmd = command_ + " " + shell_quote(lp.string()) + " " + shell_quote(out.string()) + " " +
                      format_number(params.time_limit) + " > " + shell_quote((dir / "log.txt").string()) + " 2>&1";
    int rc = std::system(cmd.c_str());
    Solution s;
    std::ifstream in(out);
    if (!in) {
      std::string log;
      std::error_code ec;
      if (fs::exists(dir / "log.txt", ec)) log = json_util::read_text(dir / "log.txt");
      fs::remove_all(dir, ec);
      throw Error(ErrorCode::kEngineUnavailable,
                  "engine '" + id_ + "' produced no solution (exit " + std::to_string(rc) + "): " + log);
    }
    std::string line;
    std::vector<double> duals(model.num_rows(), 0.0);
    std::vector<double> reduced(model.num_cols(), 0.0);
    bool have_duals = false;
    std::map<std::string, int> row_index;
    for (int i = 0; i < model.num_rows(); ++i) row_index[model.rows[i].name] = i;
    std::map<std::string, int> col_index;
    for (int j = 0; j < model.num_cols(); ++j) col_index[model.col_names[j]] = j;
    s.primal.assign(model.num_cols(), 0.0);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key == "status") {
        std::string v;
        ls >> v;
        s.status = status_from_text(v);
      } else if (key == "objective") {
        double v;
        ls >> v;
        s.objective = v;
      } else if (key == "iterations") {
        ls >> s.stats.iterations;
      } else if (key == "message") {
        std::getline(ls >> std::ws, s.message);
      } else if (key == "col" || key == "dual" || key == "reduced") {
        std::string name;
        double v;
        ls >> name >> v;
        if (key == "dual") {
          if (auto it = row_index.find(name); it != row_index.end()) duals[it->second] = v, have_duals = true;
        } else if (auto it = col_index.find(name); it != col_index.end()) {
          (key == "col" ? s.primal : reduced)[it->second] = v;
        }
      }
    }
    in.close();
    std::error_code ec;
    fs::remove_all(dir, ec);
    if (s.status == SolveStatus::kError && s.message.find("not installed") != std::string::npos) {
      throw Error(ErrorCode::kEngineUnavailable, "engine '" + id_ + "': " + s.message);
    }
    if (s.status != SolveStatus::kOptimal) {
      s.primal.clear();
      s.objective.reset();
    } else if (have_duals || model.num_rows() == 0) {
      s.duals = std::move(duals);
      s.reduced_costs = std::move(reduced);
    }
    s.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
  }

 private:
  std::string id_;
  std::string command_;
};

}  // namespace

std::unique_ptr<Engine> make_subprocess_engine(std::string id, std::string command) {
  return std::make_unique<SubprocessEngine>(std::move(id), std::move(command));
}

}  // namespace nlmilp
