// nlmilp command line.
//
//   nlmilp run <instance.json> [--config c.json] [--state out.json]
//   nlmilp init <project-dir> (--instance f.json | --description text) [--config c.json]
//   nlmilp stage <project-dir> <stage>
//   nlmilp eval --suite <dir> --transcript <file> [--ablate name]... [--workers n] [--csv out.csv]
//   nlmilp sift {columns|rows} <model.lp> [--seed n] [--init-k k] [--gap g]
//   nlmilp equiv <a.lp> <b.lp>
//   nlmilp lp write <in.lp | --project dir> [-o out.lp]
//   nlmilp lp check <file.lp>
//   nlmilp transcript build --instance f.json --answers a.json... -o out.json [--append]
//   nlmilp serve [--config service.json]
//
// Errors print {"error": code, "message": ...} on stderr. Exit codes: 0 ok,
// 1 error (or "not equivalent"), 2 stage precondition.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>

#include "nlmilp/equivalence.hpp"
#include "nlmilp/error.hpp"
#include "nlmilp/eval.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/project.hpp"
#include "nlmilp/service.hpp"
#include "nlmilp/sifting.hpp"
#include "nlmilp/solver.hpp"

using namespace nlmilp;
namespace fs = std::filesystem;
namespace ju = json_util;
using nlohmann::json;

namespace {

struct ConfigFile {
  json j = json::object();
  fs::path base = fs::current_path();
};

ConfigFile read_config(const std::string& path) {
  ConfigFile c;
  if (path.empty()) return c;
  c.j = ju::read_file(path);
  c.base = fs::absolute(path).parent_path();
  return c;
}

int fail(std::string_view code, const std::string& message, int status = 1) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << std::endl;
  return status;
}

GroundModel read_model(const std::string& path) { return read_lp_file(path); }

service::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"natural-language to MILP engine"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run every stage on an instance and print the outcome");
  std::string run_instance, run_config, run_state;
  run->add_option("instance", run_instance, "instance JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--config", run_config, "run configuration JSON")->check(CLI::ExistingFile);
  run->add_option("--state", run_state, "write the final state here");

  // init / stage
  auto* init = app.add_subcommand("init", "create a project directory");
  std::string init_dir, init_instance, init_description, init_config;
  init->add_option("dir", init_dir)->required();
  auto* init_src = init->add_option("--instance", init_instance)->check(CLI::ExistingFile);
  init->add_option("--description", init_description)->excludes(init_src);
  init->add_option("--config", init_config)->check(CLI::ExistingFile);

  auto* stage = app.add_subcommand("stage", "run one stage of a project");
  std::string stage_dir, stage_name;
  stage->add_option("project", stage_dir)->required();
  stage->add_option("stage", stage_name)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "score a suite");
  std::string ev_suite, ev_transcript, ev_config, ev_csv;
  std::vector<std::string> ev_ablate;
  int ev_workers = 1;
  ev->add_option("--suite", ev_suite)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--transcript", ev_transcript)->required()->check(CLI::ExistingFile);
  ev->add_option("--config", ev_config)->check(CLI::ExistingFile);
  ev->add_option("--ablate", ev_ablate, "disable_debug, disable_extraction_ec, disable_modeling_ec, disable_llm_feedback");
  ev->add_option("--workers", ev_workers)->check(CLI::PositiveNumber);
  ev->add_option("--csv", ev_csv, "also write the CSV report here");

  // sift
  auto* sift = app.add_subcommand("sift", "column or row sifting; prints the history CSV");
  std::string sift_mode, sift_model;
  std::uint64_t sift_seed = 1;
  std::optional<int> sift_k;
  std::optional<double> sift_gap;
  sift->add_option("mode", sift_mode)->required()->check(CLI::IsMember({"columns", "rows"}));
  sift->add_option("model", sift_model)->required()->check(CLI::ExistingFile);
  sift->add_option("--seed", sift_seed);
  sift->add_option("--init-k", sift_k);
  sift->add_option("--gap", sift_gap);

  // equiv
  auto* eq = app.add_subcommand("equiv", "check two formulations for equivalence");
  std::string eq_a, eq_b;
  long eq_budget = 10000000;
  eq->add_option("a", eq_a)->required()->check(CLI::ExistingFile);
  eq->add_option("b", eq_b)->required()->check(CLI::ExistingFile);
  eq->add_option("--budget", eq_budget);

  // lp
  auto* lp = app.add_subcommand("lp", "LP files");
  lp->require_subcommand(1);
  auto* lp_write = lp->add_subcommand("write", "write canonical LP text");
  std::string lpw_in, lpw_project, lpw_out;
  lp_write->add_option("input", lpw_in)->check(CLI::ExistingFile);
  lp_write->add_option("--project", lpw_project);
  lp_write->add_option("-o,--out", lpw_out);
  auto* lp_check = lp->add_subcommand("check", "parse and validate an LP file");
  std::string lpc_in;
  lp_check->add_option("input", lpc_in)->required()->check(CLI::ExistingFile);

  // transcript
  auto* tr = app.add_subcommand("transcript", "transcripts");
  tr->require_subcommand(1);
  auto* tr_build = tr->add_subcommand("build", "record a transcript from answers files");
  std::string trb_instance, trb_out, trb_config;
  std::vector<std::string> trb_answers;
  bool trb_append = false;
  tr_build->add_option("--instance", trb_instance)->required()->check(CLI::ExistingFile);
  tr_build->add_option("--answers", trb_answers)->required()->check(CLI::ExistingFile);
  tr_build->add_option("--config", trb_config)->check(CLI::ExistingFile);
  tr_build->add_option("-o,--out", trb_out)->required();
  tr_build->add_flag("--append", trb_append, "merge into an existing transcript");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP service");
  std::string serve_config;
  std::optional<int> serve_port;
  serve->add_option("--config", serve_config)->check(CLI::ExistingFile);
  serve->add_option("--port", serve_port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("Usage", e.what(), 1);
  }

  try {
    if (*run) {
      ConfigFile cfg = read_config(run_config);
      auto config = pipeline::run_config_from_json(cfg.j, run_config.empty() ? "config" : run_config);
      eval::Instance in = eval::load_instance(run_instance);
      eval::InstanceRun r = eval::run_instance(in, config, cfg.base);
      if (!run_state.empty()) save_state(r.state, run_state);
      json out = pipeline::outcome_to_json(*r.run.outcome);
      out["id"] = in.id;
      out["score"] = eval::record_to_json(r.record);
      std::cout << out.dump(2) << std::endl;
      return r.run.outcome->status == SolveStatus::kError ? 1 : 0;
    }

    if (*init) {
      ConfigFile cfg = read_config(init_config);
      std::string description = init_description;
      std::map<std::string, Tensor> data;
      if (!init_instance.empty()) {
        eval::Instance in = eval::load_instance(init_instance);
        description = in.description;
        data = in.data;
      }
      if (description.empty()) return fail("InvalidArgument", "need --instance or --description");
      auto p = project::create(init_dir, fs::path(init_dir).filename().string(), description, cfg.j, cfg.base, data);
      std::cout << project::report(p).dump(2) << std::endl;
      return 0;
    }

    if (*stage) {
      auto p = project::open(stage_dir);
      pipeline::Stage st = pipeline::stage_from_string(stage_name);
      try {
        project::run_stage(p, st);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kStagePrecondition) return fail(e.code_name(), e.what(), 2);
        throw;
      }
      std::cout << project::report(p).dump(2) << std::endl;
      return 0;
    }

    if (*ev) {
      ConfigFile cfg = read_config(ev_config);
      auto config = pipeline::run_config_from_json(cfg.j, ev_config.empty() ? "config" : ev_config);
      config.backend = llm::BackendSpec{};
      config.backend.kind = llm::BackendSpec::Kind::kScripted;
      config.backend.transcript = fs::absolute(ev_transcript).string();
      eval::Ablation ablation;
      for (const auto& a : ev_ablate) eval::set_ablation(ablation, a);
      auto suite = eval::load_suite(ev_suite);
      auto report = eval::run_suite(suite, config, ablation, cfg.base, ev_workers);
      if (!ev_csv.empty()) ju::write_text(ev_csv, eval::report_csv(report));
      std::cout << eval::report_to_json(report).dump(2) << std::endl;
      return 0;
    }

    if (*sift) {
      GroundModel model = read_model(sift_model);
      sift::SiftConfig sc;
      sc.seed = sift_seed;
      sc.init_k = sift_k;
      sc.gap_stop = sift_gap;
      sift::SiftResult r;
      if (sift_mode == "columns") {
        auto conv = sift::to_standard_form(model);
        r = sift::sift_columns(conv.form, sc);
      } else {
        r = sift::sift_constraints(model, sc);
      }
      std::cout << sift::history_csv(r.history);
      std::cerr << json{{"status", std::string(to_string(r.solution.status))},
                        {"objective", r.solution.objective ? json(*r.solution.objective) : json(nullptr)},
                        {"active", r.active.size()},
                        {"stop", r.stop}}
                       .dump()
                << std::endl;
      return r.solution.status == SolveStatus::kOptimal ? 0 : 1;
    }

    if (*eq) {
      auto g1 = equiv::to_graph(read_model(eq_a));
      auto g2 = equiv::to_graph(read_model(eq_b));
      auto r = equiv::check_equivalence(g1, g2, equiv::SearchOptions{eq_budget});
      std::cout << equiv::result_to_json(g1, g2, r).dump(2) << std::endl;
      return r.equivalent ? 0 : 1;
    }

    if (*lp_write) {
      GroundModel m;
      if (!lpw_project.empty()) {
        auto p = project::open(lpw_project);
        auto f = project::artifact(p, "lp");
        if (!f) return fail("StagePrecondition", "project has no assembled model", 2);
        m = read_model(f->string());
      } else if (!lpw_in.empty()) {
        m = read_model(lpw_in);
      } else {
        return fail("InvalidArgument", "need an input file or --project");
      }
      std::string text = write_lp(m);
      if (lpw_out.empty()) {
        std::cout << text;
      } else {
        ju::write_text(lpw_out, text);
      }
      return 0;
    }

    if (*lp_check) {
      GroundModel m = read_model(lpc_in);
      json diags = json::array();
      bool errors = false;
      for (const auto& d : validate(m)) {
        bool err = d.severity == Diagnostic::Severity::kError;
        errors = errors || err;
        diags.push_back({{"severity", err ? "error" : "warning"}, {"code", d.code}, {"message", d.message}});
      }
      std::cout << json{{"rows", m.num_rows()},
                        {"cols", m.num_cols()},
                        {"sos", m.sos.size()},
                        {"indicators", m.indicators.size()},
                        {"diagnostics", diags}}
                       .dump(2)
                << std::endl;
      return errors ? 1 : 0;
    }

    if (*tr_build) {
      ConfigFile cfg = read_config(trb_config);
      auto config = pipeline::run_config_from_json(cfg.j, trb_config.empty() ? "config" : trb_config);
      std::vector<fs::path> files(trb_answers.begin(), trb_answers.end());
      llm::AnswerBackend backend(llm::merge_answer_files(files));
      eval::Instance in = eval::load_instance(trb_instance);
      pipeline::Pipeline p(config, backend);
      State state;
      state.set_description(in.description);
      pipeline::PipelineRun pr;
      pr.supplied_data = in.data;
      p.run_all(state, pr);
      json transcript = json::object();
      if (trb_append && fs::exists(trb_out)) transcript = ju::read_file(trb_out);
      for (const auto& [fp, text] : backend.recorded()) transcript[fp] = text;
      ju::write_file(trb_out, transcript);
      std::cout << json{{"instance", in.id}, {"recorded", backend.recorded().size()}, {"total", transcript.size()}}.dump()
                << std::endl;
      return 0;
    }

    if (*serve) {
      auto sc = service::load_config(serve_config.empty() ? std::nullopt : std::optional<fs::path>(serve_config));
      if (serve_port) sc.port = *serve_port;
      service::Service s(sc);
      g_service = &s;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << sc.host << ":" << sc.port << std::endl;
      s.listen();
      g_service = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    return fail(e.code_name(), e.what(), e.code() == ErrorCode::kStagePrecondition ? 2 : 1);
  } catch (const std::exception& e) {
    return fail("Internal", e.what());
  }
  return 0;
}
