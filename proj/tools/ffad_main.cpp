#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ffad/common.hpp"
#include "ffad/detect.hpp"
#include "ffad/pipeline.hpp"

// Exit codes: 0 ok, 1 usage, 2 config, 3 data, 4 numeric abort.

namespace {

using stage_fn = void (*)(const ffad::pipeline::run_config&,
                          const ffad::pipeline::stage_options&);

struct cli_state {
  std::string config_path;
  bool force = false;
  stage_fn stage = nullptr;
  // evaluate-only direct mode
  bool has_precision = false, has_recall = false;
  double precision = 0.0, recall = 0.0;
};

CLI::App* add_stage(CLI::App& app, cli_state& st, const char* name, const char* desc,
                    stage_fn fn, bool config_required = true) {
  auto* cmd = app.add_subcommand(name, desc);
  auto* opt = cmd->add_option("-c,--config", st.config_path, "run config JSON");
  if (config_required) opt->required();
  cmd->add_flag("-f,--force", st.force, "overwrite existing stage outputs");
  cmd->callback([&st, fn]() { st.stage = fn; });
  return cmd;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ffad: frequency-domain anomaly detection over service logs and metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("ffad ") + ffad::pipeline::tool_version);

  cli_state st;
  namespace pl = ffad::pipeline;
  add_stage(app, st, "synth", "generate the synthetic benchmark dataset", &pl::stage_synth);
  add_stage(app, st, "parse-logs", "mine log templates and assign line ids",
            &pl::stage_parse_logs);
  add_stage(app, st, "preprocess", "normalize metrics and build the windowed series",
            &pl::stage_preprocess);
  auto* train_cmd = add_stage(app, st, "train", "fit the reconstruction model",
                              &pl::stage_train);
  bool resume = false;
  train_cmd->add_flag("--resume", resume, "continue training from the existing checkpoint");
  add_stage(app, st, "detect", "score test windows and fit the threshold",
            &pl::stage_detect);
  auto* eval_cmd = add_stage(app, st, "evaluate", "score predictions against labels",
                             &pl::stage_evaluate, false);
  eval_cmd->add_option("--precision", st.precision, "direct mode: precision value")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--recall", st.recall, "direct mode: recall value")
      ->check(CLI::Range(0.0, 1.0));
  add_stage(app, st, "report", "export per-window scores and mask firing rates",
            &pl::stage_report);
  add_stage(app, st, "run-all", "run every stage in order", &pl::run_all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems are exit 1, --help/--version exit 0
  }

  try {
    if (st.stage == &pl::stage_evaluate) {
      st.has_precision = eval_cmd->count("--precision") > 0;
      st.has_recall = eval_cmd->count("--recall") > 0;
      if (st.has_precision != st.has_recall)
        throw ffad::config_error("evaluate direct mode needs both --precision and --recall");
      if (st.has_precision) {
        std::printf("%s\n", ffad::fmt_double(ffad::detect::f1_from_pr(st.precision, st.recall)).c_str());
        return 0;
      }
      if (st.config_path.empty())
        throw ffad::config_error("evaluate needs --config, or --precision with --recall");
    }
    auto cfg = pl::load_run_config(st.config_path);
    pl::stage_options opt;
    opt.force = st.force;
    opt.resume = resume;
    opt.log = &std::cout;
    st.stage(cfg, opt);
    return 0;
  } catch (const ffad::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ffad::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const ffad::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
