#include "ladi/xcli/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ladi/arbaseline/ar.hpp"
#include "ladi/flowlat/fm.hpp"

#ifndef LADI_VERSION
#define LADI_VERSION "0.0.0"
#endif
#ifndef LADI_GIT_REV
#define LADI_GIT_REV "unknown"
#endif

namespace ladi::xcli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_id() { return std::string(LADI_VERSION) + "+" + LADI_GIT_REV; }

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Error("cannot write " + path.string());
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path) : out_(path), path_(path) {
    if (!out_) throw Error("cannot write " + path.string());
  }
  void write(const json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw Error("cannot write " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

std::uint64_t stage_seed(std::uint64_t seed, int stage) {
  return seed * 1000003ULL + 7919ULL * static_cast<std::uint64_t>(stage + 1);
}

numcore::CheckpointEntry make_entry(const std::string& name, json meta,
                                    const numcore::ParamVector& params,
                                    numcore::AdamState adam) {
  if (adam.m.size() != params.size()) adam = numcore::AdamState::zeros(params.size());
  return {name, std::move(meta), params, std::move(adam)};
}

json pass_value(const rl::EvalResult& r, int k) {
  const auto it = r.pass_at.find(k);
  return it == r.pass_at.end() ? json(nullptr) : json(it->second);
}

json trained_summary(const std::string& policy, const rl::EvalResult& init,
                     const rl::EvalResult& fin, std::span<const rl::StepMetrics> log) {
  double std_tail = 0.0;
  const std::size_t tail = std::min<std::size_t>(50, log.size());
  for (std::size_t i = log.size() - tail; i < log.size(); ++i) std_tail += log[i].reward_std;
  if (tail > 0) std_tail /= static_cast<double>(tail);
  return {{"policy", policy},
          {"steps", log.size()},
          {"final_mean_reward", fin.mean_reward},
          {"pass@1", pass_value(fin, 1)},
          {"pass@16", pass_value(fin, 16)},
          {"mode_coverage", fin.mode_coverage},
          {"entropy_start", log.empty() ? json(nullptr) : json(log.front().text_entropy)},
          {"entropy_end", log.empty() ? json(nullptr) : json(log.back().text_entropy)},
          {"reward_std_last50", std_tail},
          {"evaluations", {{policy + "_initial", init.to_json()}, {policy + "_final", fin.to_json()}}}};
}

numcore::Checkpoint load_stage_checkpoint(const fs::path& root, const std::string& stage) {
  const auto path = root / stage / "checkpoint.bin";
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + "; run the " + stage + " stage first");
  }
  return numcore::load_checkpoint(path);
}

numcore::ParamVector checked(const numcore::Checkpoint& ckpt, const std::string& name,
                             std::size_t expected) {
  if (!ckpt.has(name)) throw DataError("checkpoint has no '" + name + "' entry");
  const auto& p = ckpt.entry(name).params;
  if (p.size() != expected) {
    throw DataError("checkpoint entry '" + name + "' has " + std::to_string(p.size()) +
                    " parameters, the configured model expects " + std::to_string(expected));
  }
  return p;
}

textpol::TextPolicy ar_policy(const ExperimentConfig& c) {
  return arbaseline::make_ar_policy(c.model.question_size, c.model.max_len, c.ar_hidden);
}

struct Context {
  const ExperimentConfig& cfg;
  fs::path root;
  std::ostream* log;

  void note(const std::string& msg) const {
    if (log) *log << msg << std::endl;
  }
};

json stage_sft(const Context& ctx, const fs::path& dir) {
  const auto& c = ctx.cfg;
  Rng rng(stage_seed(c.seed, 0));
  const auto model = reasoner::LadiModel::build(c.model);
  auto params = reasoner::init_params(model, rng);
  JsonlWriter metrics(dir / "metrics.jsonl");
  numcore::Checkpoint ckpt;
  ckpt.seed = c.seed;
  ckpt.info = {{"stage", "sft"}, {"version", version_id()}};
  json summary = {{"stage", "sft"}};
  const auto ev = c.eval_config();

  if (c.env.kind == envs::TaskKind::kModSum) {
    const auto corpus = c.sft.corpus_path
                            ? reasoner::read_corpus(*c.sft.corpus_path, c.env.modsum)
                            : reasoner::make_modsum_corpus(c.env.modsum, c.sft.corpus_per_target, rng);
    reasoner::write_corpus(dir / "corpus.jsonl", corpus);
    ctx.note("sft: " + std::to_string(corpus.size()) + " traces");
    reasoner::SftState st;
    const auto records = reasoner::train_sft(model, params, st, corpus, c.sft.ladi, rng);
    for (const auto& r : records) {
      metrics.write({{"policy", "ladi"}, {"epoch", r.epoch}, {"flow_only", r.flow_only},
                     {"loss", r.loss}, {"fm", r.fm}, {"ce", r.ce}, {"kl", r.kl}});
    }
    const auto ar = ar_policy(c);
    auto ar_params = ar.init(rng, "ar");
    numcore::AdamState ar_state;
    arbaseline::ArSftConfig asc{c.sft.ar_epochs, c.sft.ladi.batch, c.sft.ladi.optim};
    const auto ce = arbaseline::train_ar_sft(ar, ar_params, ar_state, corpus, asc, rng);
    for (std::size_t i = 0; i < ce.size(); ++i) {
      metrics.write({{"policy", "ar"}, {"epoch", i}, {"ce", ce[i]}});
    }
    ckpt.entries.push_back(make_entry(kVelocityEntry, model.velocity.describe(), params.velocity, st.velocity));
    ckpt.entries.push_back(make_entry(kTextEntry, model.text.describe(), params.text, st.text));
    ckpt.entries.push_back(make_entry(kVaeEntry, model.vae.describe(), params.vae, st.vae));
    ckpt.entries.push_back(make_entry(kArEntry, ar.describe(), ar_params, ar_state));
    numcore::save_checkpoint(dir / "checkpoint.bin", ckpt);

    summary["corpus_size"] = corpus.size();
    summary["reconstruction_accuracy"] = reasoner::reconstruction_accuracy(model, params, corpus);
    const auto la = rl::evaluate_ladi(model, params, c.env, ev, rng);
    const auto ae = arbaseline::evaluate_ar(ar, ar_params.values(), c.env, ev, rng);
    summary["evaluations"] = {{"ladi", la.to_json()}, {"ar", ae.to_json()}};
  } else {
    const auto q = envs::mixture_question();
    std::vector<flowlat::FmExample> data;
    for (const auto& p : envs::sample_mixture(c.env.mixture,
                                              static_cast<std::size_t>(c.sft.mixture_samples),
                                              c.sft.mixture_spread, rng)) {
      data.push_back({{p[0], p[1]}, q.features});
    }
    flowlat::FlowTrainConfig fc{c.sft.ladi.epochs, c.sft.ladi.batch, c.sft.ladi.optim};
    numcore::AdamState st;
    const auto history = flowlat::train_flow(model.velocity, params.velocity, st, data, fc, rng);
    for (std::size_t i = 0; i < history.size(); ++i) {
      metrics.write({{"policy", "ladi"}, {"epoch", i}, {"flow_only", true}, {"loss", history[i]},
                     {"fm", history[i]}, {"ce", 0.0}, {"kl", 0.0}});
    }
    ckpt.entries.push_back(make_entry(kVelocityEntry, model.velocity.describe(), params.velocity, st));
    ckpt.entries.push_back(make_entry(kTextEntry, model.text.describe(), params.text, {}));
    ckpt.entries.push_back(make_entry(kVaeEntry, model.vae.describe(), params.vae, {}));
    numcore::save_checkpoint(dir / "checkpoint.bin", ckpt);
    summary["evaluations"] = {{"ladi", rl::evaluate_ladi(model, params, c.env, ev, rng).to_json()}};
  }
  return summary;
}

json stage_rl(const Context& ctx, const fs::path& dir) {
  const auto& c = ctx.cfg;
  const auto model = reasoner::LadiModel::build(c.model);
  const auto params = ladi_params_from(load_stage_checkpoint(ctx.root, "sft"), model);
  Rng rng(stage_seed(c.seed, 1));
  const auto ev = c.eval_config();
  const auto init = rl::evaluate_ladi(model, params, c.env, ev, rng);
  rl::LadiTrainer trainer(model, params, c.env, c.rl_config(), stage_seed(c.seed, 1) + 1);
  JsonlWriter metrics(dir / "metrics.jsonl");
  std::vector<rl::StepMetrics> log;
  for (int s = 0; s < c.rl.steps; ++s) {
    log.push_back(trainer.train_step());
    metrics.write(log.back().to_json());
    if ((s + 1) % 50 == 0) {
      ctx.note("rl: step " + std::to_string(s + 1) + " reward " + std::to_string(log.back().mean_reward));
    }
  }
  const auto fin = rl::evaluate_ladi(model, trainer.params(), c.env, ev, rng);
  numcore::Checkpoint ckpt;
  ckpt.seed = c.seed;
  ckpt.info = {{"stage", "rl"}, {"version", version_id()}, {"steps", c.rl.steps}};
  const auto& p = trainer.params();
  ckpt.entries.push_back(make_entry(kVelocityEntry, model.velocity.describe(), p.velocity, trainer.velocity_state()));
  ckpt.entries.push_back(make_entry(kTextEntry, model.text.describe(), p.text, trainer.text_state()));
  ckpt.entries.push_back(make_entry(kVaeEntry, model.vae.describe(), p.vae, {}));
  numcore::save_checkpoint(dir / "checkpoint.bin", ckpt);
  auto summary = trained_summary("ladi", init, fin, log);
  summary["stage"] = "rl";
  return summary;
}

json stage_baseline(const Context& ctx, const fs::path& dir) {
  const auto& c = ctx.cfg;
  const auto policy = ar_policy(c);
  const auto sft = load_stage_checkpoint(ctx.root, "sft");
  const auto params = checked(sft, kArEntry, policy.mlp().param_count());
  Rng rng(stage_seed(c.seed, 2));
  const auto ev = c.eval_config();
  const auto init = arbaseline::evaluate_ar(policy, params.values(), c.env, ev, rng);
  arbaseline::ArTrainer trainer(policy, params, c.env, c.ar_config(), stage_seed(c.seed, 2) + 1);
  JsonlWriter metrics(dir / "metrics.jsonl");
  std::vector<rl::StepMetrics> log;
  for (int s = 0; s < c.baseline.steps; ++s) {
    log.push_back(trainer.train_step());
    metrics.write(log.back().to_json());
    if ((s + 1) % 50 == 0) {
      ctx.note("rl-baseline: step " + std::to_string(s + 1) + " reward " +
               std::to_string(log.back().mean_reward));
    }
  }
  const auto fin = arbaseline::evaluate_ar(policy, trainer.params().values(), c.env, ev, rng);
  numcore::Checkpoint ckpt;
  ckpt.seed = c.seed;
  ckpt.info = {{"stage", "rl-baseline"}, {"version", version_id()}, {"steps", c.baseline.steps}};
  ckpt.entries.push_back(make_entry(kArEntry, policy.describe(), trainer.params(), trainer.state()));
  numcore::save_checkpoint(dir / "checkpoint.bin", ckpt);
  auto summary = trained_summary("ar", init, fin, log);
  summary["stage"] = "rl-baseline";
  return summary;
}

// Latest LaDi weights (rl, else sft) and latest AR weights (rl-baseline,
// else sft) of this run directory.
numcore::Checkpoint gather_for_eval(const fs::path& root) {
  numcore::Checkpoint out;
  out.info = {{"stage", "eval"}, {"version", version_id()}};
  auto take = [&](const std::vector<std::string>& stages, std::vector<const char*> names) {
    for (const auto& st : stages) {
      const auto path = root / st / "checkpoint.bin";
      if (!fs::exists(path)) continue;
      const auto ck = numcore::load_checkpoint(path);
      if (!std::all_of(names.begin(), names.end(), [&](const char* n) { return ck.has(n); })) continue;
      out.seed = ck.seed;
      for (const char* n : names) {
        auto e = ck.entry(n);
        e.meta["source"] = st;
        out.entries.push_back(std::move(e));
      }
      return;
    }
  };
  take({"rl", "sft"}, {kVelocityEntry, kTextEntry, kVaeEntry});
  take({"rl-baseline", "sft"}, {kArEntry});
  if (out.entries.empty()) {
    throw DataError("eval found no checkpoint under " + root.string() +
                    "; set eval.checkpoint or run a training stage");
  }
  return out;
}

json stage_eval(const Context& ctx, const fs::path& dir) {
  const auto& c = ctx.cfg;
  const auto ckpt = c.eval.checkpoint ? numcore::load_checkpoint(*c.eval.checkpoint)
                                      : gather_for_eval(ctx.root);
  Rng rng(stage_seed(c.seed, 3));
  const auto ev = c.eval_config();
  JsonlWriter metrics(dir / "metrics.jsonl");
  json evals = json::object();
  json summary = {{"stage", "eval"}};
  auto record = [&](const std::string& policy, const rl::EvalResult& r) {
    auto j = r.to_json();
    evals[policy] = j;
    j["policy"] = policy;
    metrics.write(j);
    summary[policy] = {{"final_mean_reward", r.mean_reward},
                       {"pass@1", pass_value(r, 1)},
                       {"pass@16", pass_value(r, 16)},
                       {"mode_coverage", r.mode_coverage},
                       {"entropy", r.entropy}};
  };
  if (ckpt.has(kVelocityEntry)) {
    const auto model = reasoner::LadiModel::build(c.model);
    record("ladi", rl::evaluate_ladi(model, ladi_params_from(ckpt, model), c.env, ev, rng));
  }
  if (ckpt.has(kArEntry) && c.env.kind == envs::TaskKind::kModSum) {
    const auto policy = ar_policy(c);
    const auto params = checked(ckpt, kArEntry, policy.mlp().param_count());
    record("ar", arbaseline::evaluate_ar(policy, params.values(), c.env, ev, rng));
  }
  if (evals.empty()) throw DataError("checkpoint holds no policy this task can evaluate");
  numcore::save_checkpoint(dir / "checkpoint.bin", ckpt);
  summary["evaluations"] = evals;
  return summary;
}

}  // namespace

reasoner::LadiParams ladi_params_from(const numcore::Checkpoint& ckpt,
                                      const reasoner::LadiModel& model) {
  reasoner::LadiParams p;
  p.velocity = checked(ckpt, kVelocityEntry, model.velocity.mlp().param_count());
  p.text = checked(ckpt, kTextEntry, model.text.mlp().param_count());
  Rng probe(0);
  p.vae = checked(ckpt, kVaeEntry, model.vae.init(probe).size());
  return p;
}

RunReport run(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  RunReport report;
  report.dir = config.output_dir;
  fs::create_directories(report.dir);
  write_json(report.dir / "config.json", to_json(config));
  write_json(report.dir / "version.json",
             {{"version", version_id()}, {"release", LADI_VERSION}, {"revision", LADI_GIT_REV}});
  const Context ctx{config, report.dir, log};

  for (const auto& stage : config.stages) {
    const auto dir = report.dir / stage;
    fs::create_directories(dir);
    std::error_code ec;
    fs::remove(dir / "error.txt", ec);
    StageOutcome outcome{stage, false, ""};
    ctx.note("stage " + stage);
    try {
      json summary;
      if (stage == "sft") summary = stage_sft(ctx, dir);
      else if (stage == "rl") summary = stage_rl(ctx, dir);
      else if (stage == "rl-baseline") summary = stage_baseline(ctx, dir);
      else summary = stage_eval(ctx, dir);
      summary["status"] = "ok";
      summary["version"] = version_id();
      write_json(dir / "summary.json", summary);
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
      std::ofstream(dir / "error.txt") << e.what() << "\n";
      try {
        write_json(dir / "summary.json", {{"stage", stage}, {"status", "failed"},
                                          {"error", e.what()}, {"version", version_id()}});
      } catch (const std::exception&) {
      }
      ctx.note("stage " + stage + " failed: " + e.what());
    }
    report.stages.push_back(outcome);
    if (!outcome.ok) {
      report.status = 1;
      break;
    }
  }
  json stages = json::array();
  for (const auto& s : report.stages) {
    stages.push_back({{"stage", s.stage}, {"ok", s.ok}, {"error", s.error}});
  }
  write_json(report.dir / "run.json", {{"status", report.status}, {"stages", stages}});
  return report;
}

std::vector<rl::StepMetrics> read_metrics_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics log " + path.string());
  std::vector<rl::StepMetrics> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(n);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError(where + ": not a JSON object");
    try {
      out.push_back(rl::StepMetrics::from_json(j));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

std::string series_csv(std::span<const rl::StepMetrics> log) {
  std::string out = "step,mean_reward,reward_std,entropy\n";
  for (const auto& m : log) {
    out += std::to_string(m.step) + "," + num(m.mean_reward) + "," + num(m.reward_std) + "," +
           num(m.text_entropy) + "\n";
  }
  return out;
}

std::string pass_at_k_csv(const rl::EvalResult& result, std::vector<int> ks) {
  if (result.samples < 1 || result.correct.empty()) {
    throw DataError("eval record has no per-question correct counts");
  }
  const int n = result.samples;
  if (ks.empty()) {
    for (int k = 1; k < n; k *= 2) ks.push_back(k);
    ks.push_back(n);
  }
  std::string out = "k,pass_at_k\n";
  for (int k : ks) {
    double v = 0.0;
    for (int c : result.correct) v += envs::pass_at_k(n, c, k);
    out += std::to_string(k) + "," + num(v / static_cast<double>(result.correct.size())) + "\n";
  }
  return out;
}

std::vector<fs::path> export_plot_data(const fs::path& run_dir, const fs::path& out_dir) {
  if (!fs::is_directory(run_dir)) throw DataError("run directory not found: " + run_dir.string());
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& [stage, policy] : {std::pair{"rl", "ladi"}, std::pair{"rl-baseline", "ar"}}) {
    const auto path = run_dir / stage / "metrics.jsonl";
    if (!fs::exists(path)) continue;
    const auto log = read_metrics_log(path);
    const auto file = out_dir / (std::string(policy) + "_series.csv");
    write_text(file, series_csv(log));
    written.push_back(file);
  }
  for (const auto& stage : known_stages()) {
    const auto path = run_dir / stage / "summary.json";
    if (!fs::exists(path)) continue;
    std::ifstream in(path);
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("malformed summary " + path.string());
    if (!j.contains("evaluations")) continue;
    for (const auto& [label, ev] : j.at("evaluations").items()) {
      const auto file = out_dir / (stage + "_" + label + "_passk.csv");
      try {
        write_text(file, pass_at_k_csv(rl::EvalResult::from_json(ev)));
      } catch (const DataError& e) {
        throw DataError(path.string() + " [" + label + "]: " + e.what());
      }
      written.push_back(file);
    }
  }
  if (written.empty()) throw DataError("no metrics logs or summaries under " + run_dir.string());
  return written;
}

}  // namespace ladi::xcli
