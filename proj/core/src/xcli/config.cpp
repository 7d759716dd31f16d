#include "ladi/xcli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace ladi::xcli {

using nlohmann::json;

namespace {

// Reads fields from one JSON object and remembers which keys were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    const json* v = raw(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    const json* v = raw(key);
    if (!v) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    T x{};
    get(key, x);
    out = x;
  }

  // Marks the key as known; null when absent.
  const json* raw(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key: " + where(item.key()));
    }
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void with_child(Section& parent, const char* key, F&& read) {
  const json* v = parent.raw(key);
  if (!v) return;
  Section s(*v, parent.where(key));
  read(s);
  s.finish();
}

json adam_json(const numcore::AdamWConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2},
          {"weight_decay", a.weight_decay}, {"eps", a.eps}};
}

void read_adam(Section& s, numcore::AdamWConfig& a) {
  s.get("lr", a.lr);
  s.get("beta1", a.beta1);
  s.get("beta2", a.beta2);
  s.get("weight_decay", a.weight_decay);
  s.get("eps", a.eps);
}

json sampler_json(const flowlat::SamplerConfig& s) {
  json j{{"steps", s.steps},
         {"mode", flowlat::to_string(s.mode)},
         {"noise_level", s.noise_level},
         {"eta", s.eta ? json(*s.eta) : json(nullptr)},
         {"time_clamp", s.time_clamp},
         {"simplified_logprob", s.simplified_logprob},
         {"cfg", s.cfg}};
  if (s.window) {
    j["window"] = {{"size", s.window->size},
                   {"range", {s.window->range_lo, s.window->range_hi}}};
  } else {
    j["window"] = nullptr;
  }
  return j;
}

void read_sampler(Section& s, flowlat::SamplerConfig& c) {
  s.get("steps", c.steps);
  std::string mode = flowlat::to_string(c.mode);
  s.get("mode", mode);
  c.mode = flowlat::sampler_mode_from_string(mode);
  s.get("noise_level", c.noise_level);
  s.get_optional("eta", c.eta);
  s.get("time_clamp", c.time_clamp);
  s.get("simplified_logprob", c.simplified_logprob);
  s.get("cfg", c.cfg);
  if (const json* w = s.raw("window")) {
    if (w->is_null()) {
      c.window.reset();
    } else {
      flowlat::SdeWindow win = c.window.value_or(flowlat::SdeWindow{});
      Section ws(*w, s.where("window"));
      ws.get("size", win.size);
      std::vector<int> range{win.range_lo, win.range_hi};
      ws.get("range", range);
      if (range.size() != 2) throw ConfigError(ws.where("range") + " must have two entries");
      win.range_lo = range[0];
      win.range_hi = range[1];
      ws.finish();
      c.window = win;
    }
  }
}

json env_json(const envs::EnvSpec& e) {
  json centers = json::array();
  for (const auto& c : e.mixture.centers) centers.push_back({c[0], c[1]});
  return {{"task", envs::to_string(e.kind)},
          {"modsum", {{"length", e.modsum.length}, {"modulus", e.modsum.modulus}}},
          {"mixture", {{"centers", centers}, {"radius", e.mixture.radius}}}};
}

void read_env(Section& s, envs::EnvSpec& e) {
  std::string task = envs::to_string(e.kind);
  s.get("task", task);
  e.kind = envs::task_kind_from_string(task);
  with_child(s, "modsum", [&](Section& m) {
    m.get("length", e.modsum.length);
    m.get("modulus", e.modsum.modulus);
  });
  with_child(s, "mixture", [&](Section& m) {
    std::vector<std::array<double, 2>> centers = e.mixture.centers;
    m.get("centers", centers);
    e.mixture.centers = centers;
    m.get("radius", e.mixture.radius);
  });
}

json model_json(const reasoner::ModelShape& m, std::size_t ar_hidden) {
  return {{"vocab", envs::kVocab},
          {"rows", m.rows},
          {"cols", m.cols},
          {"max_len", m.max_len},
          {"text_hidden", m.text_hidden},
          {"velocity_hidden", m.velocity_hidden},
          {"velocity_input_scale", m.velocity_input_scale},
          {"velocity_output_scale", m.velocity_output_scale},
          {"vae_embed", m.vae_embed},
          {"vae_hidden", m.vae_hidden},
          {"ar_hidden", ar_hidden}};
}

void read_model(Section& s, reasoner::ModelShape& m, std::size_t& ar_hidden) {
  int vocab = envs::kVocab;
  s.get("vocab", vocab);
  if (vocab != envs::kVocab) {
    throw ConfigError("model.vocab is fixed at " + std::to_string(envs::kVocab));
  }
  s.get("rows", m.rows);
  s.get("cols", m.cols);
  s.get("max_len", m.max_len);
  s.get("text_hidden", m.text_hidden);
  s.get("velocity_hidden", m.velocity_hidden);
  s.get("velocity_input_scale", m.velocity_input_scale);
  s.get("velocity_output_scale", m.velocity_output_scale);
  s.get("vae_embed", m.vae_embed);
  s.get("vae_hidden", m.vae_hidden);
  s.get("ar_hidden", ar_hidden);
}

json grpo_json(const rl::GrpoConfig& g) {
  return {{"n", g.n},
          {"m", g.m},
          {"eps_z", g.eps_z},
          {"eps_text", {g.eps_text_low, g.eps_text_high}},
          {"w_lat", g.w_lat},
          {"w_text", g.w_text},
          {"kl_beta", g.beta_kl},
          {"eps_std", g.eps_std},
          {"per_token_mean", g.per_token_mean},
          {"epochs", g.epochs}};
}

void read_grpo(Section& s, rl::GrpoConfig& g) {
  s.get("n", g.n);
  s.get("m", g.m);
  s.get("eps_z", g.eps_z);
  std::vector<double> eps{g.eps_text_low, g.eps_text_high};
  s.get("eps_text", eps);
  if (eps.size() != 2) throw ConfigError(s.where("eps_text") + " must have two entries");
  g.eps_text_low = eps[0];
  g.eps_text_high = eps[1];
  s.get("w_lat", g.w_lat);
  s.get("w_text", g.w_text);
  s.get("kl_beta", g.beta_kl);
  s.get("eps_std", g.eps_std);
  s.get("per_token_mean", g.per_token_mean);
  s.get("epochs", g.epochs);
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.train_sampler = flowlat::SamplerConfig{};
  c.eval_sampler = rl::default_eval_config().sampler;
  return c;
}

void ExperimentConfig::validate() const {
  env.validate();
  if (model.question_size != env.feature_size()) {
    throw ConfigError("model.question_size must match the task feature size");
  }
  if (model.rows == 0 || model.cols == 0) throw ConfigError("latent block must be non-empty");
  if (env.kind == envs::TaskKind::kModSum &&
      model.max_len < static_cast<std::size_t>(env.modsum.length) + 1) {
    throw ConfigError("model.max_len must fit the answer plus EOS");
  }
  if (ar_hidden == 0) throw ConfigError("model.ar_hidden must be >= 1");
  if (model.text_hidden == 0) throw ConfigError("model.text_hidden must be >= 1");
  if (model.vae_embed == 0) throw ConfigError("model.vae_embed must be >= 1");
  if (model.vae_hidden == 0) throw ConfigError("model.vae_hidden must be >= 1");
  for (std::size_t w : model.velocity_hidden) {
    if (w == 0) throw ConfigError("model.velocity_hidden widths must be >= 1");
  }
  if (!(model.velocity_input_scale > 0.0) || !(model.velocity_output_scale > 0.0)) {
    throw ConfigError("model.velocity scales must be > 0");
  }
  train_sampler.validate();
  eval_sampler.validate();
  guidance.validate();
  sampling.validate();
  sft.ladi.validate();
  if (sft.ar_epochs < 0) throw ConfigError("sft.ar_epochs must be >= 0");
  if (sft.corpus_per_target < 1) throw ConfigError("sft.corpus_per_target must be >= 1");
  if (sft.mixture_samples < 1) throw ConfigError("sft.mixture_samples must be >= 1");
  if (!(sft.mixture_spread >= 0.0)) throw ConfigError("sft.mixture_spread must be >= 0");
  if (env.kind == envs::TaskKind::kMixture) {
    if (model.rows * model.cols != 2) throw ConfigError("mixture task needs a 2-value latent (rows * cols = 2)");
    if (std::find(stages.begin(), stages.end(), "rl-baseline") != stages.end()) {
      throw ConfigError("rl-baseline stage needs a text task; drop it for the mixture task");
    }
  }
  rl.grpo.validate();
  if (!(rl.lr > 0.0)) throw ConfigError("rl.lr must be > 0");
  if (rl.steps < 0) throw ConfigError("rl.steps must be >= 0");
  if (rl.questions_per_step < 1) throw ConfigError("rl.questions_per_step must be >= 1");
  ar_config().validate();
  if (baseline.steps < 0) throw ConfigError("baseline.steps must be >= 0");
  eval_config().validate();

  std::set<std::string> seen;
  std::size_t last = 0;
  for (const auto& st : stages) {
    const auto& ks = known_stages();
    const auto it = std::find(ks.begin(), ks.end(), st);
    if (it == ks.end()) throw ConfigError("unknown stage: " + st);
    if (!seen.insert(st).second) throw ConfigError("stage listed twice: " + st);
    const auto idx = static_cast<std::size_t>(it - ks.begin());
    if (idx < last) throw ConfigError("stages must follow the order sft, rl, rl-baseline, eval");
    last = idx;
  }
}

rl::RlConfig ExperimentConfig::rl_config() const {
  rl::RlConfig r;
  r.rollout.sampler = train_sampler;
  r.rollout.guidance = guidance;
  r.rollout.sampling = sampling;
  r.rollout.grpo = rl.grpo;
  r.optim.lr = rl.lr;
  r.questions_per_step = rl.questions_per_step;
  return r;
}

arbaseline::ArConfig ExperimentConfig::ar_config() const {
  arbaseline::ArConfig a;
  a.group = baseline.group;
  a.eps = baseline.eps;
  a.eps_std = rl.grpo.eps_std;
  a.per_token_mean = baseline.per_token_mean;
  a.questions_per_step = baseline.questions_per_step;
  a.sampling = sampling;
  a.optim.lr = baseline.lr;
  return a;
}

rl::EvalConfig ExperimentConfig::eval_config() const {
  rl::EvalConfig e;
  e.samples = eval.samples;
  e.ks = eval.ks;
  e.sampler = eval_sampler;
  e.sampling = sampling;
  e.coverage_radius = eval.coverage_radius;
  return e;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["stages"] = c.stages;
  j["env"] = env_json(c.env);
  j["model"] = model_json(c.model, c.ar_hidden);
  j["sampler"] = {{"train", sampler_json(c.train_sampler)},
                  {"eval", sampler_json(c.eval_sampler)}};
  j["guidance"] = {{"enabled", c.guidance.enabled},
                   {"gamma_max", c.guidance.gamma_max},
                   {"mean_force", c.guidance.mean_force},
                   {"drift", c.guidance.drift}};
  j["sampling"] = {{"temperature", c.sampling.temperature},
                   {"top_p", c.sampling.top_p},
                   {"greedy", c.sampling.greedy}};
  j["sft"] = {{"epochs", c.sft.ladi.epochs},
              {"flow_epochs", c.sft.ladi.flow_epochs},
              {"batch", c.sft.ladi.batch},
              {"lambda", c.sft.ladi.weights.lambda},
              {"beta_vae", c.sft.ladi.weights.beta_vae},
              {"optim", adam_json(c.sft.ladi.optim)},
              {"ar_epochs", c.sft.ar_epochs},
              {"corpus_per_target", c.sft.corpus_per_target},
              {"corpus_path", c.sft.corpus_path ? json(*c.sft.corpus_path) : json(nullptr)},
              {"mixture_samples", c.sft.mixture_samples},
              {"mixture_spread", c.sft.mixture_spread}};
  j["rl"] = {{"grpo", grpo_json(c.rl.grpo)},
             {"lr", c.rl.lr},
             {"steps", c.rl.steps},
             {"questions_per_step", c.rl.questions_per_step}};
  j["baseline"] = {{"group", c.baseline.group},
                   {"eps", c.baseline.eps},
                   {"lr", c.baseline.lr},
                   {"steps", c.baseline.steps},
                   {"questions_per_step", c.baseline.questions_per_step},
                   {"per_token_mean", c.baseline.per_token_mean}};
  j["eval"] = {{"samples", c.eval.samples},
               {"ks", c.eval.ks},
               {"coverage_radius", c.eval.coverage_radius},
               {"checkpoint", c.eval.checkpoint ? json(*c.eval.checkpoint) : json(nullptr)}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c = ExperimentConfig::defaults();
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  root.get("stages", c.stages);
  with_child(root, "env", [&](Section& s) { read_env(s, c.env); });
  with_child(root, "model", [&](Section& s) { read_model(s, c.model, c.ar_hidden); });
  with_child(root, "sampler", [&](Section& s) {
    with_child(s, "train", [&](Section& t) { read_sampler(t, c.train_sampler); });
    with_child(s, "eval", [&](Section& t) { read_sampler(t, c.eval_sampler); });
  });
  with_child(root, "guidance", [&](Section& s) {
    s.get("enabled", c.guidance.enabled);
    s.get("gamma_max", c.guidance.gamma_max);
    s.get("mean_force", c.guidance.mean_force);
    s.get("drift", c.guidance.drift);
  });
  with_child(root, "sampling", [&](Section& s) {
    s.get("temperature", c.sampling.temperature);
    s.get("top_p", c.sampling.top_p);
    s.get("greedy", c.sampling.greedy);
  });
  with_child(root, "sft", [&](Section& s) {
    s.get("epochs", c.sft.ladi.epochs);
    s.get("flow_epochs", c.sft.ladi.flow_epochs);
    s.get("batch", c.sft.ladi.batch);
    s.get("lambda", c.sft.ladi.weights.lambda);
    s.get("beta_vae", c.sft.ladi.weights.beta_vae);
    with_child(s, "optim", [&](Section& o) { read_adam(o, c.sft.ladi.optim); });
    s.get("ar_epochs", c.sft.ar_epochs);
    s.get("corpus_per_target", c.sft.corpus_per_target);
    s.get_optional("corpus_path", c.sft.corpus_path);
    s.get("mixture_samples", c.sft.mixture_samples);
    s.get("mixture_spread", c.sft.mixture_spread);
  });
  with_child(root, "rl", [&](Section& s) {
    with_child(s, "grpo", [&](Section& g) { read_grpo(g, c.rl.grpo); });
    s.get("lr", c.rl.lr);
    s.get("steps", c.rl.steps);
    s.get("questions_per_step", c.rl.questions_per_step);
  });
  with_child(root, "baseline", [&](Section& s) {
    s.get("group", c.baseline.group);
    s.get("eps", c.baseline.eps);
    s.get("lr", c.baseline.lr);
    s.get("steps", c.baseline.steps);
    s.get("questions_per_step", c.baseline.questions_per_step);
    s.get("per_token_mean", c.baseline.per_token_mean);
  });
  with_child(root, "eval", [&](Section& s) {
    s.get("samples", c.eval.samples);
    s.get("ks", c.eval.ks);
    s.get("coverage_radius", c.eval.coverage_radius);
    s.get_optional("checkpoint", c.eval.checkpoint);
  });
  root.finish();
  c.model.question_size = c.env.feature_size();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write config file: " + path.string());
  out << to_json(c).dump(2) << "\n";
}

void apply_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json j = to_json(c);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty() || !node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key: " + key);
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  c = config_from_json(j);
}

}  // namespace ladi::xcli
