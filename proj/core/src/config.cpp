#include "otjr/config.hpp"

#include <algorithm>
#include <initializer_list>
#include <string_view>

#include "otjr/errors.hpp"
#include "otjr/io.hpp"

namespace otjr {

using nlohmann::json;

namespace {

void require_object(const json& j, std::string_view where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected a JSON object");
}

void allow_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  require_object(j, where);
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ValidationError(std::string(where) + "." + k + ": unknown key");
    }
  }
}

template <class T>
T get(const json& j, std::string_view where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + "." + key + ": wrong type");
  }
}

template <class T>
T need(const json& j, std::string_view where, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string(where) + "." + key + ": missing");
  return get<T>(j, where, key, T{});
}

}  // namespace

DatasetSpec parse_dataset(const json& j) {
  require_object(j, "dataset");
  const std::string kind = need<std::string>(j, "dataset", "kind");
  json b = j;
  if (kind == "two_moons") {
    allow_keys(j, "dataset", {"kind", "n", "noise", "seed", "test_n", "test_seed"});
    b["n"] = need<std::size_t>(j, "dataset", "n");
    b["noise"] = get<double>(j, "dataset", "noise", 0.1);
    b["seed"] = get<std::uint64_t>(j, "dataset", "seed", 0);
    b["test_n"] = get<std::size_t>(j, "dataset", "test_n", b["n"].get<std::size_t>());
    b["test_seed"] = get<std::uint64_t>(j, "dataset", "test_seed", b["seed"].get<std::uint64_t>() + 1);
  } else if (kind == "blobs") {
    allow_keys(j, "dataset", {"kind", "n", "classes", "spread", "seed", "test_n", "test_seed"});
    b["n"] = need<std::size_t>(j, "dataset", "n");
    b["classes"] = need<std::size_t>(j, "dataset", "classes");
    b["spread"] = get<double>(j, "dataset", "spread", 1.0);
    b["seed"] = get<std::uint64_t>(j, "dataset", "seed", 0);
    b["test_n"] = get<std::size_t>(j, "dataset", "test_n", b["n"].get<std::size_t>());
    b["test_seed"] = get<std::uint64_t>(j, "dataset", "test_seed", b["seed"].get<std::uint64_t>() + 1);
  } else if (kind == "idx") {
    allow_keys(j, "dataset", {"kind", "train_images", "train_labels", "test_images", "test_labels",
                              "train_per_class", "test_per_class", "seed"});
    for (const char* k : {"train_images", "train_labels", "test_images", "test_labels"}) {
      b[k] = need<std::string>(j, "dataset", k);
    }
    b["train_per_class"] = get<std::size_t>(j, "dataset", "train_per_class", 0);
    b["test_per_class"] = get<std::size_t>(j, "dataset", "test_per_class", 0);
    b["seed"] = get<std::uint64_t>(j, "dataset", "seed", 0);
  } else {
    throw ValidationError("dataset.kind: unknown kind '" + kind + "'");
  }
  return DatasetSpec{b};
}

namespace {

Dataset generate(const json& b, bool test) {
  const std::string kind = b["kind"];
  const std::size_t n = b[test ? "test_n" : "n"];
  const std::uint64_t seed = b[test ? "test_seed" : "seed"];
  Dataset d = kind == "two_moons"
                  ? gen_two_moons(n, b["noise"], seed)
                  : gen_blobs(n, b["classes"], b["spread"], seed);
  d.split = test ? "test" : "train";
  return d;
}

Dataset read_idx(const json& b, bool test) {
  const std::string pre = test ? "test" : "train";
  Dataset d = load_idx(b[pre + "_images"].get<std::string>(), b[pre + "_labels"].get<std::string>());
  const std::size_t per = b[pre + "_per_class"];
  if (per > 0) d = subset(d, per, b["seed"].get<std::uint64_t>() + (test ? 1 : 0));
  d.split = pre;
  return d;
}

}  // namespace

std::pair<Dataset, Dataset> DatasetSpec::load() const {
  if (block["kind"] == "idx") return {read_idx(block, false), read_idx(block, true)};
  return {generate(block, false), generate(block, true)};
}

Dataset DatasetSpec::load_test() const {
  return block["kind"] == "idx" ? read_idx(block, true) : generate(block, true);
}

MLPSpec parse_model(const json& j) {
  allow_keys(j, "model", {"widths", "activation", "seed"});
  MLPSpec s;
  s.widths = need<std::vector<std::size_t>>(j, "model", "widths");
  s.activation = activation_from_string(get<std::string>(j, "model", "activation", "relu"));
  s.seed = get<std::uint64_t>(j, "model", "seed", 0);
  s.validate();
  return s;
}

AttackConfig parse_attack_config(const json& j, AttackConfig c) {
  allow_keys(j, "attack", {"norm", "epsilon", "step", "iterations", "random_start", "early_stop",
                           "loss", "seed", "clamp", "kind", "decay"});
  if (j.contains("norm")) c.norm = norm_from_string(need<std::string>(j, "attack", "norm"));
  c.epsilon = get<double>(j, "attack", "epsilon", c.epsilon);
  c.step = get<double>(j, "attack", "step", c.epsilon / 4.0);
  c.iterations = get<std::size_t>(j, "attack", "iterations", c.iterations);
  c.random_start = get<bool>(j, "attack", "random_start", c.random_start);
  c.early_stop = get<bool>(j, "attack", "early_stop", c.early_stop);
  const std::string loss = get<std::string>(j, "attack", "loss", "xe");
  if (loss == "xe") {
    c.loss = AttackLoss::CrossEntropy;
  } else if (loss == "soft") {
    c.loss = AttackLoss::SoftTarget;
  } else {
    throw ValidationError("attack.loss: expected xe or soft");
  }
  c.seed = get<std::uint64_t>(j, "attack", "seed", c.seed);
  if (j.contains("clamp")) {
    auto r = need<std::vector<double>>(j, "attack", "clamp");
    if (r.size() != 2) throw ValidationError("attack.clamp: expected [lo, hi]");
    c.clamp_lo = r[0];
    c.clamp_hi = r[1];
  }
  c.validate();
  return c;
}

AttackSpec parse_attack_spec(const json& j) {
  AttackSpec a;
  a.kind = attack_kind_from_string(get<std::string>(j, "attack", "kind", "pgd"));
  AttackConfig defaults;
  defaults.iterations = 20;
  defaults.early_stop = true;
  a.cfg = parse_attack_config(j, defaults);
  a.decay = get<double>(j, "attack", "decay", 1.0);
  return a;
}

LossSpec parse_loss(const json& j) {
  allow_keys(j, "train.loss", {"variant", "trades_lambda", "trades_kl", "alp_alpha", "alp_lambda",
                               "lambda_j", "lambda_sw", "K"});
  LossSpec s;
  s.variant = loss_variant_from_string(need<std::string>(j, "train.loss", "variant"));
  s.trades_lambda = get<double>(j, "train.loss", "trades_lambda", s.trades_lambda);
  s.trades_kl = get<bool>(j, "train.loss", "trades_kl", s.trades_kl);
  s.alp_alpha = get<double>(j, "train.loss", "alp_alpha", s.alp_alpha);
  s.alp_lambda = get<double>(j, "train.loss", "alp_lambda", s.alp_lambda);
  s.lambda_j = get<double>(j, "train.loss", "lambda_j", s.lambda_j);
  s.lambda_sw = get<double>(j, "train.loss", "lambda_sw", s.lambda_sw);
  s.K = get<std::size_t>(j, "train.loss", "K", s.K);
  s.validate();
  return s;
}

TrainConfig parse_train(const json& j) {
  allow_keys(j, "train", {"loss", "optimizer", "epochs", "batch_size", "seeds", "attack", "eval"});
  TrainConfig c;
  c.loss = parse_loss(j.value("loss", json::object({{"variant", "OTJR"}})));
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    allow_keys(o, "train.optimizer", {"lr", "momentum", "decay_epochs", "decay_factor", "weight_decay"});
    c.optimizer.lr = get<double>(o, "train.optimizer", "lr", c.optimizer.lr);
    c.optimizer.momentum = get<double>(o, "train.optimizer", "momentum", c.optimizer.momentum);
    c.optimizer.decay_epochs =
        get<std::vector<std::size_t>>(o, "train.optimizer", "decay_epochs", c.optimizer.decay_epochs);
    c.optimizer.decay_factor = get<double>(o, "train.optimizer", "decay_factor", c.optimizer.decay_factor);
    c.optimizer.weight_decay = get<double>(o, "train.optimizer", "weight_decay", c.optimizer.weight_decay);
  }
  c.epochs = get<std::size_t>(j, "train", "epochs", c.epochs);
  c.batch_size = get<std::size_t>(j, "train", "batch_size", c.batch_size);
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    allow_keys(s, "train.seeds", {"init", "shuffle", "projection", "attack"});
    c.seeds.init = get<std::uint64_t>(s, "train.seeds", "init", c.seeds.init);
    c.seeds.shuffle = get<std::uint64_t>(s, "train.seeds", "shuffle", c.seeds.shuffle);
    c.seeds.projection = get<std::uint64_t>(s, "train.seeds", "projection", c.seeds.projection);
    c.seeds.attack = get<std::uint64_t>(s, "train.seeds", "attack", c.seeds.attack);
  }
  if (j.contains("attack")) {
    json a = j["attack"];
    for (const char* k : {"kind", "decay"}) {
      if (a.contains(k)) throw ValidationError(std::string("train.attack.") + k + ": unknown key");
    }
    c.attack = parse_attack_config(a);
  }
  c.eval.attack.cfg = c.attack;
  c.eval.attack.cfg.iterations = 20;
  c.eval.attack.cfg.early_stop = true;
  if (j.contains("eval")) {
    const json& e = j["eval"];
    allow_keys(e, "train.eval", {"attack", "every", "samples"});
    if (e.contains("attack")) c.eval.attack = parse_attack_spec(e["attack"]);
    c.eval.every = get<std::size_t>(e, "train.eval", "every", c.eval.every);
    c.eval.samples = get<std::size_t>(e, "train.eval", "samples", c.eval.samples);
  }
  c.validate();
  return c;
}

RunConfig parse_run_config(const json& j) {
  allow_keys(j, "config", {"dataset", "model", "train", "output"});
  RunConfig r;
  if (!j.contains("dataset")) throw ValidationError("config.dataset: missing");
  if (!j.contains("model")) throw ValidationError("config.model: missing");
  r.dataset = parse_dataset(j["dataset"]);
  r.model = parse_model(j["model"]);
  r.train = parse_train(j.value("train", json::object()));
  r.model.seed = r.train.seeds.init;
  r.output = get<std::string>(j, "config", "output", "");
  r.source = {{"dataset", r.dataset.block}, {"model", to_json(r.model)}, {"train", to_json(r.train)}};
  return r;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

std::string RunConfig::hash() const { return json_hash(source); }

json to_json(const MLPSpec& s) {
  return {{"widths", s.widths}, {"activation", to_string(s.activation)}, {"seed", s.seed}};
}

json to_json(const AttackConfig& c) {
  return {{"norm", to_string(c.norm)},
          {"epsilon", c.epsilon},
          {"step", c.step},
          {"iterations", c.iterations},
          {"random_start", c.random_start},
          {"early_stop", c.early_stop},
          {"loss", c.loss == AttackLoss::CrossEntropy ? "xe" : "soft"},
          {"seed", c.seed},
          {"clamp", {c.clamp_lo, c.clamp_hi}}};
}

json to_json(const AttackSpec& a) {
  json j = to_json(a.cfg);
  j["kind"] = to_string(a.kind);
  j["decay"] = a.decay;
  return j;
}

json to_json(const LossSpec& s) {
  return {{"variant", to_string(s.variant)}, {"trades_lambda", s.trades_lambda},
          {"trades_kl", s.trades_kl},        {"alp_alpha", s.alp_alpha},
          {"alp_lambda", s.alp_lambda},      {"lambda_j", s.lambda_j},
          {"lambda_sw", s.lambda_sw},        {"K", s.K}};
}

json to_json(const TrainConfig& c) {
  return {{"loss", to_json(c.loss)},
          {"optimizer",
           {{"lr", c.optimizer.lr},
            {"momentum", c.optimizer.momentum},
            {"decay_epochs", c.optimizer.decay_epochs},
            {"decay_factor", c.optimizer.decay_factor},
            {"weight_decay", c.optimizer.weight_decay}}},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seeds",
           {{"init", c.seeds.init},
            {"shuffle", c.seeds.shuffle},
            {"projection", c.seeds.projection},
            {"attack", c.seeds.attack}}},
          {"attack", to_json(c.attack)},
          {"eval",
           {{"attack", to_json(c.eval.attack)}, {"every", c.eval.every}, {"samples", c.eval.samples}}}};
}

}  // namespace otjr
