#include "lmstyle/config.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lmstyle/errors.h"

namespace lmstyle {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  LMS_REQUIRE(ec == std::errc() && ptr == end, "bad value '" + text + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ContractViolation("bad boolean '" + text + "' for " + key);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string format_number(T v) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

}  // namespace

const char* mode_name(DiscriminatorMode mode) {
  switch (mode) {
    case DiscriminatorMode::kLm:
      return "lm";
    case DiscriminatorMode::kLmAdv:
      return "lm+adv";
    case DiscriminatorMode::kClassifier:
      return "classifier";
    case DiscriminatorMode::kLmClassifier:
      return "lm+classifier";
  }
  return "?";
}

DiscriminatorMode parse_mode(const std::string& name) {
  for (auto m : {DiscriminatorMode::kLm, DiscriminatorMode::kLmAdv, DiscriminatorMode::kClassifier,
                 DiscriminatorMode::kLmClassifier}) {
    if (name == mode_name(m)) return m;
  }
  throw ContractViolation("unknown discriminator mode '" + name + "'");
}

#define LMS_NUM_FIELD(key, member)                                                          \
  Field {                                                                                   \
    key, [](const TrainConfig& c) { return format_number(c.member); },                      \
        [](TrainConfig& c, const std::string& v) {                                          \
          c.member = parse_number<std::remove_reference_t<decltype(c.member)>>(key, v);    \
        }                                                                                   \
  }

#define LMS_STR_FIELD(key, member)                                                          \
  Field {                                                                                   \
    key, [](const TrainConfig& c) { return c.member; },                                     \
        [](TrainConfig& c, const std::string& v) { c.member = v; }                          \
  }

const std::vector<TrainConfig::Field>& TrainConfig::fields() {
  static const std::vector<Field> table = {
      LMS_STR_FIELD("profile", profile),
      Field{"task", [](const TrainConfig& c) { return std::string(c.task == Task::kDecipher ? "decipher" : "sentiment"); },
            [](TrainConfig& c, const std::string& v) {
              if (v == "decipher") c.task = Task::kDecipher;
              else if (v == "sentiment") c.task = Task::kSentiment;
              else throw ContractViolation("unknown task '" + v + "'");
            }},
      LMS_NUM_FIELD("data.vocab_size", markov.vocab_size),
      LMS_NUM_FIELD("data.order", markov.order),
      LMS_NUM_FIELD("data.concentration", markov.concentration),
      LMS_NUM_FIELD("data.branching", markov.branching),
      LMS_NUM_FIELD("data.min_length", markov.min_length),
      LMS_NUM_FIELD("data.max_length", markov.max_length),
      LMS_NUM_FIELD("data.train_size", train_size),
      LMS_NUM_FIELD("data.dev_size", dev_size),
      LMS_NUM_FIELD("data.test_size", test_size),
      LMS_NUM_FIELD("data.cipher_fraction", cipher_fraction),
      LMS_NUM_FIELD("data.seed", data_seed),
      LMS_NUM_FIELD("data.min_count", min_count),
      LMS_NUM_FIELD("model.embed_dim", embed_dim),
      LMS_NUM_FIELD("model.hidden_dim", hidden_dim),
      LMS_NUM_FIELD("model.style_dim", style_dim),
      Field{"train.mode", [](const TrainConfig& c) { return std::string(mode_name(c.mode)); },
            [](TrainConfig& c, const std::string& v) { c.mode = parse_mode(v); }},
      LMS_NUM_FIELD("train.lambda", lambda),
      LMS_NUM_FIELD("train.gamma", gamma),
      LMS_NUM_FIELD("train.learning_rate", learning_rate),
      LMS_NUM_FIELD("train.batch_size", batch_size),
      LMS_NUM_FIELD("train.epochs", epochs),
      LMS_NUM_FIELD("train.patience", patience),
      LMS_NUM_FIELD("train.clip_norm", clip_norm),
      LMS_NUM_FIELD("train.nll_cap", nll_cap),
      LMS_NUM_FIELD("train.disc_steps", disc_steps),
      LMS_NUM_FIELD("train.classifier_weight", classifier_weight),
      Field{"train.sample_negatives", [](const TrainConfig& c) { return std::string(c.sample_negatives ? "true" : "false"); },
            [](TrainConfig& c, const std::string& v) { c.sample_negatives = parse_bool("train.sample_negatives", v); }},
      LMS_NUM_FIELD("train.tau_initial", anneal.initial),
      LMS_NUM_FIELD("train.tau_decay", anneal.decay),
      LMS_NUM_FIELD("train.tau_floor", anneal.floor),
      LMS_NUM_FIELD("train.seed", seed),
      LMS_NUM_FIELD("train.train_limit", train_limit),
      LMS_NUM_FIELD("train.divergence_drop", divergence_drop),
      LMS_NUM_FIELD("lm.epochs", lm_epochs),
      LMS_NUM_FIELD("lm.patience", lm_patience),
      LMS_NUM_FIELD("lm.batch_size", lm_batch_size),
      LMS_NUM_FIELD("clf.epochs", clf_epochs),
      LMS_STR_FIELD("paths.data_dir", data_dir),
      LMS_STR_FIELD("paths.lm_checkpoint", lm_checkpoint),
      LMS_STR_FIELD("paths.run_dir", run_dir),
      LMS_STR_FIELD("paths.run_id", run_id),
  };
  return table;
}

#undef LMS_NUM_FIELD
#undef LMS_STR_FIELD

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::full() {
  TrainConfig c;
  c.profile = "full";
  c.markov.vocab_size = 10000;
  c.markov.branching = 50;
  c.train_size = 200000;
  c.dev_size = 100000;
  c.test_size = 100000;
  c.min_count = 5;
  c.embed_dim = 100;
  c.hidden_dim = 700;
  c.style_dim = 200;
  c.lambda = 1.0;
  c.learning_rate = 1e-3;
  c.batch_size = 128;
  c.patience = 0;
  return c;
}

TrainConfig TrainConfig::for_profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "full") return full();
  throw ContractViolation("unknown profile '" + name + "'");
}

ModelDims TrainConfig::dims(int vocab_size) const {
  ModelDims d;
  d.vocab_size = vocab_size;
  d.embed_dim = embed_dim;
  d.hidden_dim = hidden_dim;
  d.style_dim = style_dim;
  return d;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ContractViolation("unknown config key '" + key + "'");
}

std::string TrainConfig::get(const std::string& key) const {
  for (const Field& f : fields())
    if (key == f.key) return f.get(*this);
  throw ContractViolation("unknown config key '" + key + "'");
}

std::vector<std::string> TrainConfig::keys() const {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

void TrainConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    LMS_REQUIRE(eq != std::string::npos, "config line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    // A profile line resets everything to that profile before later lines apply.
    if (key == "profile") *this = for_profile(value);
    else set(key, value);
  }
}

void TrainConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  LMS_REQUIRE(in.good(), "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str());
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

void TrainConfig::validate() const {
  markov.validate();
  LMS_REQUIRE(train_size >= 1 && dev_size >= 1 && test_size >= 1, "split sizes must be positive");
  LMS_REQUIRE(cipher_fraction >= 0.0 && cipher_fraction <= 1.0, "cipher fraction must lie in [0, 1]");
  LMS_REQUIRE(min_count >= 1, "min_count must be at least 1");
  LMS_REQUIRE(embed_dim >= 1 && hidden_dim >= 1 && style_dim >= 1, "model sizes must be positive");
  LMS_REQUIRE(lambda >= 0.0, "lambda must be non-negative");
  LMS_REQUIRE(gamma >= 0.0, "gamma must be non-negative");
  LMS_REQUIRE(mode != DiscriminatorMode::kLm || gamma == 0.0, "mode lm requires gamma = 0 (use lm+adv)");
  LMS_REQUIRE(mode != DiscriminatorMode::kLmAdv || gamma > 0.0, "mode lm+adv requires gamma > 0");
  LMS_REQUIRE(learning_rate > 0.0, "learning rate must be positive");
  LMS_REQUIRE(batch_size >= 2 && batch_size % 2 == 0, "batch size must be positive and even");
  LMS_REQUIRE(epochs >= 1 && lm_epochs >= 1, "epoch counts must be positive");
  LMS_REQUIRE(patience >= 0 && lm_patience >= 0, "patience must be non-negative");
  LMS_REQUIRE(clip_norm > 0.0, "clip norm must be positive");
  LMS_REQUIRE(disc_steps >= 1, "disc_steps must be at least 1");
  LMS_REQUIRE(classifier_weight >= 0.0, "classifier weight must be non-negative");
  LMS_REQUIRE(lm_batch_size >= 1 && clf_epochs >= 0, "bad pre-training settings");
  LMS_REQUIRE(train_limit >= 0, "train_limit must be non-negative");
  anneal.validate();
}

}  // namespace lmstyle
