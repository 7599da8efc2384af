#include "ctxemo/config.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "ctxemo/formats.hpp"

namespace ctxemo::config {

using nlohmann::json;

std::string_view to_string(ModelType t) {
  switch (t) {
    case ModelType::kStgcn: return "stgcn";
    case ModelType::kTsnRgb: return "tsn-rgb";
    case ModelType::kTsnFlow: return "tsn-flow";
  }
  return "?";
}

ModelType parse_model_type(std::string_view s) {
  if (s == "stgcn") return ModelType::kStgcn;
  if (s == "tsn-rgb") return ModelType::kTsnRgb;
  if (s == "tsn-flow") return ModelType::kTsnFlow;
  throw std::invalid_argument("unknown model type '" + std::string(s) +
                              "' (expected stgcn, tsn-rgb or tsn-flow)");
}

tsn::StreamConfig ModelSection::streams() const {
  tsn::StreamConfig s;
  s.modality = type == ModelType::kTsnFlow ? tsn::Modality::kFlow : tsn::Modality::kRgb;
  s.body = body;
  s.context = context;
  s.face = face;
  s.scene_attr = type == ModelType::kTsnRgb && scene_attr;
  return s;
}

double OptimizerSection::effective_lr(ModelType type) const {
  if (lr > 0.0) return lr;
  return type == ModelType::kStgcn ? 5e-3 : 1e-3;
}

void RunConfig::validate() const {
  if (optimizer.epochs == 0) throw std::invalid_argument("optimizer.epochs must be positive");
  if (optimizer.batch_size == 0) throw std::invalid_argument("optimizer.batch_size must be positive");
  if (optimizer.lr < 0.0) throw std::invalid_argument("optimizer.lr must be non-negative");
  if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0) {
    throw std::invalid_argument("optimizer.momentum must lie in [0,1)");
  }
  if (optimizer.weight_decay < 0.0) {
    throw std::invalid_argument("optimizer.weight_decay must be non-negative");
  }
  if (optimizer.scheduler.factor <= 0.0 || optimizer.scheduler.factor >= 1.0) {
    throw std::invalid_argument("optimizer.scheduler.factor must lie in (0,1)");
  }
  if (data.k_train == 0 || data.k_eval == 0) {
    throw std::invalid_argument("data.k_train and data.k_eval must be positive");
  }
  if (data.augmentation.anchors == 0) {
    throw std::invalid_argument("data.augmentation.anchors must be positive");
  }
  if (model.temporal_kernel % 2 == 0) {
    throw std::invalid_argument("model.temporal_kernel must be odd");
  }
  if (model.dropout < 0.0 || model.dropout >= 1.0) {
    throw std::invalid_argument("model.dropout must lie in [0,1)");
  }
  if (model.type != ModelType::kStgcn) model.streams().validate();
}

namespace {

// Line of the first occurrence of "key" in the source, for error messages.
std::size_t line_of(std::string_view text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string_view::npos) return 0;
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto line = line_of(text_, key);
    throw std::invalid_argument("config" + (line ? " line " + std::to_string(line) : "") + ": " +
                                msg);
  }

  void allow_only(const json& obj, const std::string& section,
                  std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(section, "'" + section + "' must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items()) {
      if (!allowed.count(k)) fail(k, "unknown key '" + k + "' in section '" + section + "'");
    }
  }

  template <typename T>
  void get(const json& obj, const char* key, T& dst) const {
    if (!obj.contains(key)) return;
    try {
      dst = obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, std::string("key '") + key + "' has the wrong type");
    }
  }

 private:
  std::string_view text_;
};

}  // namespace

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  Reader rd(text);
  RunConfig cfg;
  rd.allow_only(doc, "root", {"model", "optimizer", "data", "seed"});
  rd.get(doc, "seed", cfg.seed);

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    rd.allow_only(m, "model",
                  {"type", "strategy", "edge_importance", "partial_bn", "layout", "widths",
                   "temporal_kernel", "dropout", "streams", "embedding_loss"});
    std::string type = std::string(to_string(cfg.model.type));
    rd.get(m, "type", type);
    try {
      cfg.model.type = parse_model_type(type);
    } catch (const std::invalid_argument& e) {
      rd.fail("type", e.what());
    }
    std::string strategy = std::string(graph::to_string(cfg.model.strategy));
    rd.get(m, "strategy", strategy);
    try {
      cfg.model.strategy = graph::parse_strategy(strategy);
    } catch (const std::invalid_argument& e) {
      rd.fail("strategy", e.what());
    }
    rd.get(m, "edge_importance", cfg.model.edge_importance);
    rd.get(m, "partial_bn", cfg.model.partial_bn);
    rd.get(m, "layout", cfg.model.layout);
    rd.get(m, "widths", cfg.model.widths);
    rd.get(m, "temporal_kernel", cfg.model.temporal_kernel);
    rd.get(m, "dropout", cfg.model.dropout);
    rd.get(m, "embedding_loss", cfg.model.embedding_loss);
    if (m.contains("streams")) {
      const auto& s = m.at("streams");
      rd.allow_only(s, "streams", {"body", "context", "face", "scene_attr"});
      rd.get(s, "body", cfg.model.body);
      rd.get(s, "context", cfg.model.context);
      rd.get(s, "face", cfg.model.face);
      rd.get(s, "scene_attr", cfg.model.scene_attr);
    }
  }
  if (doc.contains("optimizer")) {
    const auto& o = doc.at("optimizer");
    rd.allow_only(o, "optimizer",
                  {"lr", "momentum", "weight_decay", "epochs", "batch_size", "scheduler"});
    rd.get(o, "lr", cfg.optimizer.lr);
    rd.get(o, "momentum", cfg.optimizer.momentum);
    rd.get(o, "weight_decay", cfg.optimizer.weight_decay);
    rd.get(o, "epochs", cfg.optimizer.epochs);
    rd.get(o, "batch_size", cfg.optimizer.batch_size);
    if (o.contains("scheduler")) {
      const auto& s = o.at("scheduler");
      rd.allow_only(s, "scheduler", {"type", "factor", "patience", "min_delta", "min_lr"});
      std::string type = "plateau";
      rd.get(s, "type", type);
      if (type != "plateau" && type != "none") {
        rd.fail("type", "unknown scheduler '" + type + "' (expected plateau or none)");
      }
      cfg.optimizer.plateau = type == "plateau";
      rd.get(s, "factor", cfg.optimizer.scheduler.factor);
      rd.get(s, "patience", cfg.optimizer.scheduler.patience);
      rd.get(s, "min_delta", cfg.optimizer.scheduler.min_delta);
      rd.get(s, "min_lr", cfg.optimizer.scheduler.min_lr);
    }
  }
  if (doc.contains("data")) {
    const auto& d = doc.at("data");
    rd.allow_only(d, "data",
                  {"manifest", "train_split", "val_split", "augment", "augmentation",
                   "flow_bound", "k_train", "k_eval"});
    rd.get(d, "manifest", cfg.data.manifest);
    rd.get(d, "train_split", cfg.data.train_split);
    rd.get(d, "val_split", cfg.data.val_split);
    rd.get(d, "augment", cfg.data.augment);
    rd.get(d, "flow_bound", cfg.data.flow_bound);
    rd.get(d, "k_train", cfg.data.k_train);
    rd.get(d, "k_eval", cfg.data.k_eval);
    if (d.contains("augmentation")) {
      const auto& a = d.at("augmentation");
      rd.allow_only(a, "augmentation",
                    {"max_rotation_deg", "max_scale_delta", "max_translation", "anchors"});
      rd.get(a, "max_rotation_deg", cfg.data.augmentation.max_rotation_deg);
      rd.get(a, "max_scale_delta", cfg.data.augmentation.max_scale_delta);
      rd.get(a, "max_translation", cfg.data.augmentation.max_translation);
      rd.get(a, "anchors", cfg.data.augmentation.anchors);
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(io::read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& cfg) {
  json doc;
  const auto& m = cfg.model;
  doc["model"] = {{"type", to_string(m.type)},
                  {"strategy", graph::to_string(m.strategy)},
                  {"edge_importance", m.edge_importance},
                  {"partial_bn", m.partial_bn},
                  {"layout", m.layout},
                  {"widths", m.widths},
                  {"temporal_kernel", m.temporal_kernel},
                  {"dropout", m.dropout},
                  {"streams",
                   {{"body", m.body},
                    {"context", m.context},
                    {"face", m.face},
                    {"scene_attr", m.scene_attr}}},
                  {"embedding_loss", m.embedding_loss}};
  const auto& o = cfg.optimizer;
  doc["optimizer"] = {{"lr", o.effective_lr(m.type)},
                      {"momentum", o.momentum},
                      {"weight_decay", o.weight_decay},
                      {"epochs", o.epochs},
                      {"batch_size", o.batch_size},
                      {"scheduler",
                       {{"type", o.plateau ? "plateau" : "none"},
                        {"factor", o.scheduler.factor},
                        {"patience", o.scheduler.patience},
                        {"min_delta", o.scheduler.min_delta},
                        {"min_lr", o.scheduler.min_lr}}}};
  const auto& d = cfg.data;
  doc["data"] = {{"manifest", d.manifest},
                 {"train_split", d.train_split},
                 {"val_split", d.val_split},
                 {"augment", d.augment},
                 {"augmentation",
                  {{"max_rotation_deg", d.augmentation.max_rotation_deg},
                   {"max_scale_delta", d.augmentation.max_scale_delta},
                   {"max_translation", d.augmentation.max_translation},
                   {"anchors", d.augmentation.anchors}}},
                 {"flow_bound", d.flow_bound},
                 {"k_train", d.k_train},
                 {"k_eval", d.k_eval}};
  doc["seed"] = cfg.seed;
  return doc.dump(2) + "\n";
}

RunConfig default_config(ModelType type) {
  RunConfig cfg;
  cfg.model.type = type;
  cfg.optimizer.lr = cfg.optimizer.effective_lr(type);
  return cfg;
}

}  // namespace ctxemo::config
