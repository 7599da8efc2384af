#include "ctxemo/formats.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ctxemo::io {

using nlohmann::json;

namespace {

constexpr const char* kSkeletonFormat = "ctxemo-skeletons";
constexpr const char* kAnnotationFormat = "ctxemo-annotations";
constexpr const char* kPredictionFormat = "ctxemo-predictions";
constexpr const char* kManifestFormat = "ctxemo-manifest";

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& msg) {
  throw std::invalid_argument("line " + std::to_string(line) + ": " + msg);
}

void check_header(const json& header, const char* format, std::size_t line) {
  if (!header.is_object() || header.value("format", "") != format) {
    fail_line(line, std::string("expected a '") + format + "' header");
  }
  const int version = header.value("version", -1);
  if (version != kTextFormatVersion) {
    fail_line(line, "unsupported " + std::string(format) + " version " + std::to_string(version));
  }
}

// Reads header and records; `on_record` gets (record, line number).
template <typename F>
json read_jsonl(std::istream& in, const char* format, F&& on_record) {
  std::string text;
  std::size_t line_no = 0;
  json header;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error& e) {
      fail_line(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      check_header(value, format, line_no);
      header = std::move(value);
      have_header = true;
      continue;
    }
    if (!value.is_object()) fail_line(line_no, "record is not an object");
    try {
      on_record(value, line_no);
    } catch (const json::exception& e) {
      fail_line(line_no, std::string("schema violation: ") + e.what());
    }
  }
  if (!have_header) throw std::invalid_argument(std::string("empty ") + format + " file");
  return header;
}

std::vector<double> real_array(const json& record, const char* key, std::size_t expected,
                               std::size_t line) {
  if (!record.contains(key) || !record.at(key).is_array()) {
    fail_line(line, std::string("missing array '") + key + "'");
  }
  const auto& arr = record.at(key);
  if (arr.size() != expected) {
    fail_line(line, std::string("'") + key + "' has " + std::to_string(arr.size()) +
                        " values, expected " + std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : arr) {
    if (!v.is_number()) fail_line(line, std::string("'") + key + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

void require_finite(const std::vector<double>& values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument(what + " contains a non-finite value");
  }
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename ReadFn>
auto load_with(const std::filesystem::path& path, ReadFn read) {
  auto in = open_in(path);
  try {
    return read(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace

// ---- manifest ----

const std::vector<std::string>& DatasetManifest::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw std::invalid_argument("manifest has no split '" + name + "'");
  return it->second;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json doc;
  doc["format"] = kManifestFormat;
  doc["version"] = kTextFormatVersion;
  doc["categories"] = m.categories;
  doc["vad_scaling"] = m.vad_scaling;
  doc["t_max"] = m.t_max;
  doc["splits"] = m.splits;
  doc["paths"] = m.paths;
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("manifest is not valid JSON: ") + e.what());
  }
  check_header(doc, kManifestFormat, 1);
  DatasetManifest m;
  try {
    m.categories = doc.at("categories").get<std::vector<std::string>>();
    m.vad_scaling = doc.value("vad_scaling", "unit");
    m.t_max = doc.at("t_max").get<std::size_t>();
    m.splits = doc.value("splits", std::map<std::string, std::vector<std::string>>{});
    m.paths = doc.value("paths", std::map<std::string, std::string>{});
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest schema violation: ") + e.what());
  }
  if (m.categories.size() != kNumCategories) {
    throw std::invalid_argument("manifest lists " + std::to_string(m.categories.size()) +
                                " categories, expected 26");
  }
  if (m.vad_scaling != "unit") {
    throw std::invalid_argument("unsupported VAD scaling '" + m.vad_scaling + "'");
  }
  if (m.t_max == 0) throw std::invalid_argument("manifest t_max must be positive");
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_text_file(path, manifest_to_json(m));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

// ---- skeletons ----

void write_skeletons(std::ostream& out, const std::vector<data::SkeletonSequence>& clips) {
  out << json{{"format", kSkeletonFormat}, {"version", kTextFormatVersion},
              {"joints", data::kNumJoints}}.dump()
      << '\n';
  for (const auto& c : clips) {
    c.validate();
    json rec{{"clip_id", c.clip_id},
             {"frames", c.frames},
             {"joints", c.joints},
             {"categorical", c.annotation.categorical},
             {"vad", c.annotation.vad}};
    out << rec.dump() << '\n';
  }
}

std::vector<data::SkeletonSequence> read_skeletons(std::istream& in) {
  std::vector<data::SkeletonSequence> clips;
  const auto header = read_jsonl(in, kSkeletonFormat, [&](const json& rec, std::size_t line) {
    data::SkeletonSequence s(rec.at("clip_id").get<std::string>(),
                             rec.at("frames").get<std::size_t>());
    s.joints = real_array(rec, "joints", data::kJointChannels * s.frames * data::kNumJoints, line);
    s.annotation.categorical = real_array(rec, "categorical", kNumCategories, line);
    s.annotation.vad = real_array(rec, "vad", kNumVad, line);
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      fail_line(line, e.what());
    }
    clips.push_back(std::move(s));
  });
  if (header.value("joints", 0) != static_cast<int>(data::kNumJoints)) {
    throw std::invalid_argument("skeleton file declares a joint count other than 18");
  }
  return clips;
}

void save_skeletons(const std::filesystem::path& path,
                    const std::vector<data::SkeletonSequence>& clips) {
  auto out = open_out(path);
  write_skeletons(out, clips);
}

std::vector<data::SkeletonSequence> load_skeletons(const std::filesystem::path& path) {
  return load_with(path, [](std::istream& in) { return read_skeletons(in); });
}

// ---- annotations ----

void write_annotations(std::ostream& out, const std::vector<AnnotatedClip>& clips) {
  out << json{{"format", kAnnotationFormat}, {"version", kTextFormatVersion}}.dump() << '\n';
  for (const auto& c : clips) {
    c.annotation.validate(c.clip_id);
    out << json{{"clip_id", c.clip_id},
                {"frames", c.frames},
                {"categorical", c.annotation.categorical},
                {"vad", c.annotation.vad}}
               .dump()
        << '\n';
  }
}

std::vector<AnnotatedClip> read_annotations(std::istream& in) {
  std::vector<AnnotatedClip> clips;
  read_jsonl(in, kAnnotationFormat, [&](const json& rec, std::size_t line) {
    AnnotatedClip c;
    c.clip_id = rec.at("clip_id").get<std::string>();
    c.frames = rec.value("frames", std::size_t{0});
    c.annotation.categorical = real_array(rec, "categorical", kNumCategories, line);
    c.annotation.vad = real_array(rec, "vad", kNumVad, line);
    try {
      c.annotation.validate(c.clip_id);
    } catch (const std::invalid_argument& e) {
      fail_line(line, e.what());
    }
    clips.push_back(std::move(c));
  });
  return clips;
}

void save_annotations(const std::filesystem::path& path, const std::vector<AnnotatedClip>& clips) {
  auto out = open_out(path);
  write_annotations(out, clips);
}

std::vector<AnnotatedClip> load_annotations(const std::filesystem::path& path) {
  return load_with(path, [](std::istream& in) { return read_annotations(in); });
}

// ---- predictions ----

void write_predictions(std::ostream& out, const PredictionSet& set) {
  out << json{{"format", kPredictionFormat},
              {"version", kTextFormatVersion},
              {"model", set.model},
              {"categorical_space", std::string(to_string(set.space))}}
             .dump()
      << '\n';
  for (const auto& p : set.items) {
    require_finite(p.categorical, "prediction for clip '" + p.clip_id + "'");
    require_finite(p.vad, "prediction for clip '" + p.clip_id + "'");
    if (set.space == ScoreSpace::kProbability) {
      for (double v : p.categorical)
        if (v < 0.0 || v > 1.0) {
          throw std::invalid_argument("probability-space prediction for clip '" + p.clip_id +
                                      "' is outside [0,1]");
        }
    }
    out << json{{"clip_id", p.clip_id}, {"categorical", p.categorical}, {"vad", p.vad}}.dump()
        << '\n';
  }
}

PredictionSet read_predictions(std::istream& in) {
  PredictionSet set;
  std::vector<Prediction> items;
  const auto header = read_jsonl(in, kPredictionFormat, [&](const json& rec, std::size_t line) {
    Prediction p;
    p.clip_id = rec.at("clip_id").get<std::string>();
    p.categorical = real_array(rec, "categorical", kNumCategories, line);
    p.vad = real_array(rec, "vad", kNumVad, line);
    items.push_back(std::move(p));
  });
  set.model = header.value("model", "");
  set.space = parse_score_space(header.value("categorical_space", "logit"));
  if (set.space == ScoreSpace::kProbability) {
    for (const auto& p : items)
      for (double v : p.categorical)
        if (!(v >= 0.0 && v <= 1.0)) {
          throw std::invalid_argument("probability-space prediction for clip '" + p.clip_id +
                                      "' is outside [0,1]");
        }
  }
  set.items = std::move(items);
  return set;
}

void save_predictions(const std::filesystem::path& path, const PredictionSet& set) {
  auto out = open_out(path);
  write_predictions(out, set);
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  return load_with(path, [](std::istream& in) { return read_predictions(in); });
}

// ---- embeddings ----

void write_embeddings(std::ostream& out, const objectives::EmbeddingTable& table) {
  for (const auto& label : table.labels()) {
    if (label.empty() || label.find_first_of(" \t\r\n") != std::string::npos || label[0] == '#') {
      throw std::invalid_argument("embedding label '" + label + "' cannot be written");
    }
    out << label;
    for (double v : table.at(label)) out << ' ' << format_real(v);
    out << '\n';
  }
}

objectives::EmbeddingTable read_embeddings(std::istream& in) {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> vectors;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    const auto start = text.find_first_not_of(" \t");
    if (start == std::string::npos || text[start] == '#') continue;
    std::istringstream fields(text);
    std::string label, tok;
    fields >> label;
    std::vector<double> vec;
    while (fields >> tok) {
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        fail_line(line_no, "bad embedding value '" + tok + "'");
      }
      vec.push_back(v);
    }
    if (vec.size() != objectives::EmbeddingTable::kDim) {
      fail_line(line_no, "embedding for '" + label + "' has " + std::to_string(vec.size()) +
                             " values, expected 300");
    }
    labels.push_back(std::move(label));
    vectors.push_back(std::move(vec));
  }
  return objectives::EmbeddingTable(std::move(labels), std::move(vectors));
}

void save_embeddings(const std::filesystem::path& path, const objectives::EmbeddingTable& table) {
  auto out = open_out(path);
  write_embeddings(out, table);
}

objectives::EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return load_with(path, [](std::istream& in) { return read_embeddings(in); });
}

// ---- features ----

void FeatureFile::validate() const {
  if (frames == 0) throw std::invalid_argument("feature file for '" + clip_id + "' has no frames");
  auto allowed = [&](const std::string& name) {
    if (name == "body" || name == "context" || name == "face") return true;
    return name == "scene" && modality == tsn::Modality::kRgb;
  };
  for (const auto& [name, values] : streams) {
    if (!allowed(name)) {
      throw std::invalid_argument("feature file for '" + clip_id + "' has unexpected " +
                                  std::string(tsn::to_string(modality)) + " stream '" + name +
                                  "'");
    }
    if (values.size() != frames * tsn::kStreamWidth) {
      const std::size_t width = values.size() / frames;
      throw std::invalid_argument("feature file for '" + clip_id + "': stream '" + name +
                                  "' has width " + std::to_string(width) +
                                  (values.size() % frames ? " (ragged)" : "") +
                                  ", expected 512 x " + std::to_string(frames) + " frames");
    }
    require_finite(values, "stream '" + name + "' of '" + clip_id + "'");
  }
  if (face_present) {
    if (face_present->size() != frames) {
      throw std::invalid_argument("face_present of '" + clip_id + "' does not match frame count");
    }
    for (double v : *face_present) {
      if (v != 0.0 && v != 1.0) {
        throw std::invalid_argument("face_present of '" + clip_id + "' must hold 0/1 flags");
      }
    }
  }
}

tsn::SnippetFeatureSet FeatureFile::snippet(std::size_t frame) const {
  if (frame >= frames) {
    throw std::out_of_range("frame " + std::to_string(frame) + " outside clip '" + clip_id + "'");
  }
  tsn::SnippetFeatureSet s;
  s.modality = modality;
  for (const auto& [name, values] : streams) {
    const auto first = values.begin() + static_cast<std::ptrdiff_t>(frame * tsn::kStreamWidth);
    s.streams.emplace(name, std::vector<double>(first, first + tsn::kStreamWidth));
  }
  return s;
}

Container features_to_container(const FeatureFile& f) {
  f.validate();
  Container c;
  c.kind = "features";
  c.schema_version = 1;
  c.attributes = {{"clip_id", f.clip_id},
                  {"modality", std::string(tsn::to_string(f.modality))},
                  {"frames", std::to_string(f.frames)}};
  for (const auto& [name, values] : f.streams) {
    c.records.push_back({name, {f.frames, tsn::kStreamWidth}, values});
  }
  if (f.face_present) c.records.push_back({"face_present", {f.frames}, *f.face_present});
  return c;
}

FeatureFile features_from_container(const Container& c) {
  if (c.kind != "features" || c.schema_version != 1) {
    throw std::invalid_argument("not a schema-1 feature container");
  }
  FeatureFile f;
  f.clip_id = c.attribute("clip_id");
  f.modality = tsn::parse_modality(c.attribute("modality"));
  try {
    f.frames = std::stoull(c.attribute("frames"));
  } catch (const std::logic_error&) {
    throw std::invalid_argument("feature file frame count is not a number");
  }
  for (const auto& r : c.records) {
    if (r.name == "face_present") {
      f.face_present = r.values;
      continue;
    }
    if (r.shape.size() != 2 || r.shape[0] != f.frames || r.shape[1] != tsn::kStreamWidth) {
      const std::size_t width = r.shape.size() == 2 ? r.shape[1] : 0;
      throw std::invalid_argument("feature file for '" + f.clip_id + "': stream '" + r.name +
                                  "' has width " + std::to_string(width) + ", expected 512");
    }
    f.streams.emplace(r.name, r.values);
  }
  f.validate();
  return f;
}

void save_features(const std::filesystem::path& path, const FeatureFile& f) {
  save_container(path, features_to_container(f));
}

FeatureFile load_features(const std::filesystem::path& path) {
  try {
    return features_from_container(load_container(path, "features", 1));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& clip_id,
                                   tsn::Modality modality) {
  return dir / (clip_id + "." + std::string(tsn::to_string(modality)) + ".bin");
}

// ---- scene/attribute weights ----

void save_scene_attr_weights(const std::filesystem::path& path, const tsn::SceneAttrWeights& w) {
  w.validate();
  Container c;
  c.kind = "scene-attr-weights";
  c.schema_version = 1;
  c.records.push_back({"W_scenes", w.scenes.shape(), {w.scenes.values().begin(), w.scenes.values().end()}});
  c.records.push_back(
      {"W_attr", w.attributes.shape(), {w.attributes.values().begin(), w.attributes.values().end()}});
  save_container(path, c);
}

tsn::SceneAttrWeights load_scene_attr_weights(const std::filesystem::path& path) {
  const auto c = load_container(path, "scene-attr-weights", 1);
  const auto& s = c.at("W_scenes");
  const auto& a = c.at("W_attr");
  tsn::SceneAttrWeights w;
  try {
    w.scenes = nd::Tensor(s.shape, s.values);
    w.attributes = nd::Tensor(a.shape, a.values);
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return w;
}

// ---- checkpoints ----

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Container c;
  c.kind = "checkpoint";
  c.schema_version = 1;
  c.attributes = ckpt.attributes;
  for (const auto& [name, arr] : ckpt.state) c.records.push_back({name, arr.shape, arr.values});
  save_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto c = load_container(path, "checkpoint", 1);
  Checkpoint ckpt;
  ckpt.attributes = c.attributes;
  for (const auto& r : c.records) {
    if (!ckpt.state.emplace(r.name, nn::NamedArray{r.shape, r.values}).second) {
      throw std::invalid_argument(path.string() + ": checkpoint repeats '" + r.name + "'");
    }
  }
  return ckpt;
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace ctxemo::io
