#include "latefuse/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace latefuse {

using ordered_json = nlohmann::ordered_json;

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

namespace {

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing", path);
  return out;
}

std::string read_whole_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure", path);
  return ss.str();
}

void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failure", path);
}

ordered_json parse_json_line(const std::string& line, int line_number) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON", line_number);
  if (!j.is_object()) throw ParseError("expected a JSON object", line_number);
  return j;
}

void reject_unknown_keys(const ordered_json& obj, const std::set<std::string>& known,
                         int line_number) {
  for (const auto& [key, value] : obj.items())
    if (!known.contains(key)) throw ParseError("unknown key \"" + key + "\"", line_number);
}

void stamp_meta(ordered_json& obj, const ArtifactMeta* meta) {
  if (!meta) return;
  obj["seed"] = meta->seed;
  obj["config_hash"] = meta->config_hash;
  obj["command"] = meta->command;
  if (!meta->config_json.empty())
    obj["config"] = ordered_json::parse(meta->config_json);
}

Vec json_to_vec(const ordered_json& arr, int line_number, const char* what) {
  if (!arr.is_array()) throw ParseError(std::string(what) + " must be an array", line_number);
  Vec v;
  v.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) throw ParseError(std::string(what) + " entries must be numbers", line_number);
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

void save_dataset(const MultimodalDataset& dataset, const std::string& path,
                  const ArtifactMeta* meta) {
  dataset.validate();
  std::ofstream out = open_for_write(path);

  ordered_json header;
  header["format_version"] = "1";
  header["class_count"] = dataset.class_count;
  header["modalities"] = dataset.modality_names;
  header["context_dim"] = dataset.context_dim;
  stamp_meta(header, meta);
  out << header.dump() << '\n';

  for (const SampleRecord& s : dataset.samples) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["label"] = s.label;
    ordered_json scores;
    for (std::size_t m = 0; m < dataset.modality_names.size(); ++m)
      scores[dataset.modality_names[m]] = s.scores[m];
    rec["scores"] = std::move(scores);
    if (dataset.context_dim > 0) rec["context"] = s.context;
    out << rec.dump() << '\n';
  }
  finish_write(out, path);
}

MultimodalDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading", path);

  std::string line;
  int line_number = 0;
  if (!std::getline(in, line)) throw ParseError("empty dataset file", 1);
  ++line_number;

  static const std::set<std::string> kHeaderKeys = {
      "format_version", "class_count", "modalities", "context_dim",
      "normalize",      "seed",        "config_hash", "command", "config"};
  ordered_json header = parse_json_line(line, line_number);
  reject_unknown_keys(header, kHeaderKeys, line_number);

  if (!header.contains("format_version") || header["format_version"] != "1")
    throw ParseError("missing or unsupported format_version", line_number);
  if (!header.contains("class_count") || !header["class_count"].is_number_integer())
    throw ParseError("header needs integer class_count", line_number);
  if (!header.contains("modalities") || !header["modalities"].is_array())
    throw ParseError("header needs modalities array", line_number);
  if (!header.contains("context_dim") || !header["context_dim"].is_number_integer())
    throw ParseError("header needs integer context_dim", line_number);

  bool normalize = false;
  if (header.contains("normalize")) {
    if (header["normalize"] != "softmax")
      throw ParseError("normalize flag must be \"softmax\"", line_number);
    normalize = true;
  }

  MultimodalDataset ds;
  ds.class_count = header["class_count"].get<int>();
  ds.context_dim = header["context_dim"].get<int>();
  for (const auto& name : header["modalities"]) {
    if (!name.is_string()) throw ParseError("modality names must be strings", line_number);
    ds.modality_names.push_back(name.get<std::string>());
  }
  if (ds.class_count < 2) throw ParseError("class_count must be >= 2", line_number);
  if (ds.modality_names.empty()) throw ParseError("modalities must be non-empty", line_number);
  if (ds.context_dim < 0) throw ParseError("context_dim must be >= 0", line_number);

  static const std::set<std::string> kRecordKeys = {"id", "label", "scores", "context"};
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    ordered_json rec = parse_json_line(line, line_number);
    reject_unknown_keys(rec, kRecordKeys, line_number);

    SampleRecord s;
    if (!rec.contains("id") || !rec["id"].is_string())
      throw ParseError("record needs string id", line_number);
    s.id = rec["id"].get<std::string>();
    if (!rec.contains("label") || !rec["label"].is_number_integer())
      throw ParseError("record needs integer label", line_number);
    s.label = rec["label"].get<int>();
    if (s.label < 0 || s.label >= ds.class_count)
      throw ParseError("label out of range", line_number);

    if (!rec.contains("scores") || !rec["scores"].is_object())
      throw ParseError("record needs scores object", line_number);
    const auto& scores = rec["scores"];
    if (scores.size() != ds.modality_names.size())
      throw ParseError("scores must hold exactly the header modalities", line_number);
    for (const std::string& name : ds.modality_names) {
      if (!scores.contains(name))
        throw ParseError("scores missing modality \"" + name + "\"", line_number);
      Vec x = json_to_vec(scores[name], line_number, "score vector");
      if (x.size() != static_cast<std::size_t>(ds.class_count))
        throw ParseError("score vector for \"" + name + "\" has wrong length", line_number);
      if (!all_finite(x)) throw ParseError("non-finite score value", line_number);
      if (normalize) x = stable_softmax(x);
      s.scores.push_back(std::move(x));
    }

    if (ds.context_dim > 0) {
      if (!rec.contains("context")) throw ParseError("record needs context array", line_number);
      s.context = json_to_vec(rec["context"], line_number, "context");
      if (s.context.size() != static_cast<std::size_t>(ds.context_dim))
        throw ParseError("context has wrong length", line_number);
    } else if (rec.contains("context")) {
      throw ParseError("context present but header context_dim is 0", line_number);
    }

    if (!normalize) {
      for (std::size_t m = 0; m < s.scores.size(); ++m)
        if (!is_probability_vector(s.scores[m]))
          throw ValidationError("scores for sample '" + s.id + "' (line " +
                                std::to_string(line_number) +
                                ") are not probability vectors; set normalize=\"softmax\" "
                                "to ingest logit-valued scores");
    }
    ds.samples.push_back(std::move(s));
  }
  if (in.bad()) throw IoError("read failure", path);
  if (ds.samples.empty()) throw ValidationError("dataset file has no records");
  ds.validate();
  return ds;
}

namespace {

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

void write_meta_comments(std::ofstream& out, const ArtifactMeta* meta) {
  if (!meta) return;
  out << "# command: " << meta->command << '\n';
  out << "# config: " << meta->config_json << '\n';
  out << "# config_hash: " << meta->config_hash << '\n';
  out << "# seed: " << meta->seed << '\n';
}

}  // namespace

void save_sweep(const SweepResult& result, const std::vector<std::string>& modality_names,
                const std::string& path, const ArtifactMeta* meta) {
  if (result.rows.empty()) throw InvalidInput("save_sweep: empty result");
  if (result.rows.front().weights.size() != modality_names.size())
    throw InvalidInput("save_sweep: modality name count does not match weights");

  std::ofstream out = open_for_write(path);
  write_meta_comments(out, meta);
  for (std::size_t m = 0; m < modality_names.size(); ++m)
    out << "weight_" << modality_names[m] << ',';
  out << "accuracy,mean_log_loss\n";
  for (const SweepRow& row : result.rows) {
    for (std::size_t m = 0; m < row.weights.size(); ++m)
      out << fixed6(row.weights[m]) << ',';
    out << fixed6(row.accuracy) << ',' << fixed6(row.mean_log_loss) << '\n';
  }
  finish_write(out, path);
}

void append_gating_row(const std::string& path, int modality_count, double accuracy,
                       double mean_log_loss) {
  if (modality_count < 1) throw InvalidInput("append_gating_row: bad modality count");
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open file for appending", path);
  out << "gating,";
  for (int m = 1; m < modality_count; ++m) out << ',';
  out << fixed6(accuracy) << ',' << fixed6(mean_log_loss) << '\n';
  finish_write(out, path);
}

void save_report(const TrainReport& report, const std::string& path, const ArtifactMeta* meta) {
  ordered_json j;
  j["format_version"] = "1";
  j["kind"] = "train_report";
  j["epoch_loss"] = report.epoch_loss;
  j["final_train_accuracy"] = report.final_train_accuracy;
  if (report.final_holdout_accuracy)
    j["final_holdout_accuracy"] = *report.final_holdout_accuracy;
  j["train_seed"] = report.seed;
  stamp_meta(j, meta);

  std::ofstream out = open_for_write(path);
  out << j.dump(2) << '\n';
  finish_write(out, path);
}

TrainReport load_report(const std::string& path) {
  ordered_json j = ordered_json::parse(read_whole_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("malformed report file", 0);
  if (!j.contains("kind") || j["kind"] != "train_report")
    throw ParseError("not a train_report file", 0);
  try {
    TrainReport r;
    r.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
    r.final_train_accuracy = j.at("final_train_accuracy").get<double>();
    if (j.contains("final_holdout_accuracy"))
      r.final_holdout_accuracy = j["final_holdout_accuracy"].get<double>();
    r.seed = j.at("train_seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report field missing or ill-typed: ") + e.what(), 0);
  }
}

namespace {

const char* gate_mode_name(GateMode mode) {
  return mode == GateMode::constant ? "constant" : "input";
}

GateMode gate_mode_from(const std::string& name) {
  if (name == "constant") return GateMode::constant;
  if (name == "input") return GateMode::input_conditioned;
  throw ParseError("unknown gate_mode \"" + name + "\"", 0);
}

}  // namespace

void save_gate_checkpoint(const GateMLP& net, const TrainConfig& config,
                          const std::string& path, const ArtifactMeta* meta) {
  ordered_json j;
  j["format_version"] = "1";
  j["kind"] = "gate_mlp";
  j["input_dim"] = net.input_dim;
  j["hidden_dim"] = net.hidden_dim;
  j["output_dim"] = net.output_dim;
  j["w1"] = net.w1;
  j["b1"] = net.b1;
  j["w2"] = net.w2;
  j["b2"] = net.b2;
  ordered_json cfg;
  cfg["learning_rate"] = config.learning_rate;
  cfg["momentum"] = config.momentum;
  cfg["epochs"] = config.epochs;
  cfg["batch_size"] = config.batch_size;
  cfg["seed"] = config.seed;
  cfg["init_scale"] = config.init_scale;
  cfg["hidden_dim"] = config.hidden_dim;
  cfg["gate_mode"] = gate_mode_name(config.gate_mode);
  j["train_config"] = std::move(cfg);
  stamp_meta(j, meta);

  std::ofstream out = open_for_write(path);
  out << j.dump(2) << '\n';
  finish_write(out, path);
}

std::pair<GateMLP, TrainConfig> load_gate_checkpoint(const std::string& path) {
  ordered_json j = ordered_json::parse(read_whole_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("malformed checkpoint file", 0);
  if (!j.contains("kind") || j["kind"] != "gate_mlp")
    throw ParseError("not a gate_mlp checkpoint", 0);

  GateMLP net;
  TrainConfig config;
  try {
    net.input_dim = j.at("input_dim").get<int>();
    net.hidden_dim = j.at("hidden_dim").get<int>();
    net.output_dim = j.at("output_dim").get<int>();
    net.w1 = j.at("w1").get<Vec>();
    net.b1 = j.at("b1").get<Vec>();
    net.w2 = j.at("w2").get<Vec>();
    net.b2 = j.at("b2").get<Vec>();

    const ordered_json& cfg = j.at("train_config");
    config.learning_rate = cfg.at("learning_rate").get<double>();
    config.momentum = cfg.at("momentum").get<double>();
    config.epochs = cfg.at("epochs").get<int>();
    config.batch_size = cfg.at("batch_size").get<int>();
    config.seed = cfg.at("seed").get<std::uint64_t>();
    config.init_scale = cfg.at("init_scale").get<double>();
    config.hidden_dim = cfg.at("hidden_dim").get<int>();
    config.gate_mode = gate_mode_from(cfg.at("gate_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint field missing or ill-typed: ") + e.what(), 0);
  }

  if (net.input_dim < 1 || net.hidden_dim < 1 || net.output_dim < 1 ||
      net.w1.size() != static_cast<std::size_t>(net.hidden_dim) * net.input_dim ||
      net.b1.size() != static_cast<std::size_t>(net.hidden_dim) ||
      net.w2.size() != static_cast<std::size_t>(net.output_dim) * net.hidden_dim ||
      net.b2.size() != static_cast<std::size_t>(net.output_dim))
    throw ValidationError("checkpoint dimensions are inconsistent");
  if (!all_finite(net.w1) || !all_finite(net.b1) || !all_finite(net.w2) || !all_finite(net.b2))
    throw ValidationError("checkpoint parameters must be finite");

  return {std::move(net), config};
}

namespace {

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      // synth
      "classes", "modalities", "contexts", "reliability", "samples", "mode",
      "sharpness", "noise",
      // training
      "learning_rate", "momentum", "epochs", "batch_size", "init_scale",
      "hidden_dim", "gate_mode", "holdout",
      // shared
      "seed", "step", "threads", "strategy",
      // paths
      "dataset", "output", "checkpoint", "report"};
  return keys;
}

}  // namespace

void check_known_config_keys(const ordered_json& config) {
  if (!config.is_object()) throw ConfigError("config must be a flat key-value object", "");
  for (const auto& [key, value] : config.items()) {
    if (!known_config_keys().contains(key))
      throw ConfigError("unknown config key \"" + key + "\"", key);
    if (value.is_object() || value.is_array())
      throw ConfigError("config key \"" + key + "\" must be a scalar", key);
  }
}

nlohmann::ordered_json load_config_file(const std::string& path) {
  const std::string text = read_whole_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    return ordered_json::object();
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed config file", 0);
  check_known_config_keys(j);
  return j;
}

std::string canonical_config_dump(const ordered_json& config) {
  // plain json sorts keys, making the dump independent of insertion order
  nlohmann::json sorted = nlohmann::json::parse(config.dump());
  return sorted.dump();
}

std::vector<Vec> parse_reliability(const std::string& text, int modality_count,
                                   int context_count) {
  std::vector<Vec> rows;
  std::stringstream row_stream(text);
  std::string row_text;
  while (std::getline(row_stream, row_text, ';')) {
    Vec row;
    std::stringstream cell_stream(row_text);
    std::string cell;
    while (std::getline(cell_stream, cell, ',')) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw InvalidInput("reliability: cannot parse \"" + cell + "\"");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos)
        throw InvalidInput("reliability: trailing junk in \"" + cell + "\"");
      row.push_back(value);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != static_cast<std::size_t>(modality_count))
    throw InvalidInput("reliability: expected one ';'-separated row per modality");
  for (const Vec& row : rows)
    if (row.size() != static_cast<std::size_t>(context_count))
      throw InvalidInput("reliability: expected one ','-separated entry per context");
  return rows;
}

}  // namespace latefuse
