#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latefuse/core.hpp"
#include "latefuse/fusion.hpp"
#include "latefuse/gatenet.hpp"
#include "latefuse/synth.hpp"

namespace latefuse {

// Provenance stamped into every output artifact so any result file names the
// run that produced it.
struct ArtifactMeta {
  std::string command;      // command line as invoked
  std::string config_json;  // canonical (sorted-key) dump of the effective config
  std::string config_hash;  // fnv1a64 of config_json, hex
  std::uint64_t seed = 0;
};

std::string fnv1a_hex(std::string_view data);

// --- dataset files: one header object, then one record per line (JSONL) ---

void save_dataset(const MultimodalDataset& dataset, const std::string& path,
                  const ArtifactMeta* meta = nullptr);

// Validates against the header schema. A header flag normalize="softmax"
// runs every score vector through stable_softmax on load (for logit-valued
// exports); otherwise scores must already be probability vectors.
MultimodalDataset load_dataset(const std::string& path);

// --- sweep tables: CSV mirroring the fixed-weight/accuracy layout ---

void save_sweep(const SweepResult& result, const std::vector<std::string>& modality_names,
                const std::string& path, const ArtifactMeta* meta = nullptr);

// Appends the trained-gate row ("gating" in the first column).
void append_gating_row(const std::string& path, int modality_count, double accuracy,
                       double mean_log_loss);

// --- training reports ---

void save_report(const TrainReport& report, const std::string& path,
                 const ArtifactMeta* meta = nullptr);
TrainReport load_report(const std::string& path);

// --- gate checkpoints: dims, parameters row-major, config echo, seed ---

void save_gate_checkpoint(const GateMLP& net, const TrainConfig& config,
                          const std::string& path, const ArtifactMeta* meta = nullptr);
std::pair<GateMLP, TrainConfig> load_gate_checkpoint(const std::string& path);

// --- run configuration: flat key-value document, unknown keys rejected ---

// Accepts an empty (whitespace-only) file as an empty config.
nlohmann::ordered_json load_config_file(const std::string& path);

// Throws ConfigError naming the first unknown key.
void check_known_config_keys(const nlohmann::ordered_json& config);

// Sorted-key single-line dump used for hashing and echoing.
std::string canonical_config_dump(const nlohmann::ordered_json& config);

// "r00,r01;r10,r11": rows are modalities, columns contexts.
std::vector<Vec> parse_reliability(const std::string& text, int modality_count,
                                   int context_count);

}  // namespace latefuse
