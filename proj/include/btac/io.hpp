#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "btac/engine.hpp"
#include "btac/postprocess.hpp"
#include "btac/simulate.hpp"

namespace btac::io {

/// Field-attributed validation error; the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_, const std::string& msg)
      : std::runtime_error("config field '" + field_ + "': " + msg),
        field(std::move(field_)) {}
};

// --- flat key = value config files ---

using KvConfig = std::map<std::string, std::string>;

/// Parses `key = value` lines ('#' comments, blank lines allowed).
KvConfig parse_config_file(const std::filesystem::path& path);

/// Simulation schema. Unknown keys are errors.
SimSpec sim_spec_from_config(const KvConfig& kv, std::uint64_t* seed_out);

/// Fit schema (ranks, run lengths, hyper scales...). Unknown keys are
/// errors.
RunConfig run_config_from_config(const KvConfig& kv);

std::vector<int> parse_rank_list(const std::string& text);
std::vector<ConnectedPair> parse_pairs(const std::string& text);

// --- dataset manifest + blobs ---

/// Writes manifest.json plus little-endian float64 blobs: x.bin for the
/// covariate and y_s<i>_r<g>.bin per (subject, region) series, time-major
/// then mode-1-fastest voxels. The truth record, when present, adds
/// truth_b_r<g>.bin, truth_d.bin and truth_prec.bin.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                   const std::string& config_echo);

/// Reads and validates a dataset directory (or its manifest.json path):
/// every referenced blob must exist with byte length 8 * T * prod(dims).
Dataset read_dataset(const std::filesystem::path& dir_or_manifest);

// --- chain files ---

/// Incremental chain writer: fixed JSON header then raw float64 records.
/// The header carries only run-defining metadata (never worker counts or
/// paths), so identical runs produce identical bytes.
class ChainWriter {
 public:
  ChainWriter(const std::filesystem::path& path, const ChainMeta& meta,
              bool append_mode);
  void append(std::span<const double> record);
  void flush();
  std::int64_t records_written() const { return records_; }

 private:
  std::filesystem::path path_;
  ChainMeta meta_;
  std::int64_t record_len_ = 0;
  std::int64_t records_ = 0;
  std::int64_t header_bytes_ = 0;
  std::ofstream out_;
};

void write_chain(const std::filesystem::path& path, const ChainStore& chain);
ChainStore read_chain(const std::filesystem::path& path);
ChainMeta read_chain_meta(const std::filesystem::path& path);
/// Drops records beyond `records` (resume support).
void truncate_chain(const std::filesystem::path& path, std::int64_t records);

void write_timing(const std::filesystem::path& path,
                  const std::vector<double>& seconds, bool append_mode);
std::vector<double> read_timing(const std::filesystem::path& path);

// --- sampler checkpoints ---

void save_checkpoint(const std::filesystem::path& path, const SamplerState& st);
SamplerState load_checkpoint(const std::filesystem::path& path, const Dataset& ds);

// --- results bundle ---

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

void write_selection_json(const std::filesystem::path& path,
                          const PosteriorSummary& summary,
                          const std::string& model_label);

/// Minimal grid heatmap with a blue-white-red diverging scale.
void write_svg_heatmap(const std::filesystem::path& path,
                       const Eigen::MatrixXd& values, const std::string& title);

/// Middle slice of a tensor for plotting: the first two modes at the
/// midpoint of every remaining mode.
Eigen::MatrixXd middle_slice(const DenseTensor& t);

}  // namespace btac::io
