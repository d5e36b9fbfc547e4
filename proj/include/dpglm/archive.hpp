#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpglm/gibbs.hpp"
#include "dpglm/model.hpp"
#include "dpglm/state.hpp"

namespace dpglm {

inline constexpr const char* kArchiveFormat = "dpglm-archive/1";

// Everything needed to predict again without refitting. Training data are
// stored on the model's (normalized) scale; cluster statistics are
// recomputed from labels on load, not stored.
struct ModelArchive {
  nlohmann::json config;  // the run configuration as given
  ModelSpec spec;
  Dataset training;
  std::vector<PosteriorSample> samples;
  ChainDiagnostics diagnostics;
};

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& doc, const DataSchema& schema);
nlohmann::json norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& doc);

// Long-format tables, one value per line:
//   sample,iteration,alpha,cluster,count,param,dim,index,value
//   sample,row,label
std::string format_samples_csv(const std::vector<PosteriorSample>& samples);
std::string format_labels_csv(const std::vector<PosteriorSample>& samples);
std::string format_diagnostics_csv(const ChainDiagnostics& diagnostics);

// Gzip stream with a zero timestamp around sorted-key JSON, so equal
// archives are equal bytes.
std::string encode_archive(const ModelArchive& archive);
ModelArchive decode_archive(const std::string& bytes);
void write_archive(const ModelArchive& archive, const std::filesystem::path& path);
ModelArchive read_archive(const std::filesystem::path& path);

std::string gzip_compress(const std::string& data);
std::string gzip_decompress(const std::string& data);

}  // namespace dpglm
