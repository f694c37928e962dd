#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "parapde/pipeline.hpp"

namespace parapde {

/// Run context recorded in manifest.json.
struct RunInfo {
  std::string command;  // generate | discover | criteria | psd-bench
  std::string status;   // complete | partial | failed
  std::string error;    // message of the failure, if any
  int threads = 1;
};

/// scores.csv: one row per support size. The criterion columns come from
/// `scores`; rss_raw/rss_psd and the *_identity columns from the baselines.
void write_scores_csv(const std::filesystem::path& path, const DiscoveryResult& result,
                      const std::vector<CriterionScore>& scores);

/// filter.csv: per size the global BIC, p-values, p_cut, admission flag and
/// the per-step BICs.
void write_filter_csv(const std::filesystem::path& path, const DiscoveryResult& result);

void write_selection_json(const std::filesystem::path& path, const DiscoveryResult& result,
                          const std::vector<double>& lambda_grid);

/// bands.csv: step, axis value, term, posterior mean and std of the selected model.
void write_bands_csv(const std::filesystem::path& path, const DiscoveryResult& result);

void write_coeffs_json(const std::filesystem::path& path, const DiscoveryResult& result);

void write_manifest_json(const std::filesystem::path& path, const PipelineConfig& config,
                         const DatasetMeta& meta, const DiscoveryResult* result, const RunInfo& info);

/// Writes every table the completed stages support, then the manifest.
void write_discovery_report(const std::filesystem::path& dir, const PipelineConfig& config,
                            const DatasetMeta& meta, const DiscoveryResult& result, const RunInfo& info);

/// CSV with header representation,rel_error.
void write_representation_csv(const std::filesystem::path& path, const std::vector<RepresentationError>& rows);

}  // namespace parapde
