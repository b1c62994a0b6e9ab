#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "v2t/eval.hpp"

namespace v2t {

inline constexpr int kReportSchemaVersion = 1;

// %.6g formatting used for every real in CSV output.
std::string format_real(double v);

void write_report_csv(const std::filesystem::path& path, const PropertyReport& report);
void write_clustering_csv(const std::filesystem::path& path, const ClusteringScores& scores);
void write_metadata_json(const std::filesystem::path& path, const PropertyReport& report);

struct LoadedRun {
    std::string model_tag;
    int schema_version = 0;
    std::vector<std::string> header;      // report.csv column names
    std::vector<std::vector<std::string>> rows;
};

LoadedRun load_run(const std::filesystem::path& run_dir);

// Long-format merge keyed by (model_tag, condition); throws SchemaError on a
// schema version disagreement.
void write_comparison_csv(const std::filesystem::path& path,
                          const std::vector<LoadedRun>& runs);

}  // namespace v2t
