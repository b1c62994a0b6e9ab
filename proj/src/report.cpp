#include "v2t/report.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "v2t/errors.hpp"

namespace v2t {

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

const char* kReportHeader =
    "condition,param,accuracy,entropy,entropy_per_token,mean_n_tokens,"
    "mean_max_word_repeat,mean_lm_llh,mean_lm_llh_per_token,jeffreys";

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

void write_report_csv(const std::filesystem::path& path, const PropertyReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << kReportHeader << '\n';
    for (const auto& row : report.rows) {
        out << row.condition << ',' << cell(row.param) << ',' << cell(row.accuracy) << ','
            << cell(row.entropy) << ',' << cell(row.entropy_per_token) << ','
            << cell(row.mean_n_tokens) << ',' << cell(row.mean_max_word_repeat) << ','
            << cell(row.mean_lm_llh) << ',' << cell(row.mean_lm_llh_per_token) << ','
            << cell(row.jeffreys) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_clustering_csv(const std::filesystem::path& path, const ClusteringScores& scores) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "calinski_harabasz,davies_bouldin,silhouette\n"
        << format_real(scores.calinski_harabasz) << ',' << format_real(scores.davies_bouldin)
        << ',' << format_real(scores.silhouette) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

void write_metadata_json(const std::filesystem::path& path, const PropertyReport& report) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    for (const auto& [key, value] : report.metadata) j[key] = value;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

LoadedRun load_run(const std::filesystem::path& run_dir) {
    auto report_path = run_dir / "report.csv";
    auto meta_path = run_dir / "meta.json";
    if (!std::filesystem::exists(report_path)) {
        throw IoError("no report.csv in run directory " + run_dir.string());
    }
    LoadedRun run;
    run.model_tag = run_dir.filename().string();
    if (std::filesystem::exists(meta_path)) {
        std::ifstream in(meta_path, std::ios::binary);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("unparseable meta.json in " + run_dir.string() + ": " + e.what());
        }
        run.schema_version = j.value("schema_version", 0);
        if (j.contains("model_tag")) run.model_tag = j["model_tag"].get<std::string>();
    }
    auto lines = read_lines(report_path);
    if (lines.empty()) throw FormatError("empty report.csv in " + run_dir.string());
    run.header = split_csv_line(lines.front());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto cells = split_csv_line(lines[i]);
        if (cells.size() != run.header.size()) {
            throw FormatError("ragged row " + std::to_string(i + 1) + " in " +
                              report_path.string());
        }
        run.rows.push_back(std::move(cells));
    }
    return run;
}

void write_comparison_csv(const std::filesystem::path& path,
                          const std::vector<LoadedRun>& runs) {
    if (runs.empty()) throw ConfigError("comparison needs at least one run");
    for (const auto& run : runs) {
        if (run.schema_version != runs.front().schema_version) {
            throw SchemaError("schema version mismatch: run '" + run.model_tag + "' has version " +
                              std::to_string(run.schema_version) + ", expected " +
                              std::to_string(runs.front().schema_version));
        }
        if (run.header != runs.front().header) {
            throw SchemaError("report columns differ between runs (run '" + run.model_tag + "')");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "model_tag";
    for (const auto& column : runs.front().header) out << ',' << column;
    out << '\n';
    for (const auto& run : runs) {
        for (const auto& row : run.rows) {
            out << run.model_tag;
            for (const auto& value : row) out << ',' << value;
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace v2t
