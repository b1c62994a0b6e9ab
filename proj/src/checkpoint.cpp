#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "v2t/errors.hpp"
#include "v2t/model.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace v2t {

namespace {

constexpr char kMagic[4] = {'V', '2', 'T', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"vocab_size", c.vocab_size},   {"max_len", c.max_len},
            {"d_model", c.d_model},         {"n_heads", c.n_heads},
            {"n_layers", c.n_layers},       {"d_ff", c.d_ff},
            {"bottleneck_dim", c.bottleneck_dim}, {"dropout_rate", c.dropout_rate}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.bottleneck_dim = j.at("bottleneck_dim").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    return c;
}

}  // namespace

void Model::save_checkpoint(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["format_version"] = kFormatVersion;
    header["config"] = config_to_json(config_);
    header["step"] = step_;
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < params_.count(); ++i) {
        const auto& entry = params_.entry(static_cast<int>(i));
        manifest.push_back({{"name", entry.name},
                            {"shape", {entry.value.rows, entry.value.cols}},
                            {"offset", offset}});
        offset += entry.value.size() * sizeof(float);
    }
    header["tensors"] = std::move(manifest);
    std::string header_bytes = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic, 4);
    std::uint32_t version = kFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    std::uint64_t header_len = header_bytes.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    std::vector<float> buffer;
    for (std::size_t i = 0; i < params_.count(); ++i) {
        const Mat& value = params_.value(static_cast<int>(i));
        buffer.resize(value.size());
        for (std::size_t j = 0; j < value.size(); ++j) buffer[j] = static_cast<float>(value.d[j]);
        out.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    }
    if (!out) throw IoError("checkpoint write failed: " + path.string());
}

Model Model::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 16) throw FormatError("checkpoint too short: " + path.string());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic in " + path.string());
    }
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 4, sizeof version);
    if (version != kFormatVersion) {
        throw FormatError("unsupported checkpoint format version " + std::to_string(version));
    }
    std::uint64_t header_len;
    std::memcpy(&header_len, bytes.data() + 8, sizeof header_len);
    if (16 + header_len > bytes.size()) {
        throw FormatError("checkpoint header extends past end of file: " + path.string());
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("unparseable checkpoint header: ") + e.what());
    }

    ModelConfig config;
    long step;
    try {
        config = config_from_json(header.at("config"));
        step = header.at("step").get<long>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("incomplete checkpoint header: ") + e.what());
    }
    try {
        config.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid config in checkpoint header: ") + e.what());
    }

    Model model(config, 0);
    const auto& manifest = header.at("tensors");
    if (!manifest.is_array() || manifest.size() != model.params_.count()) {
        throw FormatError("checkpoint manifest does not match the model layout");
    }
    const std::size_t data_start = 16 + header_len;
    std::uint64_t expected_offset = 0;
    for (std::size_t i = 0; i < model.params_.count(); ++i) {
        auto& entry = model.params_.entry(static_cast<int>(i));
        const auto& t = manifest.at(i);
        if (t.at("name").get<std::string>() != entry.name) {
            throw FormatError("tensor name mismatch at index " + std::to_string(i) + ": expected " +
                              entry.name);
        }
        auto shape = t.at("shape");
        if (!shape.is_array() || shape.size() != 2 || shape.at(0).get<int>() != entry.value.rows ||
            shape.at(1).get<int>() != entry.value.cols) {
            throw FormatError("tensor shape mismatch for " + entry.name);
        }
        if (t.at("offset").get<std::uint64_t>() != expected_offset) {
            throw FormatError("tensor offset mismatch for " + entry.name);
        }
        expected_offset += entry.value.size() * sizeof(float);
    }
    if (data_start + expected_offset != bytes.size()) {
        throw FormatError("truncated or oversized checkpoint data in " + path.string());
    }
    std::size_t pos = data_start;
    for (std::size_t i = 0; i < model.params_.count(); ++i) {
        Mat& value = model.params_.value(static_cast<int>(i));
        for (std::size_t j = 0; j < value.size(); ++j) {
            float f;
            std::memcpy(&f, bytes.data() + pos, sizeof f);
            value.d[j] = static_cast<double>(f);
            pos += sizeof f;
        }
    }
    model.step_ = step;
    return model;
}

}  // namespace v2t
