#include "chase/dataset_io.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

#include "chase/tensor.hpp"

namespace chase {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
}

void write_dataset_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write dataset file: " + path);
    for (const auto& rec : ds.records) {
        ordered_json j;
        j["id"] = rec.id;
        j["pair_id"] = rec.pair_id;
        j["label"] = to_string(rec.label);
        j["regime"] = to_string(rec.regime);
        j["alpha"] = rec.alpha;
        j["ambiguous"] = rec.ambiguous ? 1 : 0;
        j["split"] = rec.split;
        ordered_json frames = ordered_json::array();
        for (int t = 0; t < rec.frames; ++t) {
            ordered_json row = ordered_json::array();
            for (int c = 0; c < kFeatureDim; ++c) row.push_back(rec.feat(t, c));
            frames.push_back(std::move(row));
        }
        j["features"] = std::move(frames);
        out << j.dump() << "\n";
    }
}

Dataset read_dataset_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open dataset file: " + path);
    Dataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        SequenceRecord rec;
        rec.id = j.at("id").get<int>();
        rec.pair_id = j.at("pair_id").get<int>();
        rec.label = label_from_string(j.at("label").get<std::string>());
        rec.regime = regime_from_string(j.at("regime").get<std::string>());
        rec.alpha = j.at("alpha").get<double>();
        rec.ambiguous = j.at("ambiguous").get<int>() != 0;
        rec.split = j.at("split").get<std::string>();
        const auto& frames = j.at("features");
        rec.frames = static_cast<int>(frames.size());
        rec.features.reserve(static_cast<std::size_t>(rec.frames) * kFeatureDim);
        for (const auto& row : frames) {
            if (row.size() != kFeatureDim)
                throw ConfigError("dataset row with wrong feature arity in " + path);
            for (const auto& v : row) rec.features.push_back(v.get<double>());
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

std::string file_content_hash(const std::string& path) {
    std::string bytes = read_text_file(path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

void write_dataset_manifest(const Dataset& ds, const std::string& dataset_path,
                            const std::string& manifest_path) {
    const SimConfig& c = ds.config;
    ordered_json j;
    j["dataset_file"] = dataset_path;
    j["content_hash"] = file_content_hash(dataset_path);
    j["seed"] = c.seed;
    ordered_json cfg;
    cfg["frames"] = c.frames;
    cfg["count"] = c.count;
    cfg["box"] = c.box;
    cfg["radius_min"] = c.radius_min;
    cfg["radius_max"] = c.radius_max;
    cfg["sigma_brownian"] = c.sigma_brownian;
    cfg["spring_k"] = c.spring_k;
    cfg["rest_offset"] = c.rest_offset;
    cfg["drift_amplitude"] = c.drift_amplitude;
    cfg["sigma_obs"] = c.sigma_obs;
    cfg["proximity_pull"] = c.proximity_pull;
    cfg["bridge_latent_noise"] = c.bridge_latent_noise;
    cfg["ambiguous_threshold"] = c.ambiguous_threshold;
    cfg["regime_mix"] = c.regime_mix;
    j["config"] = std::move(cfg);

    std::map<std::string, int> cells;
    int flagged = 0;
    for (const auto& r : ds.records) {
        ++cells[std::string(to_string(r.label)) + "/" + to_string(r.regime)];
        if (r.ambiguous) ++flagged;
    }
    ordered_json counts;
    counts["total"] = static_cast<int>(ds.records.size());
    counts["ambiguous"] = flagged;
    for (const auto& [k, v] : cells) counts[k] = v;
    j["counts"] = std::move(counts);

    write_text_file(manifest_path, j.dump(2) + "\n");
}

}  // namespace chase
