#pragma once

#include <string>

#include "chase/simulator.hpp"

namespace chase {

// One JSON object per line:
//   {"id", "pair_id", "label", "regime", "alpha", "ambiguous", "split",
//    "features": [[6 floats] x frames]}
void write_dataset_jsonl(const Dataset& ds, const std::string& path);
Dataset read_dataset_jsonl(const std::string& path);

// Manifest records the generating config, seed, per-cell counts and a
// content hash of the dataset file.
void write_dataset_manifest(const Dataset& ds, const std::string& dataset_path,
                            const std::string& manifest_path);

// FNV-1a over the file bytes, as a fixed-width hex string.
std::string file_content_hash(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace chase
