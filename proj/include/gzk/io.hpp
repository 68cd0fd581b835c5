#pragma once

// On-disk formats.
//
// Dataset directory:
//   frames.jsonl            one frame per line
//   crops/<subject>/<n>.pgm binary PGM (P5, maxval 255) eye crops
//   manifest.json           generator config, subjects and an FNV-1a digest
//
// A frame line holds subject_id, frame_index, label (region name), and either
// landmarks (136 numbers, x0 y0 x1 y1 ...), eye_crop (path relative to the
// JSONL file) and eye_polygon (12 numbers in crop pixels), or null for all
// three when no face was found.
//
// Model file: little-endian binary, see write_model.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gzk/core.hpp"
#include "gzk/forest.hpp"
#include "gzk/pipeline.hpp"
#include "gzk/synth.hpp"

namespace gzk::io {

namespace fs = std::filesystem;

// 64-bit FNV-1a, chainable through `h`.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t v);

std::string read_file(const fs::path& path);                         // throws Io
void write_file(const fs::path& path, std::string_view bytes);       // creates parent dirs, throws Io

std::string encode_pgm(const GrayImage& img);
GrayImage decode_pgm(std::string_view bytes);  // throws Format
GrayImage read_pgm(const fs::path& path);

// ---------------------------------------------------------------------------
// Frames

std::string frame_to_json_line(const pipeline::RawFrame& frame, const std::string& crop_path);

// Never throws for bad content: an unreadable line yields a frame without a
// record and the reason in `error`. Crop paths are resolved against base_dir.
pipeline::RawFrame parse_frame_line(std::string_view line, const fs::path& base_dir);

std::vector<pipeline::RawFrame> read_frames(const fs::path& jsonl_path);  // throws Io

// Accepts a dataset directory or a frames.jsonl path.
fs::path resolve_frames_path(const fs::path& data);

struct DatasetSummary {
    std::size_t frames = 0;
    std::size_t faces = 0;
    std::uint64_t digest = 0;
};

// Writes frames.jsonl, crops/ and manifest.json under `dir`.
DatasetSummary write_dataset(const fs::path& dir, const synth::Population& pop, const synth::PopulationConfig& cfg);

// ---------------------------------------------------------------------------
// Forest model

inline constexpr std::uint16_t kModelVersion = 1;

std::string encode_model(const forest::ForestModel& model);
forest::ForestModel decode_model(std::string_view bytes);  // throws Format

void write_model(const fs::path& path, const forest::ForestModel& model);
forest::ForestModel read_model(const fs::path& path);

}  // namespace gzk::io
