#include "gzk/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gzk::io {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot create " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// PGM

std::string encode_pgm(const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    const auto d = img.data();
    out.append(reinterpret_cast<const char*>(d.data()), d.size());
    return out;
}

namespace {

class PgmHeader {
public:
    explicit PgmHeader(std::string_view b) : b_(b) {}

    void skip_space() {
        while (pos_ < b_.size()) {
            const char c = b_[pos_];
            if (c == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    int number() {
        skip_space();
        int v = 0;
        const auto [ptr, ec] = std::from_chars(b_.data() + pos_, b_.data() + b_.size(), v);
        if (ec != std::errc{} || v <= 0) throw Error(ErrorCode::Format, "bad PGM header");
        pos_ = static_cast<std::size_t>(ptr - b_.data());
        return v;
    }

    std::size_t pos_ = 0;

private:
    std::string_view b_;
};

}  // namespace

GrayImage decode_pgm(std::string_view bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error(ErrorCode::Format, "not a binary PGM");
    PgmHeader h(bytes.substr(2));
    const int w = h.number();
    const int ht = h.number();
    const int maxval = h.number();
    if (maxval != 255) throw Error(ErrorCode::Format, "PGM maxval must be 255");
    std::size_t pos = 2 + h.pos_;
    if (pos >= bytes.size()) throw Error(ErrorCode::Format, "truncated PGM");
    ++pos;  // single whitespace after maxval
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(ht);
    if (bytes.size() - pos < n) throw Error(ErrorCode::Format, "truncated PGM pixel data");
    std::vector<std::uint8_t> data(n);
    std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), n, data.begin());
    return GrayImage(w, ht, std::move(data));
}

GrayImage read_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

// ---------------------------------------------------------------------------
// Frames

std::string frame_to_json_line(const pipeline::RawFrame& frame, const std::string& crop_path) {
    json j;
    j["subject_id"] = frame.subject_id;
    j["frame_index"] = frame.frame_index;
    j["label"] = frame.label ? json(std::string(region_name(*frame.label))) : json(nullptr);
    if (frame.record) {
        json lm = json::array();
        for (const auto& p : frame.record->landmarks.points()) {
            lm.push_back(p.x);
            lm.push_back(p.y);
        }
        json poly = json::array();
        for (const auto& p : frame.record->eye_polygon) {
            poly.push_back(p.x);
            poly.push_back(p.y);
        }
        j["landmarks"] = std::move(lm);
        j["eye_crop"] = crop_path;
        j["eye_polygon"] = std::move(poly);
    } else {
        j["landmarks"] = nullptr;
        j["eye_crop"] = nullptr;
        j["eye_polygon"] = nullptr;
    }
    return j.dump();
}

namespace {

std::vector<double> numbers(const json& j, std::size_t n, const char* key) {
    if (!j.is_array() || j.size() != n)
        throw Error(ErrorCode::Format, std::string(key) + " must be an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    out.reserve(n);
    for (const auto& v : j) {
        if (!v.is_number()) throw Error(ErrorCode::Format, std::string(key) + " holds a non-number");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

pipeline::RawFrame parse_frame_line(std::string_view line, const fs::path& base_dir) {
    pipeline::RawFrame f;
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        f.error = std::string("unparseable line: ") + e.what();
        return f;
    }
    if (!j.is_object()) {
        f.error = "frame line is not an object";
        return f;
    }
    try {
        if (auto it = j.find("subject_id"); it != j.end() && it->is_string()) f.subject_id = it->get<std::string>();
        if (auto it = j.find("frame_index"); it != j.end() && it->is_number_integer())
            f.frame_index = it->get<std::int64_t>();
        if (auto it = j.find("label"); it != j.end() && it->is_string()) {
            f.label = region_from_name(it->get<std::string>());
            if (!f.label) throw Error(ErrorCode::Format, "unknown label " + it->get<std::string>());
        }
        const auto lm_it = j.find("landmarks");
        if (lm_it == j.end() || lm_it->is_null()) {
            f.error = "no face";
            return f;
        }
        if (f.subject_id.empty()) throw Error(ErrorCode::Format, "missing subject_id");
        if (f.frame_index < 0) throw Error(ErrorCode::Format, "missing or negative frame_index");
        const auto lm = numbers(*lm_it, 2 * kLandmarkCount, "landmarks");
        const auto poly_v = numbers(j.value("eye_polygon", json()), 2 * kEyePoints, "eye_polygon");
        const auto crop_it = j.find("eye_crop");
        if (crop_it == j.end() || !crop_it->is_string()) throw Error(ErrorCode::Format, "eye_crop must be a path");
        fs::path crop_path = crop_it->get<std::string>();
        if (crop_path.is_relative()) crop_path = base_dir / crop_path;

        EyePolygon poly;
        for (std::size_t k = 0; k < kEyePoints; ++k) poly[k] = {poly_v[2 * k], poly_v[2 * k + 1]};
        FrameRecord rec{f.subject_id, f.frame_index, Landmarks::from_flat(lm), read_pgm(crop_path), poly,
                        f.label.value_or(GazeRegion::Road)};
        rec.validate();
        f.record = std::move(rec);
    } catch (const std::exception& e) {
        f.record.reset();
        f.error = e.what();
    }
    return f;
}

std::vector<pipeline::RawFrame> read_frames(const fs::path& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + jsonl_path.string());
    const fs::path base = jsonl_path.parent_path();
    std::vector<pipeline::RawFrame> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_frame_line(line, base));
    }
    if (in.bad()) throw Error(ErrorCode::Io, "cannot read " + jsonl_path.string());
    return out;
}

fs::path resolve_frames_path(const fs::path& data) {
    if (fs::is_directory(data)) return data / "frames.jsonl";
    return data;
}

namespace {

std::string crop_rel_path(const pipeline::RawFrame& f) {
    char num[32];
    std::snprintf(num, sizeof num, "%06lld", static_cast<long long>(f.frame_index));
    return "crops/" + f.subject_id + "/" + num + ".pgm";
}

json population_config_json(const synth::PopulationConfig& cfg) {
    json targets = json::object();
    for (auto r : kAllRegions) {
        const auto& t = cfg.targets[region_index(r)];
        targets[std::string(region_name(r))] = {t.x, t.y};
    }
    return {
        {"subjects", cfg.n_subjects},
        {"frames_per_region", cfg.frames_per_region},
        {"seed", cfg.seed},
        {"alpha_schedule", cfg.schedule == synth::AlphaSchedule::Linspace ? "linspace" : "uniform"},
        {"alpha_min", cfg.alpha_min},
        {"alpha_max", cfg.alpha_max},
        {"sigma_landmark", cfg.sigma_landmark},
        {"sigma_gaze", cfg.sigma_gaze},
        {"sigma_sway", cfg.sigma_sway},
        {"sigma_image", cfg.sigma_image},
        {"sigma_shape", cfg.sigma_shape},
        {"p_face_fail", cfg.p_face_fail},
        {"p_pupil_fail", cfg.p_pupil_fail},
        {"pupil_radius", cfg.pupil_radius},
        {"region_targets", targets},
    };
}

}  // namespace

DatasetSummary write_dataset(const fs::path& dir, const synth::Population& pop, const synth::PopulationConfig& cfg) {
    DatasetSummary s;
    std::string jsonl;
    std::vector<std::pair<std::string, std::string>> crops;
    for (const auto& sf : pop.frames) {
        const auto& f = sf.frame;
        std::string rel;
        if (f.record) {
            rel = crop_rel_path(f);
            crops.emplace_back(rel, encode_pgm(f.record->eye_crop));
            ++s.faces;
        }
        jsonl += frame_to_json_line(f, rel);
        jsonl += '\n';
        ++s.frames;
    }
    std::uint64_t h = fnv1a64(jsonl);
    for (const auto& [rel, bytes] : crops) {
        h = fnv1a64(bytes, h);
        write_file(dir / rel, bytes);
    }
    write_file(dir / "frames.jsonl", jsonl);
    s.digest = h;

    json subjects = json::array();
    for (const auto& p : pop.subjects) subjects.push_back({{"subject_id", p.subject_id}, {"head_gain", p.head_gain}});
    json manifest = {
        {"format", "gzk-dataset"},
        {"version", 1},
        {"frames", s.frames},
        {"faces", s.faces},
        {"digest_fnv1a64", hex64(h)},
        {"config", population_config_json(cfg)},
        {"subjects", subjects},
    };
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return s;
}

}  // namespace gzk::io
