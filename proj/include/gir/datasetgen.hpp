#pragma once

// Test-set construction: the default 100-task bank, the LQ image tree and
// its manifest, and manifest validation.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "gir/image_io.hpp"
#include "gir/parallel.hpp"
#include "gir/pipeline.hpp"

namespace gir {

inline constexpr int kManifestVersion = 1;

inline constexpr std::array<std::string_view, 10> kSceneLabels = {
    "animal", "vegetation", "mountain view", "scenery", "texture",
    "portrait", "food", "daily scenes", "art", "architecture"};

inline bool is_scene_label(std::string_view s) {
  return std::find(kSceneLabels.begin(), kSceneLabels.end(), s) != kSceneLabels.end();
}

// ---------------------------------------------------------------------------
// Default task bank

namespace detail {

using K = DegradationKind;

/// Published mixture chains, tasks 11..50 in order.
inline const std::vector<std::vector<K>>& appendix_chains() {
  static const std::vector<std::vector<K>> chains = {
      {K::Rain, K::Ringing},
      {K::Ringing, K::Ringing},
      {K::Noise, K::Resize},
      {K::Compression, K::AlgArtifact},
      {K::Haze, K::Noise},
      {K::Compression, K::Damage},
      {K::Damage, K::AlgArtifact},
      {K::Snow, K::Compression},
      {K::Noise, K::Blur},
      {K::Noise, K::Ringing},
      {K::Compression, K::Damage, K::Resize},
      {K::AlgArtifact, K::AlgArtifact, K::Damage},
      {K::AlgArtifact, K::Noise, K::AlgArtifact},
      {K::Snow, K::Compression, K::Ringing},
      {K::Haze, K::Resize, K::Resize},
      {K::Rain, K::Resize, K::Resize},
      {K::Noise, K::Damage, K::Damage},
      {K::AlgArtifact, K::Ringing, K::Blur},
      {K::Snow, K::Blur, K::Noise},
      {K::Noise, K::Compression, K::Resize},
      {K::Resize, K::Ringing, K::Damage, K::Resize},
      {K::Haze, K::Resize, K::Resize, K::Resize},
      {K::Noise, K::Damage, K::Resize, K::Ringing},
      {K::Rain, K::Resize, K::Resize, K::Resize},
      {K::Snow, K::Ringing, K::AlgArtifact, K::Ringing},
      {K::Blur, K::Ringing, K::Noise, K::Damage},
      {K::Haze, K::Resize, K::Blur, K::Noise},
      {K::Snow, K::Noise, K::Noise, K::Noise},
      {K::Blur, K::Blur, K::Blur, K::Blur},
      {K::Blur, K::Ringing, K::Ringing, K::AlgArtifact},
      {K::AlgArtifact, K::Resize, K::Blur, K::Compression, K::Damage},
      {K::Noise, K::Resize, K::Damage, K::AlgArtifact, K::Resize},
      {K::Snow, K::Ringing, K::Damage, K::Resize, K::Resize},
      {K::Haze, K::Blur, K::AlgArtifact, K::Noise, K::Ringing},
      {K::Resize, K::Resize, K::Resize, K::Resize, K::Resize},
      {K::Rain, K::Ringing, K::Ringing, K::Noise, K::Compression},
      {K::Snow, K::Ringing, K::Blur, K::Noise, K::Ringing},
      {K::Compression, K::Noise, K::Noise, K::Ringing, K::Noise},
      {K::Blur, K::Resize, K::Compression, K::Ringing, K::Blur},
      {K::Haze, K::Compression, K::Damage, K::Compression, K::Noise},
  };
  return chains;
}

inline constexpr std::array<K, 10> kSingleTaskOrder = {K::Resize, K::Blur,    K::Noise, K::Compression, K::Damage,
                                                       K::Ringing, K::AlgArtifact, K::Rain, K::Haze, K::Snow};

inline std::string describe(const std::vector<K>& kinds) {
  std::string s;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) s += " + ";
    s += kind_name(kinds[i]);
  }
  return s;
}

inline constexpr std::uint64_t kRandomTaskLane = 0x5241'4E44'4F4DULL;

}  // namespace detail

/// 100 tasks: 1-10 single degradations, 11-50 the published mixture chains
/// (both with representative strengths), 51-100 random recipes drawn from
/// `master_seed`, ten per order k = 1..5.
inline std::vector<TaskSpec> default_task_bank(std::uint64_t master_seed = 0) {
  std::vector<TaskSpec> bank;
  auto add_fixed = [&](const std::vector<DegradationKind>& kinds, std::string description) {
    const std::string id = std::to_string(bank.size() + 1);
    TaskSpec t;
    t.task_id = id;
    t.mode = TaskMode::FixedRecipe;
    t.recipe = make_representative_recipe(kinds, mix64(master_seed ^ fnv1a64(id)));
    t.order = static_cast<int>(kinds.size());
    t.description = std::move(description);
    bank.push_back(std::move(t));
  };
  for (auto k : detail::kSingleTaskOrder) add_fixed({k}, "single: " + std::string(kind_name(k)));
  for (const auto& chain : detail::appendix_chains()) add_fixed(chain, "mixture: " + detail::describe(chain));
  for (int k = 1; k <= kMaxOrder; ++k) {
    for (int j = 0; j < 10; ++j) {
      RngStream rng = derive_rng(master_seed, detail::kRandomTaskLane, static_cast<std::uint64_t>(k * 100 + j));
      TaskSpec t;
      t.task_id = std::to_string(bank.size() + 1);
      t.mode = TaskMode::FixedRecipe;
      t.recipe = sample_recipe(k, rng);
      t.order = k;
      t.description = "random k=" + std::to_string(k) + ": " + detail::describe(t.recipe.kinds());
      bank.push_back(std::move(t));
    }
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Manifest

struct GtImage {
  std::string id;
  std::string path;  // relative to the GT directory
  std::string scene_label;
  friend bool operator==(const GtImage&, const GtImage&) = default;
};

struct ManifestEntry {
  std::string task_id;
  std::string gt_id;
  std::string lq_path;  // relative to the output directory
  std::string recipe_hash;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  int version = kManifestVersion;
  std::uint64_t master_seed = 0;
  std::vector<GtImage> gt_images;
  std::vector<TaskSpec> tasks;  // bound: every task carries its concrete recipe
  std::vector<ManifestEntry> entries;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline std::string lq_relative_path(const std::string& task_id, const std::string& gt_id) {
  return task_id + "/" + gt_id + ".png";
}

/// RNG lane of one GT image within a build.
inline std::uint64_t image_lane(std::uint64_t master_seed, const std::string& gt_id) {
  return mix64(fnv1a64(gt_id) ^ master_seed);
}

inline Json manifest_to_json(const Manifest& m) {
  Json gts = Json::array();
  for (const auto& g : m.gt_images) {
    Json j = {{"id", g.id}, {"path", g.path}};
    if (!g.scene_label.empty()) j["scene_label"] = g.scene_label;
    gts.push_back(std::move(j));
  }
  Json entries = Json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"task_id", e.task_id}, {"gt_id", e.gt_id}, {"lq_path", e.lq_path}, {"recipe_hash", e.recipe_hash}});
  }
  return {{"version", m.version}, {"master_seed", m.master_seed}, {"gt_images", std::move(gts)},
          {"tasks", task_bank_to_json(m.tasks)}, {"entries", std::move(entries)}};
}

inline Manifest manifest_from_json(const Json& j) {
  const detail::FieldReader f(j, "manifest");
  Manifest m;
  m.version = f.integer("version");
  if (m.version != kManifestVersion) {
    fail(ErrorCode::SchemaVersionMismatch, "manifest version " + std::to_string(m.version) + " (supported: 1)");
  }
  const Json& seed = f.require("master_seed");
  if (!seed.is_number_unsigned()) fail(ErrorCode::ParseError, "manifest.master_seed: expected an unsigned integer");
  m.master_seed = seed.get<std::uint64_t>();
  const Json& gts = f.require("gt_images");
  if (!gts.is_array()) fail(ErrorCode::ParseError, "manifest.gt_images: expected an array");
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const detail::FieldReader g(gts[i], "manifest.gt_images[" + std::to_string(i) + "]");
    GtImage gi{g.string("id"), g.string("path"), gts[i].contains("scene_label") ? g.string("scene_label") : ""};
    m.gt_images.push_back(std::move(gi));
  }
  m.tasks = task_bank_from_json(f.require("tasks"));
  const Json& entries = f.require("entries");
  if (!entries.is_array()) fail(ErrorCode::ParseError, "manifest.entries: expected an array");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const detail::FieldReader e(entries[i], "manifest.entries[" + std::to_string(i) + "]");
    m.entries.push_back({e.string("task_id"), e.string("gt_id"), e.string("lq_path"), e.string("recipe_hash")});
  }
  return m;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  return {bytes.begin(), bytes.end()};
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  io_detail::write_file_atomic(path, text.data(), text.size());
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, path.string() + ": malformed JSON: " + e.what());
  }
  return manifest_from_json(j);
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  write_text_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

inline std::vector<TaskSpec> load_task_bank(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, path.string() + ": malformed JSON: " + e.what());
  }
  return task_bank_from_json(j);
}

inline void save_task_bank(const std::vector<TaskSpec>& bank, const std::filesystem::path& path) {
  write_text_atomic(path, task_bank_to_json(bank).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Build

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm" || ext == ".pnm";
}

/// GT images in a directory, sorted by file name; ids are file stems.
/// Optional `scenes.csv` (`gt_id,scene_label`) attaches scene labels.
inline std::vector<GtImage> scan_gt_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::FileNotFound, "GT directory not found: " + dir.string());
  std::vector<GtImage> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) {
      out.push_back({e.path().stem().string(), e.path().filename().string(), ""});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].id == out[i - 1].id) fail(ErrorCode::InvalidParam, "duplicate GT id \"" + out[i].id + "\"");
  }
  if (out.empty()) fail(ErrorCode::FileNotFound, "no PNG/PPM images in " + dir.string());
  const fs::path scenes = dir / "scenes.csv";
  if (fs::exists(scenes)) {
    std::istringstream in(read_text_file(scenes));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || (lineno == 1 && line.rfind("gt_id", 0) == 0)) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) fail(ErrorCode::ParseError, "scenes.csv line " + std::to_string(lineno) + ": expected gt_id,scene_label");
      const std::string id = line.substr(0, comma), label = line.substr(comma + 1);
      if (!is_scene_label(label)) fail(ErrorCode::ParseError, "scenes.csv line " + std::to_string(lineno) + ": unknown scene \"" + label + "\"");
      for (auto& g : out)
        if (g.id == id) g.scene_label = label;
    }
  }
  return out;
}

namespace detail {

inline void ensure_empty_target(const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (fs::exists(out_dir)) {
    if (!fs::is_directory(out_dir) || !fs::is_empty(out_dir)) {
      fail(ErrorCode::IoError, "output directory exists and is not empty: " + out_dir.string());
    }
  }
}

}  // namespace detail

/// Renders every (task, GT image) pair to `out_dir/<task_id>/<gt_id>.png`
/// and writes `manifest.json`. The tree is staged in a sibling directory and
/// renamed into place only after everything succeeded.
inline Manifest build_testset(const std::filesystem::path& gt_dir, const std::vector<TaskSpec>& bank,
                              const std::filesystem::path& out_dir, std::uint64_t master_seed, int threads = 0) {
  namespace fs = std::filesystem;
  if (bank.empty()) fail(ErrorCode::InvalidParam, "task bank is empty");
  {
    std::vector<std::string> ids;
    for (const auto& t : bank) ids.push_back(t.task_id);
    std::sort(ids.begin(), ids.end());
    if (const auto it = std::adjacent_find(ids.begin(), ids.end()); it != ids.end()) {
      fail(ErrorCode::InvalidParam, "duplicate task_id \"" + *it + "\"");
    }
  }
  detail::ensure_empty_target(out_dir);

  Manifest m;
  m.master_seed = master_seed;
  m.gt_images = scan_gt_dir(gt_dir);
  for (const auto& t : bank) {
    TaskSpec bound = t;
    bound.recipe = bind_task(t, master_seed);
    validate_recipe(bound.recipe);
    bound.mode = TaskMode::FixedRecipe;
    bound.kinds.clear();
    bound.order = static_cast<int>(bound.recipe.steps.size());
    m.tasks.push_back(std::move(bound));
  }
  std::vector<std::string> hashes;
  for (const auto& t : m.tasks) hashes.push_back(recipe_hash(t.recipe));
  for (std::size_t ti = 0; ti < m.tasks.size(); ++ti)
    for (const auto& g : m.gt_images)
      m.entries.push_back({m.tasks[ti].task_id, g.id, lq_relative_path(m.tasks[ti].task_id, g.id), hashes[ti]});

  fs::path stage = out_dir;
  stage += ".staging";
  std::error_code ec;
  fs::remove_all(stage, ec);
  try {
    fs::create_directories(stage);
    for (const auto& t : m.tasks) fs::create_directories(stage / t.task_id);
    std::vector<ImageF32> gts;
    gts.reserve(m.gt_images.size());
    for (const auto& g : m.gt_images) gts.push_back(load_image(gt_dir / g.path));
    const std::size_t ng = gts.size();
    parallel_for(m.entries.size(), threads, [&](std::size_t idx) {
      const std::size_t ti = idx / ng, gi = idx % ng;
      const auto lq = apply_recipe(gts[gi], std::nullopt, m.tasks[ti].recipe, image_lane(master_seed, m.gt_images[gi].id));
      save_image(lq, stage / m.entries[idx].lq_path);
    });
    save_manifest(m, stage / "manifest.json");
    if (fs::exists(out_dir)) fs::remove(out_dir);
    fs::create_directories(fs::absolute(out_dir).parent_path());
    fs::rename(stage, out_dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(stage, ec);
    fail(ErrorCode::IoError, e.what());
  } catch (...) {
    fs::remove_all(stage, ec);
    throw;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { MissingFile, DimensionMismatch, HashMismatch, Unreadable, Structure };

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::MissingFile: return "MissingFile";
    case ViolationKind::DimensionMismatch: return "DimensionMismatch";
    case ViolationKind::HashMismatch: return "HashMismatch";
    case ViolationKind::Unreadable: return "Unreadable";
    case ViolationKind::Structure: return "Structure";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string subject;  // file path or task id
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::size_t count(ViolationKind k) const {
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(), [k](const auto& v) { return v.kind == k; }));
  }
};

/// Checks entry count, file existence, LQ dimensions against GT (when
/// `gt_dir` is given) and recipe hashes. A task whose recipe no longer
/// matches its recorded hash is reported once.
inline ValidationReport validate_manifest(const Manifest& m, const std::filesystem::path& dir,
                                          const std::optional<std::filesystem::path>& gt_dir = std::nullopt) {
  namespace fs = std::filesystem;
  ValidationReport r;
  if (m.entries.size() != m.tasks.size() * m.gt_images.size()) {
    r.violations.push_back({ViolationKind::Structure, "entries",
                            "expected " + std::to_string(m.tasks.size() * m.gt_images.size()) + " entries, found " +
                                std::to_string(m.entries.size())});
  }
  std::map<std::string, const TaskSpec*> tasks;
  for (const auto& t : m.tasks) tasks[t.task_id] = &t;
  std::map<std::string, std::optional<std::pair<int, int>>> gt_dims;
  for (const auto& g : m.gt_images) {
    std::optional<std::pair<int, int>> dims;
    if (gt_dir) {
      try {
        const auto img = load_image(*gt_dir / g.path);
        dims = std::pair{img.width(), img.height()};
      } catch (const Error& e) {
        r.violations.push_back({ViolationKind::MissingFile, (*gt_dir / g.path).string(), e.what()});
      }
    }
    gt_dims[g.id] = dims;
  }
  std::map<std::string, std::string> actual_hash;
  std::set<std::string> hash_reported;
  for (const auto& e : m.entries) {
    const auto t = tasks.find(e.task_id);
    if (t == tasks.end()) {
      r.violations.push_back({ViolationKind::Structure, e.task_id, "entry references an unknown task"});
      continue;
    }
    auto h = actual_hash.find(e.task_id);
    if (h == actual_hash.end()) {
      std::string digest;
      try {
        digest = recipe_hash(t->second->recipe);
      } catch (const Error& ex) {
        digest = std::string("<invalid: ") + ex.what() + ">";
      }
      h = actual_hash.emplace(e.task_id, digest).first;
    }
    if (h->second != e.recipe_hash && hash_reported.insert(e.task_id).second) {
      r.violations.push_back({ViolationKind::HashMismatch, e.task_id,
                              "recipe hash " + h->second + " does not match recorded " + e.recipe_hash});
    }
    const fs::path lq = dir / e.lq_path;
    if (!fs::exists(lq)) {
      r.violations.push_back({ViolationKind::MissingFile, lq.string(), "LQ image missing"});
      continue;
    }
    const auto dims = gt_dims.find(e.gt_id);
    if (dims == gt_dims.end()) {
      r.violations.push_back({ViolationKind::Structure, e.gt_id, "entry references an unknown GT image"});
      continue;
    }
    if (dims->second) {
      try {
        const auto img = load_image(lq);
        if (img.width() != dims->second->first || img.height() != dims->second->second) {
          r.violations.push_back({ViolationKind::DimensionMismatch, lq.string(),
                                  std::to_string(img.width()) + "x" + std::to_string(img.height()) + " vs GT " +
                                      std::to_string(dims->second->first) + "x" + std::to_string(dims->second->second)});
        }
      } catch (const Error& ex) {
        r.violations.push_back({ViolationKind::Unreadable, lq.string(), ex.what()});
      }
    }
  }
  return r;
}

}  // namespace gir
