#pragma once

// Degradation chains: sampling under the weather-first rule, deterministic
// application with per-step RNG lanes, and the recipe JSON schema.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "gir/degradations.hpp"
#include "gir/rng.hpp"

namespace gir {

inline constexpr int kRecipeSchemaVersion = 1;
inline constexpr int kMaxOrder = 5;

struct DegradationStep {
  DegradationKind kind = DegradationKind::Resize;
  DegradationParams params;
  int step_index = 0;
  friend bool operator==(const DegradationStep&, const DegradationStep&) = default;
};

struct Recipe {
  std::vector<DegradationStep> steps;
  std::uint64_t master_seed = 0;
  int schema_version = kRecipeSchemaVersion;
  friend bool operator==(const Recipe&, const Recipe&) = default;

  std::vector<DegradationKind> kinds() const {
    std::vector<DegradationKind> k;
    for (const auto& s : steps) k.push_back(s.kind);
    return k;
  }
};

/// Builds a recipe from kinds, binding each to its representative parameters.
inline Recipe make_representative_recipe(std::span<const DegradationKind> kinds, std::uint64_t master_seed) {
  Recipe r;
  r.master_seed = master_seed;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    r.steps.push_back({kinds[i], representative_params(kinds[i]), static_cast<int>(i)});
  }
  return r;
}

/// Checks chain length, step numbering, parameter preconditions and the
/// weather-first rule.
inline void validate_recipe(const Recipe& r) {
  if (r.steps.empty() || r.steps.size() > static_cast<std::size_t>(kMaxOrder)) {
    fail(ErrorCode::InvalidParam, "recipe must have 1 to 5 steps, has " + std::to_string(r.steps.size()));
  }
  int weather = 0;
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto& s = r.steps[i];
    if (s.step_index != static_cast<int>(i)) fail(ErrorCode::InvalidParam, "step_index out of sequence");
    if (kind_of(s.params) != s.kind) fail(ErrorCode::InvalidParam, "step parameters do not match kind");
    validate_params(s.params);
    if (weather_only_first(s.kind)) {
      ++weather;
      if (i != 0) {
        fail(ErrorCode::InvalidParam,
             std::string(kind_name(s.kind)) + " may only appear as the first step (found at step " + std::to_string(i) + ")");
      }
    }
  }
  if (weather > 1) fail(ErrorCode::InvalidParam, "at most one weather step per recipe");
}

namespace detail {

inline DegradationKind draw_kind(RngStream& rng, std::span<const DegradationKind> pool, bool weather_allowed) {
  for (;;) {
    const auto k = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    if (!weather_only_first(k) || weather_allowed) return k;
  }
}

inline void check_order(int k) {
  if (k < 1 || k > kMaxOrder) fail(ErrorCode::InvalidParam, "order k must be in [1,5], got " + std::to_string(k));
}

inline void check_pool(std::span<const DegradationKind> pool, int k) {
  if (pool.empty()) fail(ErrorCode::InvalidParam, "empty kind pool");
  const bool has_plain = std::any_of(pool.begin(), pool.end(), [](auto kind) { return !weather_only_first(kind); });
  if (!has_plain && k > 1) fail(ErrorCode::InvalidParam, "kind pool cannot fill a chain after the first step");
}

}  // namespace detail

/// Draws k kinds uniformly (weather kinds re-drawn anywhere but step 0) and
/// then samples each step's parameters. The master seed is drawn first.
inline Recipe sample_recipe(int k, RngStream& rng, bool allow_weather = true,
                            std::span<const DegradationKind> pool = kAllKinds) {
  detail::check_order(k);
  detail::check_pool(pool, k);
  Recipe r;
  r.master_seed = rng.next_u64();
  std::vector<DegradationKind> kinds;
  for (int i = 0; i < k; ++i) kinds.push_back(detail::draw_kind(rng, pool, allow_weather && i == 0));
  for (int i = 0; i < k; ++i) r.steps.push_back({kinds[i], sample_params(kinds[i], rng), i});
  return r;
}

/// Random kind sequence with fixed (representative) strengths: the candidate
/// pool for representative-task selection.
inline Recipe sample_representative_recipe(int k, RngStream& rng, bool allow_weather = true) {
  detail::check_order(k);
  const std::uint64_t seed = rng.next_u64();
  std::vector<DegradationKind> kinds;
  for (int i = 0; i < k; ++i) kinds.push_back(detail::draw_kind(rng, kAllKinds, allow_weather && i == 0));
  return make_representative_recipe(kinds, seed);
}

/// Procedural depth: vertical gradient (0 at the bottom row, 1 at the top)
/// plus bilinear value noise, renormalized to [0,1].
inline DepthMap synth_depth(int width, int height, RngStream& rng, double noise_amplitude = 0.15) {
  constexpr int kCells = 4;
  std::array<std::array<double, kCells + 1>, kCells + 1> lattice{};
  for (auto& row : lattice)
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
  std::vector<float> values(static_cast<std::size_t>(width) * height);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> raw(values.size());
  for (int y = 0; y < height; ++y) {
    const double gradient = height == 1 ? 0.0 : 1.0 - static_cast<double>(y) / (height - 1);
    const double gy = (height == 1 ? 0.0 : static_cast<double>(y) / (height - 1)) * kCells;
    const int iy = std::min(static_cast<int>(gy), kCells - 1);
    const double fy = gy - iy;
    for (int x = 0; x < width; ++x) {
      const double gx = (width == 1 ? 0.0 : static_cast<double>(x) / (width - 1)) * kCells;
      const int ix = std::min(static_cast<int>(gx), kCells - 1);
      const double fx = gx - ix;
      const double noise = (1 - fy) * ((1 - fx) * lattice[iy][ix] + fx * lattice[iy][ix + 1]) +
                           fy * ((1 - fx) * lattice[iy + 1][ix] + fx * lattice[iy + 1][ix + 1]);
      const double v = gradient + noise_amplitude * noise;
      raw[static_cast<std::size_t>(y) * width + x] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    values[i] = hi > lo ? static_cast<float>((raw[i] - lo) / (hi - lo)) : 0.0f;
  }
  return DepthMap(width, height, std::move(values));
}

/// Lane reserved for the procedural depth map, distinct from any step index.
inline constexpr std::uint64_t kDepthLane = 0xD3E7'0000'0000'0001ULL;

/// Applies one step. `rng` is consumed only by stochastic operators.
inline ImageF32 apply_step(const ImageF32& img, const DepthMap& depth, const DegradationParams& params,
                           RngStream& rng) {
  return std::visit(
      [&](const auto& p) -> ImageF32 {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ResizeParams>) return degrade_resize(img, p);
        else if constexpr (std::is_same_v<T, BlurParams>) return degrade_blur(img, p);
        else if constexpr (std::is_same_v<T, NoiseParams>) return degrade_noise(img, p, rng);
        else if constexpr (std::is_same_v<T, CompressionParams>) return degrade_jpeg(img, p);
        else if constexpr (std::is_same_v<T, RingingParams>) return degrade_ringing(img, p);
        else if constexpr (std::is_same_v<T, AlgArtifactParams>) return degrade_alg_artifact(img, p);
        else if constexpr (std::is_same_v<T, DamageParams>) return degrade_damage(img, p, rng);
        else if constexpr (std::is_same_v<T, RainParams>) return degrade_rain(img, p, rng);
        else if constexpr (std::is_same_v<T, HazeParams>) return degrade_haze(img, depth, p);
        else return degrade_snow(img, depth, p, rng);
      },
      params);
}

/// Runs the chain in order. Step i draws from derive_rng(master_seed,
/// image_lane, i), so steps never share random draws. Without a depth map a
/// procedural one is synthesized from the image lane.
inline ImageF32 apply_recipe(const ImageF32& img, const std::optional<DepthMap>& depth, const Recipe& recipe,
                             std::uint64_t image_lane = 0) {
  validate_recipe(recipe);
  if (depth && !depth->matches(img)) fail(ErrorCode::DimensionMismatch, "depth map does not match image dimensions");
  const bool needs_depth = std::any_of(recipe.steps.begin(), recipe.steps.end(), [](const auto& s) {
    return s.kind == DegradationKind::Haze || s.kind == DegradationKind::Snow;
  });
  std::optional<DepthMap> synthesized;
  if (needs_depth && !depth) {
    RngStream drng = derive_rng(recipe.master_seed, image_lane, kDepthLane);
    synthesized = synth_depth(img.width(), img.height(), drng);
  }
  const DepthMap& d = depth ? *depth : (synthesized ? *synthesized : DepthMap(img.width(), img.height()));
  ImageF32 cur = img;
  for (const auto& step : recipe.steps) {
    RngStream rng = derive_rng(recipe.master_seed, image_lane, static_cast<std::uint64_t>(step.step_index));
    cur = apply_step(cur, d, step.params, rng);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// JSON schema

using Json = nlohmann::ordered_json;

inline Json params_to_json(const DegradationParams& params) {
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ResizeParams>) return {{"scale", p.scale}, {"filter_down", "bicubic"}, {"filter_up", "bicubic"}};
        else if constexpr (std::is_same_v<T, BlurParams>) return {{"ksize", p.ksize}, {"sigma", p.sigma}};
        else if constexpr (std::is_same_v<T, NoiseParams>) return {{"sigma255", p.sigma255}};
        else if constexpr (std::is_same_v<T, CompressionParams>) return {{"quality", p.quality}};
        else if constexpr (std::is_same_v<T, RingingParams>) return {{"ksize", p.ksize}, {"omega", p.omega}};
        else if constexpr (std::is_same_v<T, AlgArtifactParams>) return {{"psf_sigma", p.psf_sigma}, {"iterations", p.iterations}};
        else if constexpr (std::is_same_v<T, DamageParams>)
          return {{"n_lines", p.n_lines}, {"thickness", p.thickness}, {"color", p.color == LineColor::White ? "white" : "black"}};
        else if constexpr (std::is_same_v<T, RainParams>) return {{"strength", p.strength}};
        else if constexpr (std::is_same_v<T, HazeParams>) return {{"A", p.A}, {"beta", p.beta}};
        else return {{"A", p.A}, {"beta", p.beta}, {"flakes_per_mpx", p.flakes_per_mpx}};
      },
      params);
}

namespace detail {

/// Field access with path-qualified ParseError diagnostics.
class FieldReader {
 public:
  FieldReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(ErrorCode::ParseError, path_ + ": expected an object");
  }

  const Json& require(const char* name) const {
    const auto it = obj_.find(name);
    if (it == obj_.end()) fail(ErrorCode::ParseError, "missing field \"" + std::string(name) + "\" at " + path_);
    return *it;
  }

  double number(const char* name) const {
    const Json& v = require(name);
    if (!v.is_number()) fail(ErrorCode::ParseError, path_ + "." + name + ": expected a number");
    return v.get<double>();
  }

  double number_or(const char* name, double fallback) const {
    return obj_.contains(name) ? number(name) : fallback;
  }

  int integer(const char* name) const {
    const Json& v = require(name);
    if (!v.is_number_integer()) fail(ErrorCode::ParseError, path_ + "." + name + ": expected an integer");
    return v.get<int>();
  }

  std::string string(const char* name) const {
    const Json& v = require(name);
    if (!v.is_string()) fail(ErrorCode::ParseError, path_ + "." + name + ": expected a string");
    return v.get<std::string>();
  }

  const std::string& path() const { return path_; }

 private:
  const Json& obj_;
  std::string path_;
};

}  // namespace detail

/// Missing fields fall back to the representative values only where noted
/// in the schema (resize filters, snow flake density).
inline DegradationParams params_from_json(DegradationKind kind, const Json& j, const std::string& path) {
  const detail::FieldReader f(j, path);
  DegradationParams out;
  switch (kind) {
    case DegradationKind::Resize: {
      ResizeParams p{f.integer("scale")};
      for (const char* key : {"filter_down", "filter_up"}) {
        if (j.contains(key) && f.string(key) != "bicubic") fail(ErrorCode::ParseError, path + "." + key + ": only bicubic is supported");
      }
      out = p;
      break;
    }
    case DegradationKind::Blur: out = BlurParams{f.integer("ksize"), f.number("sigma")}; break;
    case DegradationKind::Noise: out = NoiseParams{f.number("sigma255")}; break;
    case DegradationKind::Compression: out = CompressionParams{f.integer("quality")}; break;
    case DegradationKind::Ringing: out = RingingParams{f.integer("ksize"), f.number("omega")}; break;
    case DegradationKind::AlgArtifact: out = AlgArtifactParams{f.number("psf_sigma"), f.integer("iterations")}; break;
    case DegradationKind::Damage: {
      const std::string c = f.string("color");
      if (c != "white" && c != "black") fail(ErrorCode::ParseError, path + ".color: expected \"white\" or \"black\"");
      out = DamageParams{f.integer("n_lines"), f.integer("thickness"), c == "white" ? LineColor::White : LineColor::Black};
      break;
    }
    case DegradationKind::Rain: out = RainParams{f.number("strength")}; break;
    case DegradationKind::Haze: out = HazeParams{f.number("A"), f.number("beta")}; break;
    case DegradationKind::Snow: out = SnowParams{f.number("A"), f.number("beta"), f.number_or("flakes_per_mpx", 200.0)}; break;
  }
  try {
    validate_params(out);
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, path + ": " + e.what());
  }
  return out;
}

inline Json recipe_to_json(const Recipe& r) {
  Json steps = Json::array();
  for (const auto& s : r.steps) steps.push_back({{"kind", kind_name(s.kind)}, {"params", params_to_json(s.params)}});
  return {{"schema_version", r.schema_version}, {"master_seed", r.master_seed}, {"steps", std::move(steps)}};
}

inline Recipe recipe_from_json(const Json& j, const std::string& path = "recipe") {
  const detail::FieldReader f(j, path);
  const Json& version = f.require("schema_version");
  if (!version.is_number_integer()) fail(ErrorCode::ParseError, path + ".schema_version: expected an integer");
  if (version.get<int>() != kRecipeSchemaVersion) {
    fail(ErrorCode::SchemaVersionMismatch,
         "recipe schema_version " + std::to_string(version.get<int>()) + " (supported: " + std::to_string(kRecipeSchemaVersion) + ")");
  }
  const Json& seed = f.require("master_seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    fail(ErrorCode::ParseError, path + ".master_seed: expected an unsigned 64-bit integer");
  }
  Recipe r;
  r.master_seed = seed.get<std::uint64_t>();
  const Json& steps = f.require("steps");
  if (!steps.is_array()) fail(ErrorCode::ParseError, path + ".steps: expected an array");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string sp = path + ".steps[" + std::to_string(i) + "]";
    const detail::FieldReader sf(steps[i], sp);
    const std::string kname = sf.string("kind");
    const auto kind = parse_kind(kname);
    if (!kind) fail(ErrorCode::ParseError, sp + ".kind: unknown degradation \"" + kname + "\"");
    r.steps.push_back({*kind, params_from_json(*kind, sf.require("params"), sp + ".params"), static_cast<int>(i)});
  }
  try {
    validate_recipe(r);
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, path + ": " + e.what());
  }
  return r;
}

/// Pretty-printed JSON; doubles print in shortest round-trip form.
inline std::string serialize_recipe(const Recipe& r) { return recipe_to_json(r).dump(2) + "\n"; }

inline Recipe parse_recipe(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("malformed JSON: ") + e.what());
  }
  return recipe_from_json(j);
}

/// Stable content digest of a recipe (FNV-1a over the canonical compact form).
inline std::string recipe_hash(const Recipe& r) {
  const auto h = fnv1a64(recipe_to_json(r).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Task specifications

enum class TaskMode { FixedRecipe, Sampler };

struct TaskSpec {
  std::string task_id;
  TaskMode mode = TaskMode::FixedRecipe;
  Recipe recipe;                       // FixedRecipe
  int order = 1;                       // Sampler
  std::vector<DegradationKind> kinds;  // Sampler pool; empty means all ten
  std::string description;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// The concrete recipe a task runs with. Sampler tasks draw one recipe per
/// task from (master_seed, task_id).
inline Recipe bind_task(const TaskSpec& t, std::uint64_t master_seed) {
  if (t.mode == TaskMode::FixedRecipe) return t.recipe;
  RngStream rng = derive_rng(master_seed, fnv1a64(t.task_id), 0x5A4D'504C'4552ULL);
  const std::span<const DegradationKind> pool = t.kinds.empty() ? std::span<const DegradationKind>(kAllKinds)
                                                                 : std::span<const DegradationKind>(t.kinds);
  return sample_recipe(t.order, rng, true, pool);
}

inline Json task_to_json(const TaskSpec& t) {
  Json j = {{"task_id", t.task_id}, {"mode", t.mode == TaskMode::FixedRecipe ? "fixed_recipe" : "sampler"}};
  if (t.mode == TaskMode::FixedRecipe) {
    j["recipe"] = recipe_to_json(t.recipe);
  } else {
    j["order"] = t.order;
    Json kinds = Json::array();
    for (auto k : t.kinds) kinds.push_back(kind_name(k));
    j["kinds"] = std::move(kinds);
  }
  j["description"] = t.description;
  return j;
}

inline TaskSpec task_from_json(const Json& j, const std::string& path) {
  const detail::FieldReader f(j, path);
  TaskSpec t;
  t.task_id = f.string("task_id");
  if (t.task_id.empty()) fail(ErrorCode::ParseError, path + ".task_id: must not be empty");
  const std::string mode = f.string("mode");
  if (mode == "fixed_recipe") {
    t.mode = TaskMode::FixedRecipe;
    t.recipe = recipe_from_json(f.require("recipe"), path + ".recipe");
    t.order = static_cast<int>(t.recipe.steps.size());
  } else if (mode == "sampler") {
    t.mode = TaskMode::Sampler;
    t.order = f.integer("order");
    if (t.order < 1 || t.order > kMaxOrder) fail(ErrorCode::ParseError, path + ".order: must be in [1,5]");
    if (j.contains("kinds")) {
      const Json& ks = j.at("kinds");
      if (!ks.is_array()) fail(ErrorCode::ParseError, path + ".kinds: expected an array");
      for (const auto& k : ks) {
        const auto kind = k.is_string() ? parse_kind(k.get<std::string>()) : std::nullopt;
        if (!kind) fail(ErrorCode::ParseError, path + ".kinds: unknown degradation " + k.dump());
        t.kinds.push_back(*kind);
      }
    }
  } else {
    fail(ErrorCode::ParseError, path + ".mode: expected \"fixed_recipe\" or \"sampler\"");
  }
  if (j.contains("description")) t.description = f.string("description");
  return t;
}

inline Json task_bank_to_json(const std::vector<TaskSpec>& bank) {
  Json arr = Json::array();
  for (const auto& t : bank) arr.push_back(task_to_json(t));
  return arr;
}

inline std::vector<TaskSpec> task_bank_from_json(const Json& j) {
  if (!j.is_array()) fail(ErrorCode::ParseError, "task bank: expected an array of tasks");
  std::vector<TaskSpec> bank;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    bank.push_back(task_from_json(j[i], "tasks[" + std::to_string(i) + "]"));
    if (!ids.insert(bank.back().task_id).second) {
      fail(ErrorCode::ParseError, "task bank: duplicate task_id \"" + bank.back().task_id + "\"");
    }
  }
  return bank;
}

}  // namespace gir
