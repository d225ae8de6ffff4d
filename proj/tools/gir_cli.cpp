// gir_cli: batch front end for degradation synthesis, task selection,
// test-set construction and AR/ER evaluation.
//
// stdout carries key-value lines for scripts; prose goes to stderr.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gir/gir.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void kv(const std::string& key, const std::string& value) { std::cout << key << ' ' << value << '\n'; }

std::string fixed4(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  try {
    return gir::default_thread_count();
  } catch (const gir::Error& e) {
    throw UsageError(e.what());
  }
}

/// Depth maps are read as images; the first channel is the depth value.
gir::DepthMap load_depth(const std::string& path, const gir::ImageF32& img) {
  const auto d = gir::load_image(path);
  if (!d.same_shape(img)) gir::fail(gir::ErrorCode::DimensionMismatch, "depth map dimensions differ from the input image");
  std::vector<float> v(d.pixel_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = d.data()[i * 3];
  return gir::DepthMap(d.width(), d.height(), std::move(v));
}

gir::DegradationParams params_with_overrides(gir::DegradationKind kind, const std::string& overrides) {
  gir::Json base = gir::params_to_json(gir::representative_params(kind));
  if (!overrides.empty()) {
    gir::Json patch;
    try {
      patch = gir::Json::parse(overrides);
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError(std::string("--params is not valid JSON: ") + e.what());
    }
    if (!patch.is_object()) throw UsageError("--params must be a JSON object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
      if (!base.contains(it.key())) throw UsageError("--params: unknown field \"" + it.key() + "\" for " + std::string(gir::kind_name(kind)));
      base[it.key()] = it.value();
    }
  }
  try {
    return gir::params_from_json(kind, base, "params");
  } catch (const gir::Error& e) {
    throw UsageError(e.what());
  }
}

bool needs_depth(const gir::Recipe& r) {
  for (const auto& s : r.steps)
    if (s.kind == gir::DegradationKind::Haze || s.kind == gir::DegradationKind::Snow) return true;
  return false;
}

fs::path recipe_sidecar(const fs::path& out) {
  fs::path p = out;
  p += ".recipe.json";
  return p;
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
  std::string in, out, kind, params, depth;
  std::uint64_t seed = 0;
};

void cmd_degrade(const DegradeArgs& a) {
  const auto kind = gir::parse_kind(a.kind);
  if (!kind) throw UsageError("unknown --kind \"" + a.kind + "\"");
  const auto params = params_with_overrides(*kind, a.params);
  gir::Recipe recipe;
  recipe.master_seed = a.seed;
  recipe.steps.push_back({*kind, params, 0});
  const auto img = gir::load_image(a.in);
  std::optional<gir::DepthMap> depth;
  if (!a.depth.empty()) {
    depth = load_depth(a.depth, img);
  } else if (needs_depth(recipe)) {
    std::cerr << "no --depth given; using a procedural depth map\n";
  }
  gir::save_image(gir::apply_recipe(img, depth, recipe), a.out);
  std::cout << gir::serialize_recipe(recipe);
}

struct PipelineArgs {
  std::string in, out, recipe, depth;
  int order = 0;
  std::uint64_t seed = 0;
};

void cmd_pipeline(const PipelineArgs& a) {
  if (a.recipe.empty() == (a.order == 0)) throw UsageError("give exactly one of --recipe or --order");
  gir::Recipe recipe;
  if (!a.recipe.empty()) {
    recipe = gir::parse_recipe(gir::read_text_file(a.recipe));
  } else {
    if (a.order < 1 || a.order > gir::kMaxOrder) throw UsageError("--order must be in [1,5]");
    gir::RngStream rng(a.seed);
    recipe = gir::sample_recipe(a.order, rng);
  }
  const auto img = gir::load_image(a.in);
  std::optional<gir::DepthMap> depth;
  if (!a.depth.empty()) {
    depth = load_depth(a.depth, img);
  } else if (needs_depth(recipe)) {
    std::cerr << "no --depth given; using a procedural depth map\n";
  }
  gir::save_image(gir::apply_recipe(img, depth, recipe), a.out);
  const auto sidecar = recipe_sidecar(a.out);
  gir::write_text_atomic(sidecar, gir::serialize_recipe(recipe));
  kv("output", a.out);
  kv("recipe", sidecar.string());
  kv("steps", std::to_string(recipe.steps.size()));
}

struct SelectArgs {
  std::string gt, out, orders = "2..5";
  int candidates = 200, per_order = 10, bins = 32, crop = 256, threads = 0;
  std::uint64_t seed = 0;
};

std::pair<int, int> parse_order_range(const std::string& s) {
  int lo = 0, hi = 0;
  char tail = 0;
  const bool range = std::sscanf(s.c_str(), "%d..%d%c", &lo, &hi, &tail) == 2;
  if (!range) {
    if (std::sscanf(s.c_str(), "%d%c", &lo, &tail) != 1) throw UsageError("--orders must look like 2..5 or 3");
    hi = lo;
  }
  if (lo < 1 || hi > gir::kMaxOrder || lo > hi) throw UsageError("--orders must lie within 1..5");
  return {lo, hi};
}

void cmd_select_tasks(const SelectArgs& a) {
  const auto [lo, hi] = parse_order_range(a.orders);
  if (a.per_order < 1 || a.per_order > a.candidates) throw UsageError("--per-order must be in [1, --candidates]");
  if (a.bins < 2) throw UsageError("--bins must be >= 2");
  if (a.crop < 1) throw UsageError("--crop must be positive");
  const int threads = resolve_threads(a.threads);
  std::vector<gir::ImageF32> gts;
  for (const auto& g : gir::scan_gt_dir(a.gt)) {
    const auto img = gir::load_image(fs::path(a.gt) / g.path);
    gts.push_back(gir::center_crop(img, std::min(a.crop, img.width()), std::min(a.crop, img.height())));
  }
  std::vector<gir::TaskSpec> bank;
  for (int k = lo; k <= hi; ++k) {
    gir::RngStream rng = gir::derive_rng(a.seed, 0x43414E44ULL, static_cast<std::uint64_t>(k));
    std::vector<gir::TaskSpec> cands;
    for (int i = 0; i < a.candidates; ++i) {
      gir::TaskSpec t;
      t.task_id = "k" + std::to_string(k) + "-c" + std::to_string(i);
      t.recipe = gir::sample_representative_recipe(k, rng);
      t.order = k;
      std::string desc;
      for (auto kind : t.recipe.kinds()) desc += (desc.empty() ? "" : " + ") + std::string(gir::kind_name(kind));
      t.description = "mixture: " + desc;
      cands.push_back(std::move(t));
    }
    std::cerr << "order " << k << ": rendering " << cands.size() << " candidates on " << gts.size() << " images\n";
    const auto s = gir::build_similarity_matrix(cands, gts, a.bins, a.seed, threads);
    const auto reps = gir::select_representatives(cands, s, a.per_order, a.seed);
    bank.insert(bank.end(), reps.begin(), reps.end());
    kv("order_" + std::to_string(k), std::to_string(reps.size()));
  }
  gir::Json prov = {{"candidate_pool_seed", a.seed}, {"candidates_per_order", a.candidates},
                    {"per_order", a.per_order},      {"orders", a.orders},
                    {"bins", a.bins},                {"crop", a.crop},
                    {"similarity", "histogram_intersection"}, {"gt_images", gts.size()}};
  fs::path prov_path = a.out;
  prov_path += ".provenance.json";
  gir::write_text_atomic(prov_path, prov.dump(2) + "\n");
  gir::save_task_bank(bank, a.out);
  kv("bank", a.out);
  kv("provenance", prov_path.string());
  kv("tasks", std::to_string(bank.size()));
}

struct BuildArgs {
  std::string gt, bank, out;
  bool default_bank = false;
  int threads = 0;
  std::uint64_t seed = 0;
};

void cmd_build_testset(const BuildArgs& a) {
  if (a.bank.empty() == !a.default_bank) throw UsageError("give exactly one of --bank or --default-bank");
  const int threads = resolve_threads(a.threads);
  const auto bank = a.default_bank ? gir::default_task_bank(a.seed) : gir::load_task_bank(a.bank);
  const auto m = gir::build_testset(a.gt, bank, a.out, a.seed, threads);
  kv("manifest", (fs::path(a.out) / "manifest.json").string());
  kv("tasks", std::to_string(m.tasks.size()));
  kv("gt_images", std::to_string(m.gt_images.size()));
  kv("entries", std::to_string(m.entries.size()));
}

struct EvalArgs {
  std::string outputs, gt, manifest, model, acceptance, excellence, report;
  int threads = 0;
};

void cmd_evaluate(const EvalArgs& a) {
  const bool image_mode = !a.outputs.empty() || !a.gt.empty() || !a.manifest.empty();
  if (image_mode == !a.model.empty()) throw UsageError("give either --outputs/--gt/--manifest or --model");
  if (image_mode && (a.outputs.empty() || a.gt.empty() || a.manifest.empty())) {
    throw UsageError("--outputs, --gt and --manifest must be given together");
  }
  const auto acc = gir::load_score_table_spec(a.acceptance);
  const auto exc = gir::load_score_table_spec(a.excellence);
  gir::MetricReport report;
  if (image_mode) {
    const int threads = resolve_threads(a.threads);
    report = gir::evaluate_model(a.outputs, a.gt, gir::load_manifest(a.manifest), acc, exc, threads);
  } else {
    report = gir::build_report(gir::load_score_table_spec(a.model), acc, exc);
  }
  if (!a.report.empty()) gir::write_report(report, a.report);
  kv("AR", fixed4(report.ar));
  kv("ER", fixed4(report.er));
  kv("avg_psnr", fixed4(report.avg_psnr));
  kv("tasks", std::to_string(report.task_count));
}

struct CodecArgs {
  std::string in, out;
  int quality = 75;
};

void cmd_encode(const CodecArgs& a) {
  if (a.quality < 1 || a.quality > 100) throw UsageError("--quality must be in [1,100]");
  const auto stream = gir::jpeg::jpeg_encode(gir::load_image(a.in), a.quality);
  gir::io_detail::write_file_atomic(a.out, stream.bytes.data(), stream.bytes.size());
  kv("bytes", std::to_string(stream.bytes.size()));
}

void cmd_decode(const CodecArgs& a) {
  const auto bytes = gir::io_detail::read_file(a.in);
  const auto img = gir::jpeg::jpeg_decode(std::span<const std::uint8_t>(bytes.data(), bytes.size()));
  gir::save_image(img, a.out);
  kv("width", std::to_string(img.width()));
  kv("height", std::to_string(img.height()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"General image restoration benchmark toolkit"};
  app.require_subcommand(1);

  DegradeArgs deg;
  auto* sc_deg = app.add_subcommand("degrade", "Apply one basic degradation");
  sc_deg->add_option("--in", deg.in, "Input image")->required();
  sc_deg->add_option("--out", deg.out, "Output image")->required();
  sc_deg->add_option("--kind", deg.kind, "Degradation kind")->required();
  sc_deg->add_option("--params", deg.params, "JSON object overriding representative parameters");
  sc_deg->add_option("--seed", deg.seed, "Master seed");
  sc_deg->add_option("--depth", deg.depth, "Depth map image (first channel)");

  PipelineArgs pip;
  auto* sc_pip = app.add_subcommand("pipeline", "Apply a recipe, or sample one of order k");
  sc_pip->add_option("--in", pip.in, "Input image")->required();
  sc_pip->add_option("--out", pip.out, "Output image")->required();
  sc_pip->add_option("--recipe", pip.recipe, "Recipe JSON file");
  sc_pip->add_option("--order", pip.order, "Sample a recipe with this many steps");
  sc_pip->add_option("--seed", pip.seed, "Sampling seed");
  sc_pip->add_option("--depth", pip.depth, "Depth map image (first channel)");

  SelectArgs sel;
  auto* sc_sel = app.add_subcommand("select-tasks", "Select representative mixture tasks by spectral clustering");
  sc_sel->add_option("--gt", sel.gt, "GT image directory")->required();
  sc_sel->add_option("--out", sel.out, "Output task bank")->required();
  sc_sel->add_option("--candidates", sel.candidates, "Candidates per order");
  sc_sel->add_option("--per-order", sel.per_order, "Representatives per order");
  sc_sel->add_option("--orders", sel.orders, "Order range, e.g. 2..5");
  sc_sel->add_option("--seed", sel.seed, "Candidate pool seed");
  sc_sel->add_option("--bins", sel.bins, "Histogram bins per channel");
  sc_sel->add_option("--crop", sel.crop, "Center-crop size for rendering");
  sc_sel->add_option("--threads", sel.threads, "Worker threads");

  BuildArgs bld;
  auto* sc_bld = app.add_subcommand("build-testset", "Render a task bank over a GT directory");
  sc_bld->add_option("--gt", bld.gt, "GT image directory")->required();
  sc_bld->add_option("--out", bld.out, "Output directory (must be empty or absent)")->required();
  sc_bld->add_option("--bank", bld.bank, "Task bank JSON");
  sc_bld->add_flag("--default-bank", bld.default_bank, "Use the built-in 100-task bank");
  sc_bld->add_option("--seed", bld.seed, "Master seed");
  sc_bld->add_option("--threads", bld.threads, "Worker threads");

  EvalArgs ev;
  auto* sc_ev = app.add_subcommand("evaluate", "Compute AR, ER and average PSNR");
  sc_ev->add_option("--outputs", ev.outputs, "Restored images, <task_id>/<gt_id>.png");
  sc_ev->add_option("--gt", ev.gt, "GT image directory");
  sc_ev->add_option("--manifest", ev.manifest, "Test-set manifest.json");
  sc_ev->add_option("--model", ev.model, "Model score table (file.csv[#column]) instead of images");
  sc_ev->add_option("--acceptance", ev.acceptance, "Acceptance table (file.csv[#column])")->required();
  sc_ev->add_option("--excellence", ev.excellence, "Excellence table (file.csv[#column])")->required();
  sc_ev->add_option("--report", ev.report, "Report CSV path (summary goes to <path>.txt)");
  sc_ev->add_option("--threads", ev.threads, "Worker threads");

  CodecArgs enc;
  auto* sc_enc = app.add_subcommand("encode", "Encode an image as baseline JPEG");
  sc_enc->add_option("--in", enc.in, "Input image")->required();
  sc_enc->add_option("--out", enc.out, "Output .jpg")->required();
  sc_enc->add_option("--quality", enc.quality, "Quality 1..100");

  CodecArgs dec;
  auto* sc_dec = app.add_subcommand("decode", "Decode a baseline JPEG");
  sc_dec->add_option("--in", dec.in, "Input .jpg")->required();
  sc_dec->add_option("--out", dec.out, "Output image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sc_deg) cmd_degrade(deg);
    else if (*sc_pip) cmd_pipeline(pip);
    else if (*sc_sel) cmd_select_tasks(sel);
    else if (*sc_bld) cmd_build_testset(bld);
    else if (*sc_ev) cmd_evaluate(ev);
    else if (*sc_enc) cmd_encode(enc);
    else if (*sc_dec) cmd_decode(dec);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const gir::Error& e) {
    std::cerr << "error [" << gir::to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
