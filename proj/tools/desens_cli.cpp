// desens: evaluate, desensitize, simulate, ablate, losses-check.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 check failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "desens/desens.hpp"

namespace fs = std::filesystem;
using namespace desens;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kCheckFailed = 3;

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& p) {
  auto b = read_bytes(p);
  return {b.begin(), b.end()};
}

void write_bytes(const fs::path& p, const void* data, std::size_t n) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw DataError("failed writing " + p.string());
}

void write_text(const fs::path& p, const std::string& s) { write_bytes(p, s.data(), s.size()); }

/// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

struct Flags {
  std::string config;
  std::string weights;
  int window = 0;
  std::string dsj_method;
  std::string style;
  long long seed = -1;
  int jobs = 0;
  bool print_config = false;
};

RunConfig effective_config(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) merge_config(cfg, detail::parse_json_text(read_text(f.config)));
  if (!f.weights.empty()) {
    std::vector<double> w;
    std::stringstream ss(f.weights);
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        w.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ParseError("--weights: \"" + item + "\" is not a number");
      }
    }
    if (w.size() != 3) throw ParseError("--weights expects three comma-separated values");
    cfg.weights = {w[0], w[1], w[2]};
  }
  if (f.window > 0) cfg.pipeline.tracker.window = f.window;
  if (!f.dsj_method.empty()) cfg.pipeline.joint.dsj_method = detail::dsj_method_from(f.dsj_method);
  if (!f.style.empty()) cfg.style.mode = f.style;
  if (f.seed >= 0) {
    cfg.scene.seed = static_cast<std::uint64_t>(f.seed);
    cfg.noise.seed = static_cast<std::uint64_t>(f.seed);
  }
  if (f.jobs > 0) cfg.jobs = f.jobs;
  cfg.validate();
  return cfg;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& gt_path, const std::string& pred_path,
                 const std::string& out) {
  const auto gt = parse_sequence(read_text(gt_path));
  const auto pred = parse_predictions(read_text(pred_path));
  emit(out, canonical_text(to_json(evaluate(pred.sequence, gt, cfg.weights))));
  return kOk;
}

fs::path frame_name(const FrameAnnotation& f) {
  if (f.image_path) return *f.image_path;
  char name[32];
  std::snprintf(name, sizeof name, "%06d.ppm", f.frame_index);
  return name;
}

int cmd_desensitize(const RunConfig& cfg, const fs::path& frames_dir, const std::string& pred_path,
                    const fs::path& out_dir) {
  const auto pred = parse_predictions(read_text(pred_path));
  const auto style = make_style(cfg.style, [](const std::string& p) { return read_ppm(read_bytes(p)); });
  const auto result = run_pipeline(pred, cfg.pipeline);
  const auto& seq = result.output.sequence;
  for (const auto& f : seq.frames) {
    const auto name = frame_name(f);
    Image img = read_ppm(read_bytes(frames_dir / name));
    if (img.width != seq.width || img.height != seq.height) {
      throw DimensionError("frame " + name.string() + " is " + std::to_string(img.width) + "x" +
                           std::to_string(img.height) + ", document says " + std::to_string(seq.width) +
                           "x" + std::to_string(seq.height));
    }
    std::vector<DesensRegion> regions;
    for (const auto& o : f.objects) {
      if (!is_sensitive(o.category) || !o.mask) continue;
      regions.push_back({o.category, *o.mask, o.bbox, o.confidence.value_or(0.0),
                         o.coasted ? RegionOrigin::Coasted : RegionOrigin::Segmentation, o.track_id});
    }
    const auto bytes = write_ppm(apply_all(std::move(img), regions, style));
    write_bytes(out_dir / name, bytes.data(), bytes.size());
  }
  write_text(out_dir / "desensitized.json", serialize_predictions(result.output));
  write_text(out_dir / "audit.json", canonical_text(audit_json(result.audit)));
  return kOk;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out_dir) {
  const auto scene = generate(cfg.scene);
  write_text(out_dir / "gt.json", serialize_sequence(scene.gt));
  write_text(out_dir / "predictions.json", serialize_predictions(corrupt(scene.gt, cfg.noise)));
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    const auto bytes = write_ppm(scene.frames[i]);
    write_bytes(out_dir / "frames" / frame_name(scene.gt.frames[i]), bytes.data(), bytes.size());
  }
  return kOk;
}

int cmd_ablate(const RunConfig& cfg, const std::string& out) {
  auto plan = default_plan(cfg.pipeline, cfg.seeds);
  plan.jobs = cfg.jobs;
  plan.weights = cfg.weights;
  emit(out, canonical_text(to_json(run_ablation(cfg.scene, cfg.noise, plan))));
  return kOk;
}

int cmd_losses_check(const RunConfig& cfg, std::uint64_t seed, const std::string& out) {
  const auto rep = run_losses_check(seed, cfg.loss);
  emit(out, canonical_text(to_json(rep)));
  if (!rep.passed()) {
    std::cerr << "losses-check: max finite-difference error " << rep.max_fd_error << " exceeds "
              << LossCheckReport::kTolerance << "\n";
    return kCheckFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desensitization post-processing and evaluation toolkit"};
  app.require_subcommand(0, 1);
  Flags flags;
  app.add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--weights", flags.weights, "face region weights above,mid,below");
  app.add_option("--window", flags.window, "KFJ window (previous frames)")->check(CLI::PositiveNumber);
  app.add_option("--dsj-method", flags.dsj_method, "min-bbox-iou or dual-confidence")
      ->check(CLI::IsMember({"min-bbox-iou", "dual-confidence"}));
  app.add_option("--style", flags.style, "mosaic, solid or icon")->check(CLI::IsMember({"mosaic", "solid", "icon"}));
  app.add_option("--seed", flags.seed, "seed for scene, noise and loss checks")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", flags.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--print-config", flags.print_config, "print the effective configuration and exit");

  std::string gt_path, pred_path, out, frames_dir, out_dir;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against ground truth");
  evaluate_cmd->add_option("--gt", gt_path, "ground-truth document")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--pred", pred_path, "prediction document")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", out, "report path (stdout when omitted)");

  auto* desens_cmd = app.add_subcommand("desensitize", "run DJ/DSJ/KFJ and redact frames");
  desens_cmd->add_option("--frames", frames_dir, "directory holding the input frames")->required()
      ->check(CLI::ExistingDirectory);
  desens_cmd->add_option("--pred", pred_path, "prediction document")->required()->check(CLI::ExistingFile);
  desens_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic sequence");
  simulate_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "seed-averaged ablation report");
  ablate_cmd->add_option("--out", out, "report path (stdout when omitted)");

  auto* losses_cmd = app.add_subcommand("losses-check", "loss values and gradient checks");
  losses_cmd->add_option("--out", out, "report path (stdout when omitted)");

  // Global flags may also follow the subcommand.
  for (auto* sub : {evaluate_cmd, desens_cmd, simulate_cmd, ablate_cmd, losses_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const RunConfig cfg = effective_config(flags);
    if (flags.print_config) {
      std::cout << canonical_text(to_json(cfg));
      return kOk;
    }
    if (*evaluate_cmd) return cmd_evaluate(cfg, gt_path, pred_path, out);
    if (*desens_cmd) return cmd_desensitize(cfg, frames_dir, pred_path, out_dir);
    if (*simulate_cmd) return cmd_simulate(cfg, out_dir);
    if (*ablate_cmd) return cmd_ablate(cfg, out);
    if (*losses_cmd) return cmd_losses_check(cfg, flags.seed >= 0 ? static_cast<std::uint64_t>(flags.seed) : 0, out);
    std::cerr << app.help();
    return kUsage;
  } catch (const desens::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
}
