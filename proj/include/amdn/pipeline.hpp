// SPDX-License-Identifier: Apache-2.0
//
// End-to-end experiment: generate -> split -> segment (train only) -> train
// per-region and global heads -> evaluate on the held-out samples -> write
// artifacts. Every stage failure is re-thrown as a StageError naming the stage.

#pragma once

#include "amdn/dataset_io.hpp"
#include "amdn/eval.hpp"
#include "amdn/localizer.hpp"
#include "amdn/regions.hpp"
#include "amdn/scenegen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace amdn {

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Runs `fn`, tagging any escaping exception with `stage`.
template <typename Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

struct PipelineConfig {
  SceneConfig scene;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  LosMode los_mode = LosMode::all;
  double train_fraction = 0.8;
  SegmentOptions segmentation;
  TrainOptions localizer;
};

inline std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("AMDN_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  std::size_t used = 0;
  const unsigned long long s = std::stoull(v, &used);
  if (used != std::string(v).size()) throw std::invalid_argument(std::string("AMDN_SEED is not an integer: ") + v);
  return s;
}

/// Makes one seed drive the scene, clustering and SGD.
inline void apply_seed(PipelineConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.scene.seed = seed;
  c.segmentation.seed = seed;
  c.localizer.seed = seed;
}

namespace detail {

inline void read_segmentation(const nlohmann::json& j, SegmentOptions& s) {
  s.tau_in = j.value("tau_in", s.tau_in);
  s.tau_out = j.value("tau_out", s.tau_out);
  if (j.contains("template")) s.template_size = parse_template_size(j.at("template").get<std::string>());
  s.min_count = j.value("min_count", s.min_count);
  s.k_min = j.value("k_min", s.k_min);
  s.k_max = j.value("k_max", s.k_max);
  if (j.contains("path_select")) s.path_select = parse_path_select(j.at("path_select").get<std::string>());
  s.use_cfr = j.value("use_cfr", s.use_cfr);
  s.use_adcam = j.value("use_adcam", s.use_adcam);
}

inline void read_localizer(const nlohmann::json& j, TrainOptions& t) {
  if (j.contains("method")) t.method = parse_fit_method(j.at("method").get<std::string>());
  t.ridge_lambda = j.value("ridge_lambda", t.ridge_lambda);
  t.features.grid = j.value("grid", t.features.grid);
  t.features.peaks = j.value("peaks", t.features.peaks);
  if (j.contains("sgd")) {
    const auto& g = j.at("sgd");
    t.sgd.batch_size = g.value("batch_size", t.sgd.batch_size);
    t.sgd.epochs = g.value("epochs", t.sgd.epochs);
    t.sgd.learning_rate = g.value("learning_rate", t.sgd.learning_rate);
    t.sgd.decay_every = g.value("decay_every", t.sgd.decay_every);
  }
}

}  // namespace detail

/// Parses config.json. A relative `scene_file` resolves against `base_dir`.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  PipelineConfig c;
  if (j.contains("scene") && j.contains("scene_file")) throw std::invalid_argument("config: give either scene or scene_file");
  if (j.contains("scene")) {
    c.scene = j.at("scene").get<SceneConfig>();
  } else if (j.contains("scene_file")) {
    std::filesystem::path p = j.at("scene_file").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot open scene file " + p.string());
    c.scene = nlohmann::json::parse(is).get<SceneConfig>();
  } else {
    throw std::invalid_argument("config: missing scene");
  }
  c.out_dir = j.value("out_dir", c.out_dir.string());
  if (j.contains("nlos_mode")) c.los_mode = parse_los_mode(j.at("nlos_mode").get<std::string>());
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw std::invalid_argument("config: train_fraction must be in (0, 1)");
  if (j.contains("segmentation")) detail::read_segmentation(j.at("segmentation"), c.segmentation);
  if (j.contains("localizer")) detail::read_localizer(j.at("localizer"), c.localizer);
  c.localizer.features.nt = c.scene.nt;
  c.localizer.features.nc = c.scene.nc;
  apply_seed(c, j.value("seed", c.scene.seed));
  return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open config " + file.string());
  PipelineConfig c = pipeline_config_from_json(nlohmann::json::parse(is), file.parent_path());
  if (const auto s = seed_from_env()) apply_seed(c, *s);
  return c;
}

/// Effective configuration, without out_dir so reports compare across output locations.
inline nlohmann::json config_echo(const PipelineConfig& c) {
  const auto& s = c.segmentation;
  const auto& t = c.localizer;
  return {
      {"seed", c.seed},
      {"scene", nlohmann::json(c.scene)},
      {"nlos_mode", c.los_mode == LosMode::all ? "all" : "nlos_only"},
      {"train_fraction", c.train_fraction},
      {"segmentation",
       {{"tau_in", s.tau_in},
        {"tau_out", s.tau_out},
        {"template", std::to_string(s.template_size.rows) + "x" + std::to_string(s.template_size.cols)},
        {"min_count", s.min_count},
        {"k_min", s.k_min},
        {"k_max", s.k_max},
        {"path_select", to_string(s.path_select)},
        {"use_cfr", s.use_cfr},
        {"use_adcam", s.use_adcam}}},
      {"localizer",
       {{"method", to_string(t.method)},
        {"ridge_lambda", t.ridge_lambda},
        {"grid", t.features.grid},
        {"peaks", t.features.peaks},
        {"sgd",
         {{"batch_size", t.sgd.batch_size},
          {"epochs", t.sgd.epochs},
          {"learning_rate", t.sgd.learning_rate},
          {"decay_every", t.sgd.decay_every}}}}},
  };
}

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Seeded shuffle, first round(n * fraction) go to train; both sides keep
/// dataset order. Needs at least one sample on each side.
inline Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("split: need at least two samples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline std::vector<Sample> gather(std::span<const Sample> all, std::span<const std::size_t> idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

/// split.csv: id,set
inline void write_split_csv(const std::filesystem::path& file, std::span<const Sample> all, const Split& s) {
  std::vector<const char*> tag(all.size(), "test");
  for (std::size_t i : s.train) tag[i] = "train";
  auto os = detail::open_out(file);
  os << "id,set\n";
  for (std::size_t i = 0; i < all.size(); ++i) os << all[i].id << ',' << tag[i] << '\n';
}

/// Indices into `all` of the ids listed as train / test in split.csv.
inline Split read_split_csv(const std::filesystem::path& file, std::span<const Sample> all) {
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < all.size(); ++i) index[all[i].id] = i;
  auto is = detail::open_in(file);
  std::string line;
  std::getline(is, line);
  if (line != "id,set") throw std::runtime_error(file.string() + ": unexpected header '" + line + "'");
  Split s;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv(line);
    if (c.size() != 2) throw std::runtime_error(file.string() + ": malformed row '" + line + "'");
    const auto it = index.find(std::stoi(c[0]));
    if (it == index.end()) throw std::runtime_error(file.string() + ": unknown sample id " + c[0]);
    if (c[1] == "train") s.train.push_back(it->second);
    else if (c[1] == "test") s.test.push_back(it->second);
    else throw std::runtime_error(file.string() + ": set must be train or test, got '" + c[1] + "'");
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

struct RegionError {
  int region = 0;
  int cfr_label = 0;
  int adcam_label = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double mean_error_m = 0.0;  // over test samples routed here; 0 when none
};

struct EvalReport {
  std::uint64_t seed = 0;
  nlohmann::json config;
  ErrorSummary all;       // every test sample, uncovered ones through the fallback
  ErrorSummary covered;   // test samples whose (cfr, adcam) pair is a retained region
  ErrorSummary baseline;  // single global head, same features and split
  std::vector<CdfPoint> cdf;
  double covering_rate = 1.0;
  std::vector<RegionError> per_region;
  std::size_t sample_count = 0;
  std::size_t train_count = 0;
  std::size_t nlos_count = 0;
  int cfr_classes = 0;
  int adcam_clusters = 0;
};

struct Evaluation {
  std::vector<Prediction> predictions;
  std::vector<double> errors;
  std::vector<double> baseline_errors;
};

/// Scores `model` and `baseline` on `test`; fills the error parts of `report`.
inline Evaluation evaluate(const LocalizationModel& model, const LocalizationModel& baseline, std::span<const Sample> test,
                           EvalReport& report) {
  if (test.empty()) throw std::invalid_argument("evaluate: no test samples");
  Evaluation ev;
  std::vector<double> covered;
  const std::size_t n_regions = model.regions.size();
  std::vector<double> region_sum(n_regions, 0.0);
  std::vector<std::size_t> region_n(n_regions, 0);
  for (const auto& s : test) {
    const auto p = predict(model, s);
    const double e = distance(p.pos, s.pos);
    ev.predictions.push_back(p);
    ev.errors.push_back(e);
    ev.baseline_errors.push_back(distance(predict(baseline, s).pos, s.pos));
    if (p.assignment.covered) covered.push_back(e);
    const auto r = static_cast<std::size_t>(p.assignment.region);
    region_sum[r] += e;
    ++region_n[r];
  }
  report.all = summarize_errors(ev.errors);
  report.baseline = summarize_errors(ev.baseline_errors);
  report.covered = covered.empty() ? ErrorSummary{} : summarize_errors(covered);
  report.cdf = cdf_curve(ev.errors, default_thresholds(ev.errors));
  report.covering_rate = model.covering_rate;
  report.per_region.clear();
  for (std::size_t r = 0; r < n_regions; ++r) {
    RegionError re;
    re.region = static_cast<int>(r);
    re.cfr_label = model.regions[r].cfr_label;
    re.adcam_label = model.regions[r].adcam_label;
    re.train_count = model.regions[r].train_count;
    re.test_count = region_n[r];
    re.mean_error_m = region_n[r] == 0 ? 0.0 : region_sum[r] / static_cast<double>(region_n[r]);
    report.per_region.push_back(re);
  }
  return ev;
}

inline nlohmann::json summary_json(const ErrorSummary& s) {
  return {{"mean_error_m", s.mean_m}, {"rmse_m", s.rmse_m}, {"mse_m2", s.mse_m2}, {"count", s.count}};
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json cdf = nlohmann::json::array();
  for (const auto& p : r.cdf) cdf.push_back({{"threshold_m", p.threshold_m}, {"fraction", p.fraction}});
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& e : r.per_region)
    regions.push_back({{"region", e.region},
                       {"cfr_label", e.cfr_label},
                       {"adcam_label", e.adcam_label},
                       {"train_count", e.train_count},
                       {"test_count", e.test_count},
                       {"mean_error_m", e.mean_error_m}});
  return {
      {"seed", r.seed},
      {"config", r.config},
      {"mean_error_m", r.all.mean_m},
      {"rmse_m", r.all.rmse_m},
      {"mse_m2", r.all.mse_m2},
      {"covered", summary_json(r.covered)},
      {"baseline", summary_json(r.baseline)},
      {"error_ratio", r.baseline.mean_m > 0.0 ? r.all.mean_m / r.baseline.mean_m : 0.0},
      {"covering_rate", r.covering_rate},
      {"cdf", cdf},
      {"per_region_errors", regions},
      {"counts",
       {{"samples", r.sample_count},
        {"train", r.train_count},
        {"test", r.all.count},
        {"test_covered", r.covered.count},
        {"nlos", r.nlos_count}}},
      {"segmentation", {{"cfr_classes", r.cfr_classes}, {"adcam_clusters", r.adcam_clusters}, {"regions", r.per_region.size()}}},
  };
}

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  auto os = detail::open_out(file);
  os << j.dump(2) << '\n';
}

/// cdf.csv: threshold_m,fraction
inline void write_cdf_csv(const std::filesystem::path& file, std::span<const CdfPoint> cdf) {
  auto os = detail::open_out(file);
  os << "threshold_m,fraction\n";
  for (const auto& p : cdf) os << format_double(p.threshold_m) << ',' << format_double(p.fraction) << '\n';
}

/// predictions.csv: id,x,y,x_hat,y_hat,error_m,region,covered,baseline_error_m
inline void write_predictions_csv(const std::filesystem::path& file, std::span<const Sample> test, const Evaluation& ev) {
  auto os = detail::open_out(file);
  os << "id,x,y,x_hat,y_hat,error_m,region,covered,baseline_error_m\n";
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& p = ev.predictions[i];
    os << test[i].id << ',' << format_double(test[i].pos.x) << ',' << format_double(test[i].pos.y) << ','
       << format_double(p.pos.x) << ',' << format_double(p.pos.y) << ',' << format_double(ev.errors[i]) << ','
       << p.assignment.region << ',' << (p.assignment.covered ? 1 : 0) << ',' << format_double(ev.baseline_errors[i]) << '\n';
  }
}

struct PipelineResult {
  EvalReport report;
  SegmentationResult segmentation;
  LocalizationModel model;
  LocalizationModel baseline;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Full run. With `write` the dataset and all artifacts land in cfg.out_dir:
/// scene.json, positions.csv, paths.csv, cfr.bin, adcam.bin, split.csv,
/// region_map.csv, regions_xy.csv, region_map.ppm, model.json,
/// predictions.csv, cdf.csv and report.json.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, bool write = true) {
  PipelineResult out;
  auto& rep = out.report;
  rep.seed = cfg.seed;
  rep.config = config_echo(cfg);

  const auto samples = with_stage("generate", [&] { return nlos_filter(build_dataset(cfg.scene), cfg.los_mode); });
  rep.sample_count = samples.size();
  rep.nlos_count = static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return !s.is_los; }));

  const auto split = with_stage("split", [&] { return split_indices(samples.size(), cfg.train_fraction, cfg.seed); });
  out.train = gather(samples, split.train);
  out.test = gather(samples, split.test);
  rep.train_count = out.train.size();

  out.segmentation = with_stage("segment", [&] { return segment_dataset(out.train, cfg.segmentation); });
  const auto& seg = out.segmentation;
  rep.cfr_classes = seg.cfr.class_count;
  rep.adcam_clusters = seg.adcam.k;

  with_stage("train", [&] {
    out.model = train(out.train, seg, cfg.localizer);
    out.baseline = train_global(out.train, cfg.localizer);
  });

  const auto ev = with_stage("eval", [&] { return evaluate(out.model, out.baseline, out.test, rep); });

  if (write) {
    with_stage("write", [&] {
      const auto& dir = cfg.out_dir;
      std::filesystem::create_directories(dir);
      write_dataset(dir, cfg.scene, samples);
      write_split_csv(dir / "split.csv", samples, split);
      write_region_map_csv(dir / "region_map.csv", seg.sample_ids, seg.regions);
      std::vector<Vec2> pos;
      for (const auto& s : out.train) pos.push_back(s.pos);
      RasterSpec raster;
      raster.area_m = cfg.scene.area_m;
      raster.max_dist_m = std::max(raster.max_dist_m, cfg.scene.mt_grid.spacing_m);
      export_region_map(dir / "regions_xy.csv", dir / "region_map.ppm", seg.sample_ids, pos, seg.regions, raster);
      write_json(dir / "model.json", model_to_json(out.model));
      write_predictions_csv(dir / "predictions.csv", out.test, ev);
      write_cdf_csv(dir / "cdf.csv", rep.cdf);
      write_json(dir / "report.json", report_to_json(rep));
    });
  }
  return out;
}

}  // namespace amdn
