// SPDX-License-Identifier: Apache-2.0
//
// amdnloc: generate / segment / train / eval / plot / pipeline.

#include "amdn/amdn.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace amdn;

namespace {

nlohmann::json read_json(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  return nlohmann::json::parse(is);
}

std::function<GrayImage(int)> image_lookup(const std::vector<Sample>& samples) {
  auto index = std::make_shared<std::map<int, const Sample*>>();
  for (const auto& s : samples) (*index)[s.id] = &s;
  return [index](int id) {
    const auto it = index->find(id);
    if (it == index->end()) throw std::runtime_error("founder sample " + std::to_string(id) + " is not in the dataset");
    return render_image(it->second->cfr, ChannelTag::cfr_magnitude);
  };
}

/// Samples of `all` with the given ids, in id-list order.
std::vector<Sample> select_ids(const std::vector<Sample>& all, const std::vector<int>& ids) {
  std::map<int, const Sample*> index;
  for (const auto& s : all) index[s.id] = &s;
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (int id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw std::runtime_error("sample " + std::to_string(id) + " is not in the dataset");
    out.push_back(*it->second);
  }
  return out;
}

std::uint64_t effective_seed(std::uint64_t cli_seed) {
  const auto env = seed_from_env();
  return env ? *env : cli_seed;
}

struct GenerateArgs {
  std::string scene;
  std::string out;
};

void cmd_generate(const GenerateArgs& a) {
  auto scene = with_stage("config", [&] { return read_json(a.scene).get<SceneConfig>(); });
  if (const auto s = seed_from_env()) scene.seed = *s;
  const auto samples = with_stage("generate", [&] { return build_dataset(scene); });
  with_stage("write", [&] { write_dataset(a.out, scene, samples); });
  const auto nlos = std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return !s.is_los; });
  std::cout << "wrote " << samples.size() << " samples (" << nlos << " NLOS) to " << a.out << '\n';
}

struct SegmentArgs {
  std::string data;
  double tau_in = 0.99;
  double tau_out = 0.99;
  std::string templ = "16x16";
  int min_count = 2;
  int k_min = 2;
  int k_max = 10;
  std::string path_select = "strongest";
  std::string nlos_mode = "all";
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  bool no_cfr = false;
  bool no_adcam = false;
};

void cmd_segment(const SegmentArgs& a) {
  SegmentOptions opt;
  std::uint64_t seed = 0;
  LosMode mode{};
  with_stage("config", [&] {
    opt.tau_in = a.tau_in;
    opt.tau_out = a.tau_out;
    opt.template_size = parse_template_size(a.templ);
    opt.min_count = a.min_count;
    opt.k_min = a.k_min;
    opt.k_max = a.k_max;
    opt.path_select = parse_path_select(a.path_select);
    opt.use_cfr = !a.no_cfr;
    opt.use_adcam = !a.no_adcam;
    seed = effective_seed(a.seed);
    opt.seed = seed;
    mode = parse_los_mode(a.nlos_mode);
  });
  const auto ds = with_stage("load", [&] { return read_dataset(a.data); });
  const auto samples = with_stage("load", [&] { return nlos_filter(ds.samples, mode); });
  const auto split = with_stage("split", [&] { return split_indices(samples.size(), a.train_fraction, seed); });
  const auto train_set = gather(samples, split.train);
  const auto seg = with_stage("segment", [&] { return segment_dataset(train_set, opt); });

  with_stage("write", [&] {
    const fs::path dir = a.data;
    write_split_csv(dir / "split.csv", samples, split);
    write_region_map_csv(dir / "region_map.csv", seg.sample_ids, seg.regions);
    write_json(dir / "segmentation.json", segmentation_to_json(seg));
    std::vector<Vec2> pos;
    for (const auto& s : train_set) pos.push_back(s.pos);
    RasterSpec raster;
    raster.area_m = ds.scene.area_m;
    raster.max_dist_m = std::max(raster.max_dist_m, ds.scene.mt_grid.spacing_m);
    export_region_map(dir / "regions_xy.csv", dir / "region_map.ppm", seg.sample_ids, pos, seg.regions, raster);
  });
  std::cout << "cfr classes " << seg.cfr.class_count << ", adcam clusters " << seg.adcam.k << ", regions "
            << seg.regions.fused_count << ", covering rate " << seg.regions.covering_rate << '\n';
}

struct TrainArgs {
  std::string data;
  std::string regions;
  std::string method = "ridge";
  std::uint64_t seed = 1;
  double lambda = 1e-3;
  std::size_t grid = 8;
  std::size_t peaks = 5;
  std::string out;
};

void cmd_train(const TrainArgs& a) {
  TrainOptions opt;
  with_stage("config", [&] {
    opt.method = parse_fit_method(a.method);
    opt.seed = effective_seed(a.seed);
    opt.ridge_lambda = a.lambda;
    opt.features.grid = a.grid;
    opt.features.peaks = a.peaks;
  });
  const auto ds = with_stage("load", [&] { return read_dataset(a.data); });
  opt.features.nt = ds.scene.nt;
  opt.features.nc = ds.scene.nc;
  const fs::path regions_file = a.regions;
  auto [train_set, seg] = with_stage("load", [&] {
    auto map = read_region_map_csv(regions_file);
    auto set = select_ids(ds.samples, map.ids);
    auto s = segmentation_from_json(read_json(regions_file.parent_path() / "segmentation.json"), map.ids, map.labels,
                                    image_lookup(ds.samples));
    return std::pair{std::move(set), std::move(s)};
  });
  const auto model = with_stage("train", [&] { return train(train_set, seg, opt); });
  const fs::path out = a.out.empty() ? regions_file.parent_path() / "model.json" : fs::path(a.out);
  with_stage("write", [&] { write_json(out, model_to_json(model)); });
  std::cout << "trained " << model.regions.size() << " region heads on " << train_set.size() << " samples -> " << out.string()
            << '\n';
}

struct EvalArgs {
  std::string data;
  std::string model;
  std::string out;
  std::string split;
  std::uint64_t seed = 1;
};

void cmd_eval(const EvalArgs& a) {
  const auto ds = with_stage("load", [&] { return read_dataset(a.data); });
  const auto model = with_stage("load", [&] { return model_from_json(read_json(a.model), image_lookup(ds.samples)); });
  const fs::path split_file = a.split.empty() ? fs::path(a.data) / "split.csv" : fs::path(a.split);
  const auto split = with_stage("load", [&] { return read_split_csv(split_file, ds.samples); });
  const auto train_set = gather(ds.samples, split.train);
  const auto test_set = gather(ds.samples, split.test);

  TrainOptions base;
  base.method = model.method;
  base.ridge_lambda = model.ridge_lambda;
  base.features = model.features;
  base.seed = effective_seed(a.seed);
  const auto baseline = with_stage("train", [&] { return train_global(train_set, base); });

  EvalReport rep;
  rep.seed = base.seed;
  rep.config = {{"method", to_string(model.method)},
                {"ridge_lambda", model.ridge_lambda},
                {"grid", model.features.grid},
                {"peaks", model.features.peaks},
                {"regions", model.regions.size()}};
  rep.sample_count = train_set.size() + test_set.size();
  rep.train_count = train_set.size();
  rep.nlos_count = static_cast<std::size_t>(
      std::count_if(ds.samples.begin(), ds.samples.end(), [](const Sample& s) { return !s.is_los; }));
  rep.cfr_classes = 0;
  for (const auto& f : model.founders) rep.cfr_classes = std::max(rep.cfr_classes, f.label + 1);
  rep.adcam_clusters = static_cast<int>(model.adcam_centroids.rows());
  const auto ev = with_stage("eval", [&] { return evaluate(model, baseline, test_set, rep); });

  with_stage("write", [&] {
    const fs::path out = a.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_json(out, report_to_json(rep));
    write_predictions_csv(out.parent_path() / "predictions.csv", test_set, ev);
    write_cdf_csv(out.parent_path() / "cdf.csv", rep.cdf);
  });
  std::cout << "mean error " << rep.all.mean_m << " m (baseline " << rep.baseline.mean_m << " m) over " << rep.all.count
            << " test samples\n";
}

struct PlotArgs {
  std::string report;
  std::string out;
};

void cmd_plot(const PlotArgs& a) {
  const auto rep = with_stage("load", [&] { return read_json(a.report); });
  with_stage("plot", [&] {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    {
      auto os = detail::open_out(dir / "cdf.csv");
      os << "threshold_m,fraction\n";
      for (const auto& p : rep.at("cdf"))
        os << format_double(p.at("threshold_m").get<double>()) << ',' << format_double(p.at("fraction").get<double>()) << '\n';
    }
    {
      auto os = detail::open_out(dir / "per_region.csv");
      os << "region,cfr_label,adcam_label,train_count,test_count,mean_error_m\n";
      for (const auto& r : rep.at("per_region_errors"))
        os << r.at("region").get<int>() << ',' << r.at("cfr_label").get<int>() << ',' << r.at("adcam_label").get<int>() << ','
           << r.at("train_count").get<std::size_t>() << ',' << r.at("test_count").get<std::size_t>() << ','
           << format_double(r.at("mean_error_m").get<double>()) << '\n';
    }
    {
      auto os = detail::open_out(dir / "plot.gp");
      os << "# gnuplot plot.gp\n"
            "set datafile separator ','\n"
            "set terminal pngcairo size 800,600\n"
            "set output 'cdf.png'\n"
            "set xlabel 'positioning error (m)'\n"
            "set ylabel 'CDF'\n"
            "set yrange [0:1]\n"
            "set grid\n"
            "plot 'cdf.csv' using 1:2 skip 1 with steps title 'segmented'\n"
            "set output 'per_region.png'\n"
            "set style data histograms\n"
            "set style fill solid 0.7\n"
            "set xlabel 'region'\n"
            "set ylabel 'mean error (m)'\n"
            "set yrange [0:*]\n"
            "plot 'per_region.csv' using 6:xtic(1) skip 1 title 'mean error'\n";
    }
  });
  std::cout << "wrote cdf.csv, per_region.csv and plot.gp to " << a.out << '\n';
}

struct PipelineArgs {
  std::string config;
  std::string out;
};

void cmd_pipeline(const PipelineArgs& a) {
  auto cfg = with_stage("config", [&] { return load_pipeline_config(a.config); });
  if (!a.out.empty()) cfg.out_dir = a.out;
  const auto r = run_pipeline(cfg);
  const auto& rep = r.report;
  std::cout << "samples " << rep.sample_count << " (train " << rep.train_count << ", test " << rep.all.count << ")\n"
            << "regions " << r.model.regions.size() << ", covering rate " << rep.covering_rate << '\n'
            << "mean error " << rep.all.mean_m << " m, baseline " << rep.baseline.mean_m << " m\n"
            << "artifacts in " << cfg.out_dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-domain region segmentation and fingerprint localization"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Trace a scene and write its fingerprint dataset");
  g->add_option("--scene", gen.scene, "scene.json")->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output dataset directory")->required();

  SegmentArgs seg;
  auto* s = app.add_subcommand("segment", "Split a dataset and segment its training part");
  s->add_option("--data", seg.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  s->add_option("--tau-in", seg.tau_in, "Within-category NCC threshold")->capture_default_str();
  s->add_option("--tau-out", seg.tau_out, "Between-category NCC threshold")->capture_default_str();
  s->add_option("--template", seg.templ, "Template size HxW")->capture_default_str();
  s->add_option("--min-count", seg.min_count, "Remove fused categories with at most this many samples")->capture_default_str();
  s->add_option("--k-min", seg.k_min)->capture_default_str();
  s->add_option("--k-max", seg.k_max)->capture_default_str();
  s->add_option("--path-select", seg.path_select, "strongest | first_arrival")->capture_default_str();
  s->add_option("--nlos-mode", seg.nlos_mode, "all | nlos_only")->capture_default_str();
  s->add_option("--train-fraction", seg.train_fraction)->capture_default_str();
  s->add_option("--seed", seg.seed)->capture_default_str();
  s->add_flag("--no-cfr", seg.no_cfr, "Skip the CFR matched filter");
  s->add_flag("--no-adcam", seg.no_adcam, "Skip ADCAM clustering");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Fit one linear head per region");
  t->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--regions", tr.regions, "region_map.csv (segmentation.json must sit next to it)")
      ->required()
      ->check(CLI::ExistingFile);
  t->add_option("--method", tr.method, "ridge | sgd")->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--lambda", tr.lambda, "Ridge penalty")->capture_default_str();
  t->add_option("--grid", tr.grid, "Block-mean grid")->capture_default_str();
  t->add_option("--peaks", tr.peaks, "ADCAM peaks kept")->capture_default_str();
  t->add_option("--out", tr.out, "Model file (default: model.json next to the region map)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a model on the held-out split");
  e->add_option("--data", ev.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--model", ev.model, "model.json")->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "report.json")->required();
  e->add_option("--split", ev.split, "split.csv (default: DATA/split.csv)");
  e->add_option("--seed", ev.seed, "Seed for the baseline's SGD")->capture_default_str();

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Write CDF / per-region tables and a gnuplot script");
  p->add_option("--report", pl.report, "report.json")->required()->check(CLI::ExistingFile);
  p->add_option("--out", pl.out, "Output directory")->required();

  PipelineArgs pa;
  auto* pp = app.add_subcommand("pipeline", "Run generate, segment, train and eval in one go");
  pp->add_option("--config", pa.config, "config.json")->required()->check(CLI::ExistingFile);
  pp->add_option("--out", pa.out, "Override out_dir");

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "generate") cmd_generate(gen);
    else if (name == "segment") cmd_segment(seg);
    else if (name == "train") cmd_train(tr);
    else if (name == "eval") cmd_eval(ev);
    else if (name == "plot") cmd_plot(pl);
    else cmd_pipeline(pa);
  } catch (const StageError& err) {
    std::cerr << "amdnloc " << name << ": " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "amdnloc " << name << ": [" << name << "] " << err.what() << '\n';
    return 1;
  }
  return 0;
}
