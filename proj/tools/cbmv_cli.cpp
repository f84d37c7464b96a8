// cbmv: synthetic data, training, prediction and evaluation from the shell.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbmv/config.hpp"
#include "cbmv/evaluate.hpp"
#include "cbmv/image_io.hpp"
#include "cbmv/pipeline.hpp"
#include "cbmv/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Options shared by every command that needs a PipelineConfig.
struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;
  std::optional<int> d_max;
  std::optional<std::uint64_t> seed;
  std::string dump_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "key=value configuration file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override one key, e.g. --set sgm.p1=0.05");
    cmd->add_option("--dmax", d_max, "maximum disparity");
    cmd->add_option("--seed", seed, "seed for all randomness");
    cmd->add_option("--dump-config", dump_path, "write the effective configuration");
  }

  cbmv::PipelineConfig resolve() const {
    cbmv::PipelineConfig c = path.empty() ? cbmv::PipelineConfig{}
                                          : cbmv::PipelineConfig::load(path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw cbmv::ConfigError("--set expects key=value");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (d_max) c.d_max = *d_max;
    if (seed) c.seed = *seed;
    return c;
  }
};

struct OptimizeFlags {
  std::optional<double> p1, p2, tau_so, cbca_tau;
  std::optional<int> paths, cbca_l, iters_pre, iters_post;

  void attach(CLI::App* cmd) {
    cmd->add_option("--p1", p1, "SGM small-step penalty");
    cmd->add_option("--p2", p2, "SGM large-step penalty");
    cmd->add_option("--tau-so", tau_so, "intensity step that divides P2");
    cmd->add_option("--paths", paths, "SGM path count (4 or 8)");
    cmd->add_option("--cbca-tau", cbca_tau, "cross arm intensity threshold");
    cmd->add_option("--cbca-l", cbca_l, "cross arm length limit");
    cmd->add_option("--cbca-iters-pre", iters_pre, "aggregation passes before SGM");
    cmd->add_option("--cbca-iters-post", iters_post, "aggregation passes after SGM");
  }

  void apply(cbmv::PipelineConfig& c) const {
    if (p1) c.sgm.p1 = *p1;
    if (p2) c.sgm.p2 = *p2;
    if (tau_so) c.sgm.tau_so = *tau_so;
    if (paths) c.sgm.paths = *paths;
    if (cbca_tau) c.cbca.tau = *cbca_tau;
    if (cbca_l) c.cbca.l_max = *cbca_l;
    if (iters_pre) c.cbca.iterations_pre = *iters_pre;
    if (iters_post) c.cbca.iterations_post = *iters_post;
  }
};

void finish_config(cbmv::PipelineConfig& c, const ConfigOptions& opts) {
  c.validate();
  if (!opts.dump_path.empty()) c.save(opts.dump_path);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

cbmv::SynthRect parse_rect(const std::string& text) {
  cbmv::SynthRect r;
  char c1, c2, c3, c4;
  std::istringstream is(text);
  if (!(is >> r.x >> c1 >> r.y >> c2 >> r.width >> c3 >> r.height >> c4 >> r.disparity) ||
      c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
    throw cbmv::ConfigError("--rect expects x,y,width,height,disparity");
  }
  return r;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || v < 0.0) {
      throw cbmv::ConfigError("bad tolerance list '" + text + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coalesced bidirectional matching volume stereo"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a random-dot stereo pair");
  std::string synth_out;
  cbmv::SynthSpec spec;
  std::vector<std::string> rect_args;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--width", spec.width, "image width");
  synth->add_option("--height", spec.height, "image height");
  synth->add_option("--dmax", spec.d_max, "maximum disparity");
  synth->add_option("--bg", spec.background_disparity, "background disparity");
  synth->add_option("--rect", rect_args, "foreground patch x,y,width,height,disparity");
  synth->add_option("--noise", spec.noise_sigma, "right-view noise sigma");
  synth->add_option("--gain", spec.exposure_gain, "right-view exposure gain");
  synth->add_option("--seed", spec.seed, "random seed");

  // train
  auto* train = app.add_subcommand("train", "train the forest on labelled pairs");
  std::vector<std::string> train_pairs;
  std::string model_out;
  ConfigOptions train_cfg;
  train->add_option("--pair", train_pairs, "left,right,gt triple (repeatable)")->required();
  train->add_option("--model-out", model_out, "model file to write")->required();
  train_cfg.attach(train);

  // predict
  auto* predict = app.add_subcommand("predict", "estimate a disparity map");
  std::string pred_left, pred_right, pred_model, pred_out = "disparity";
  std::string dump_cbmv, dump_stages;
  bool skip_opt = false;
  ConfigOptions pred_cfg;
  OptimizeFlags pred_opt;
  predict->add_option("--left", pred_left, "left image")->required()->check(CLI::ExistingFile);
  predict->add_option("--right", pred_right, "right image")->required()->check(CLI::ExistingFile);
  predict->add_option("--model", pred_model, "model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pred_out, "output prefix; writes PREFIX.pfm and PREFIX.png");
  predict->add_flag("--skip-optimization", skip_opt, "plain WTA on the coalesced volume");
  predict->add_option("--dump-cbmv", dump_cbmv, "write the left coalesced volume");
  predict->add_option("--dump-stages", dump_stages, "directory for intermediate maps");
  pred_cfg.attach(predict);
  pred_opt.attach(predict);

  // eval
  auto* eval = app.add_subcommand("eval", "compare a disparity map with ground truth");
  std::string eval_pred, eval_gt, eval_mask, eval_tol;
  eval->add_option("--pred", eval_pred, "predicted disparity (.pfm or .png)")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", eval_gt, "ground truth disparity (.pfm or .png)")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--mask", eval_mask, "non-occlusion mask (255 = evaluate)");
  eval->add_option("--tolerances", eval_tol, "extra comma-separated bad-pixel thresholds");

  // features
  auto* features = app.add_subcommand("features", "dump the 20-channel feature volume");
  std::string feat_left, feat_right, feat_out;
  ConfigOptions feat_cfg;
  features->add_option("--left", feat_left, "left image")->required()->check(CLI::ExistingFile);
  features->add_option("--right", feat_right, "right image")->required()->check(CLI::ExistingFile);
  features->add_option("--out", feat_out, "output file")->required();
  feat_cfg.attach(features);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) {
      for (const std::string& r : rect_args) spec.rects.push_back(parse_rect(r));
      const cbmv::SynthPair pair = cbmv::synth_stereo(spec);
      fs::create_directories(synth_out);
      const fs::path dir(synth_out);
      cbmv::write_png8(pair.left, (dir / "left.png").string());
      cbmv::write_png8(pair.right, (dir / "right.png").string());
      cbmv::write_pfm(pair.gt, (dir / "gt.pfm").string());
      cbmv::write_mask(!pair.occluded, (dir / "nonocc.png").string());
      std::cout << "wrote " << spec.width << "x" << spec.height << " pair to " << synth_out
                << " (" << pair.occluded.count() << " occluded pixels)\n";
    } else if (*train) {
      cbmv::PipelineConfig config = train_cfg.resolve();
      finish_config(config, train_cfg);
      std::vector<cbmv::LabelledPair> pairs;
      for (const std::string& triple : train_pairs) {
        std::vector<std::string> parts;
        std::stringstream ss(triple);
        std::string item;
        while (std::getline(ss, item, ',')) parts.push_back(item);
        if (parts.size() != 3) throw cbmv::ConfigError("--pair expects left,right,gt");
        pairs.push_back({cbmv::read_image(parts[0]), cbmv::read_image(parts[1]),
                         cbmv::read_disparity(parts[2])});
      }
      const auto t0 = std::chrono::steady_clock::now();
      const cbmv::TrainingReport report = cbmv::train_model(pairs, config, threads);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      ensure_parent(model_out);
      cbmv::save_model(report.model, model_out);
      std::printf("pairs              : %zu\n", pairs.size());
      std::printf("samples            : %ld\n", long(report.samples));
      std::printf("positives          : %ld\n", long(report.positives));
      std::printf("negatives          : %ld\n", long(report.negatives));
      std::printf("negatives/positive : %.4f\n",
                  double(report.negatives) / double(std::max<Eigen::Index>(1, report.positives)));
      std::printf("training accuracy  : %.4f\n", report.accuracy);
      std::printf("trees              : %zu (%.1f s)\n", report.model.trees.size(), secs);
      std::printf("model              : %s\n", model_out.c_str());
    } else if (*predict) {
      cbmv::PipelineConfig config = pred_cfg.resolve();
      pred_opt.apply(config);
      finish_config(config, pred_cfg);
      const cbmv::GrayImage left = cbmv::read_image(pred_left);
      const cbmv::GrayImage right = cbmv::read_image(pred_right);
      const cbmv::ForestModel model = cbmv::load_model(pred_model);

      cbmv::PredictOptions options;
      options.skip_optimization = skip_opt;
      options.threads = threads;
      if (!dump_stages.empty()) {
        fs::create_directories(dump_stages);
        options.sink = [&](const std::string& name, const cbmv::DisparityMap& map) {
          cbmv::write_pfm(map, (fs::path(dump_stages) / (name + ".pfm")).string());
        };
      }
      const cbmv::PredictResult result =
          cbmv::predict_disparity(left, right, model, config, options);
      if (!dump_cbmv.empty()) {
        ensure_parent(dump_cbmv);
        cbmv::write_cost_volume(result.cbmv_left, dump_cbmv);
      }
      ensure_parent(pred_out);
      cbmv::write_pfm(result.disparity, pred_out + ".pfm");
      cbmv::write_kitti_png(result.disparity, pred_out + ".png");
      std::cout << "wrote " << pred_out << ".pfm and " << pred_out << ".png\n";
    } else if (*eval) {
      const cbmv::DisparityMap pred = cbmv::read_disparity(eval_pred);
      const cbmv::DisparityMap gt = cbmv::read_disparity(eval_gt);
      std::optional<cbmv::Mask> mask;
      if (eval_mask.empty()) {
        std::cout << "note: no mask given, evaluating all labelled pixels\n";
      } else {
        mask = cbmv::read_mask(eval_mask);
      }
      const std::vector<double> taus = parse_list(eval_tol);
      const cbmv::EvalReport report = cbmv::evaluate(pred, gt, mask);
      std::cout << report.to_text();
      const std::vector<double> bad = cbmv::bad_fractions(pred, gt, taus, mask);
      for (std::size_t i = 0; i < taus.size(); ++i) {
        std::printf("bad-%-12g : %.2f %%\n", taus[i], 100.0 * bad[i]);
      }
      std::cout << "---\n" << report.to_key_values();
      for (std::size_t i = 0; i < taus.size(); ++i) {
        std::printf("bad@%.17g=%.17g\n", taus[i], bad[i]);
      }
    } else if (*features) {
      cbmv::PipelineConfig config = feat_cfg.resolve();
      finish_config(config, feat_cfg);
      const cbmv::GrayImage left = cbmv::read_image(feat_left);
      const cbmv::GrayImage right = cbmv::read_image(feat_right);
      cbmv::require_same_size(left, right);
      const cbmv::FeatureVolume fv =
          cbmv::compute_features(left, right, cbmv::DisparityRange{config.d_max},
                                 config.matchers, config.confidence);
      ensure_parent(feat_out);
      cbmv::write_feature_volume(fv, feat_out);
      std::cout << "wrote " << fv.cells() << " hypotheses x " << cbmv::kFeatureCount
                << " features to " << feat_out << "\n";
    }
  } catch (const cbmv::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
