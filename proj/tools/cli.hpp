#pragma once

// Command-line front end. run_cli() is the whole program; main() only
// forwards to it so tests can drive subcommands in-process.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "autocomp/augment.hpp"
#include "autocomp/composite.hpp"
#include "autocomp/config.hpp"
#include "autocomp/error.hpp"
#include "autocomp/evalbench.hpp"
#include "autocomp/gradsuite.hpp"
#include "autocomp/image_io.hpp"
#include "autocomp/imgcore.hpp"
#include "autocomp/mlf.hpp"
#include "autocomp/pipeline.hpp"
#include "autocomp/pyramid.hpp"
#include "autocomp/train.hpp"

namespace autocomp::cli {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string config;
};

inline std::uint64_t resolve_seed(const Globals& g, std::ostream& log) {
  if (g.seed) return *g.seed;
  const std::uint64_t s = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
  log << "seed: " << s << " (randomly selected)\n";
  return s;
}

inline MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "binary") return MaskMode::Binary;
  if (s == "soft") return MaskMode::Soft;
  throw UsageError("mask mode must be 'binary' or 'soft'");
}

inline Image load_rgb(const fs::path& p) { return to_rgb(load_image(p)); }

inline Image match_background(const Image& fg, const Image& bg, bool resize) {
  if (bg.same_size(fg)) return bg;
  if (!resize)
    throw DataError("background is " + std::to_string(bg.width()) + "x" + std::to_string(bg.height()) +
                    " but foreground is " + std::to_string(fg.width()) + "x" + std::to_string(fg.height()) +
                    " (pass --resize-bg)");
  return resize_bilinear(bg, fg.width(), fg.height());
}

// Config-file keys become `--key=value` arguments unless the command line
// already names that option.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  for (const auto& [k, v] : read_key_value_file(path))
    if (!given.count(k)) args.push_back("--" + k + "=" + v);
  return args;
}

inline int run_cli(std::vector<std::string> raw_args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Automatic image compositing toolkit", "autocomp"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice (random and logged when omitted)");
  app.add_option("--threads", g.threads, "Worker threads for per-sample evaluation")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "key=value file; command-line flags take precedence");

  std::function<void()> action;

  // composite ---------------------------------------------------------------
  struct {
    std::string fg, bg, mask, out, method = "copy-paste", checkpoint;
    double sigma = 2.0, threshold = 0.5;
    int levels = 0, canvas = 768;
    bool binarize_mask = false, resize_bg = false;
  } comp;
  auto* c_comp = app.add_subcommand("composite", "Composite a foreground onto a background");
  c_comp->add_option("--fg", comp.fg)->required();
  c_comp->add_option("--bg", comp.bg)->required();
  c_comp->add_option("--mask", comp.mask)->required();
  c_comp->add_option("--out", comp.out)->required();
  c_comp->add_option("--method", comp.method)->check(CLI::IsMember({"copy-paste", "feather", "pyramid", "mlf"}));
  c_comp->add_option("--checkpoint", comp.checkpoint, "Fusion network checkpoint (method mlf)");
  c_comp->add_option("--sigma", comp.sigma, "Feather blur sigma");
  c_comp->add_option("--levels", comp.levels, "Pyramid levels (0 = from image size)");
  c_comp->add_option("--canvas", comp.canvas, "Square canvas for the fusion network (0 = native)");
  c_comp->add_flag("--binarize", comp.binarize_mask, "Harden the mask at --threshold first");
  c_comp->add_option("--threshold", comp.threshold);
  c_comp->add_flag("--resize-bg", comp.resize_bg, "Resize the background to the foreground size");
  c_comp->callback([&] {
    action = [&] {
      if (comp.method == "mlf" && comp.checkpoint.empty()) throw UsageError("method mlf needs --checkpoint");
      if (comp.sigma < 0.0) throw UsageError("--sigma must be non-negative");
      const Image fg = load_rgb(comp.fg);
      const Image bg = match_background(fg, load_rgb(comp.bg), comp.resize_bg);
      SoftMask mask = load_mask(comp.mask);
      if (!mask.same_size(fg)) throw DataError("mask and foreground dimensions differ");
      if (comp.binarize_mask) mask = binarize(mask, comp.threshold);
      Image result;
      if (comp.method == "copy-paste") {
        result = copy_paste(fg, bg, mask);
      } else if (comp.method == "feather") {
        result = alpha_composite(fg, bg, feather_mask(mask, comp.sigma));
      } else if (comp.method == "pyramid") {
        result = pyramid_blend(fg, bg, mask, comp.levels > 0 ? comp.levels : default_pyramid_levels(fg.height(), fg.width()));
      } else {
        const auto net = load_network<float>(comp.checkpoint, kMlfKind);
        result = mlf_composite(net, fg, mask, bg, comp.canvas);
      }
      save_image(result, comp.out);
    };
  });

  // feather -----------------------------------------------------------------
  struct {
    std::string mask, out;
    double sigma = 2.0;
  } fea;
  auto* c_fea = app.add_subcommand("feather", "Gaussian-feather a mask");
  c_fea->add_option("--mask", fea.mask)->required();
  c_fea->add_option("--out", fea.out)->required();
  c_fea->add_option("--sigma", fea.sigma);
  c_fea->callback([&] {
    action = [&] {
      if (fea.sigma < 0.0) throw UsageError("--sigma must be non-negative");
      save_mask(feather_mask(load_mask(fea.mask), fea.sigma), fea.out);
    };
  });

  // trimap ------------------------------------------------------------------
  struct {
    std::string mask, out;
    int band = 16;
    double threshold = 0.5;
  } tri;
  auto* c_tri = app.add_subcommand("trimap", "Band trimap around a mask boundary");
  c_tri->add_option("--mask", tri.mask)->required();
  c_tri->add_option("--out", tri.out)->required();
  c_tri->add_option("--band", tri.band, "Band width in pixels");
  c_tri->add_option("--threshold", tri.threshold);
  c_tri->callback([&] {
    action = [&] {
      if (tri.band < 0) throw UsageError("--band must be non-negative");
      save_image(trimap_to_image(make_trimap(load_mask(tri.mask), tri.band, tri.threshold)), tri.out);
    };
  });

  // refine ------------------------------------------------------------------
  struct {
    std::string image, mask, out, checkpoint;
    std::vector<int> scales{320, 640};
  } ref;
  auto* c_ref = app.add_subcommand("refine", "Multi-scale mask refinement");
  c_ref->add_option("--image", ref.image)->required();
  c_ref->add_option("--mask", ref.mask)->required();
  c_ref->add_option("--out", ref.out)->required();
  c_ref->add_option("--checkpoint", ref.checkpoint, "Refiner checkpoint (identity refinement when omitted)");
  c_ref->add_option("--scales", ref.scales)->delimiter(',');
  c_ref->callback([&] {
    action = [&] {
      const Image img = load_rgb(ref.image);
      const SoftMask raw = load_mask(ref.mask);
      std::optional<RefineNetwork<float>> net;
      if (!ref.checkpoint.empty()) net.emplace(load_network<float>(ref.checkpoint, kRefinerKind));
      const Refiner r = net ? as_refiner(*net) : identity_refiner();
      save_mask(refine_mask_multiscale(img, raw, r, ref.scales), ref.out);
    };
  });

  // blend -------------------------------------------------------------------
  struct {
    std::string fg, bg, mask, out;
    int levels = 0;
    bool resize_bg = false;
  } bl;
  auto* c_bl = app.add_subcommand("blend", "Laplacian pyramid blend");
  c_bl->add_option("--fg", bl.fg)->required();
  c_bl->add_option("--bg", bl.bg)->required();
  c_bl->add_option("--mask", bl.mask)->required();
  c_bl->add_option("--out", bl.out)->required();
  c_bl->add_option("--levels", bl.levels, "Pyramid levels (0 = from image size)");
  c_bl->add_flag("--resize-bg", bl.resize_bg);
  c_bl->callback([&] {
    action = [&] {
      const Image fg = load_rgb(bl.fg);
      const Image bg = match_background(fg, load_rgb(bl.bg), bl.resize_bg);
      const SoftMask mask = load_mask(bl.mask);
      const int levels = bl.levels > 0 ? bl.levels : default_pyramid_levels(fg.height(), fg.width());
      save_image(pyramid_blend(fg, bg, mask, levels), bl.out);
    };
  });

  // pipeline ----------------------------------------------------------------
  struct {
    std::string fg, bg, mask, out, refiner, mlf, compositor = "mlf", mask_out;
    std::vector<int> scales{320, 640};
    int canvas = 768;
  } pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "Segment, refine and composite in one pass");
  c_pipe->add_option("--fg", pipe.fg)->required();
  c_pipe->add_option("--bg", pipe.bg)->required();
  c_pipe->add_option("--mask", pipe.mask, "Raw mask (threshold segmenter when omitted)");
  c_pipe->add_option("--out", pipe.out)->required();
  c_pipe->add_option("--refiner", pipe.refiner, "Refiner checkpoint, or 'identity'")->required();
  c_pipe->add_option("--mlf", pipe.mlf, "Fusion network checkpoint");
  c_pipe->add_option("--compositor", pipe.compositor)->check(CLI::IsMember({"mlf", "oracle"}));
  c_pipe->add_option("--scales", pipe.scales)->delimiter(',');
  c_pipe->add_option("--canvas", pipe.canvas);
  c_pipe->add_option("--mask-out", pipe.mask_out, "Also write the refined mask");
  c_pipe->callback([&] {
    action = [&] {
      if (pipe.compositor == "mlf" && pipe.mlf.empty()) throw UsageError("compositor mlf needs --mlf");
      const Image fg = load_rgb(pipe.fg);
      const Image bg = load_rgb(pipe.bg);
      std::optional<SoftMask> raw;
      if (!pipe.mask.empty()) raw = load_mask(pipe.mask);
      std::optional<RefineNetwork<float>> rnet;
      if (pipe.refiner != "identity") rnet.emplace(load_network<float>(pipe.refiner, kRefinerKind));
      std::optional<MlfNetwork<float>> mnet;
      if (pipe.compositor == "mlf") mnet.emplace(load_network<float>(pipe.mlf, kMlfKind));
      PipelineConfig cfg;
      cfg.refine_scales = pipe.scales;
      const auto r = run_pipeline(fg, bg, raw, rnet ? as_refiner(*rnet) : identity_refiner(),
                                  mnet ? mlf_compositor(*mnet, pipe.canvas) : alpha_compositor(), cfg);
      save_image(r.composite, pipe.out);
      if (!pipe.mask_out.empty()) save_mask(r.refined_mask, pipe.mask_out);
    };
  });

  // train -------------------------------------------------------------------
  struct {
    std::string data, out, init, loss_log, nan_dump, mask_mode = "binary";
    TrainConfig cfg;
    int levels = 4, base = 16, growth = 8, log_every = 1;
    bool single_stream = false;
  } tr;
  tr.cfg.iterations = 1000;
  auto* c_tr = app.add_subcommand("train", "Train the fusion network on a triplet dataset");
  c_tr->add_option("--data", tr.data, "Dataset root")->required();
  c_tr->add_option("--out", tr.out, "Checkpoint to write")->required();
  c_tr->add_option("--iterations", tr.cfg.iterations);
  c_tr->add_option("--lr", tr.cfg.lr);
  c_tr->add_option("--batch-size", tr.cfg.batch_size);
  c_tr->add_option("--crop-size", tr.cfg.crop_size);
  c_tr->add_option("--lambda-p", tr.cfg.lambda_p);
  c_tr->add_option("--min-crop-fraction", tr.cfg.min_crop_fraction);
  c_tr->add_option("--levels", tr.levels);
  c_tr->add_option("--base", tr.base);
  c_tr->add_option("--growth", tr.growth);
  c_tr->add_flag("--single-stream", tr.single_stream, "Parameter-matched single-encoder variant");
  c_tr->add_option("--mask-mode", tr.mask_mode, "Mask fed for easy samples")->check(CLI::IsMember({"binary", "soft"}));
  c_tr->add_option("--init", tr.init, "Start from this checkpoint");
  c_tr->add_option("--loss-log", tr.loss_log, "CSV of per-iteration losses");
  c_tr->add_option("--log-every", tr.log_every);
  c_tr->add_option("--nan-dump", tr.nan_dump, "Directory receiving the batch that produced a NaN");
  c_tr->callback([&] {
    action = [&] {
      tr.cfg.validate();
      const std::uint64_t seed = resolve_seed(g, err);
      tr.cfg.seed = seed;
      tr.cfg.nan_dump_dir = tr.nan_dump;
      EncoderDecoderConfig ncfg = mlf_config(tr.levels, tr.base, tr.growth);
      if (tr.single_stream) ncfg = single_stream_matched(ncfg);
      ncfg.validate();
      const auto samples = load_dataset(tr.data);
      MlfNetwork<float> net = tr.init.empty() ? MlfNetwork<float>(ncfg, seed) : load_network<float>(tr.init, kMlfKind);
      const auto trips = triplets_of(samples);
      const auto masks = training_masks(samples, mask_mode_from_string(tr.mask_mode));
      const FeatureExtractor<float> extractor;
      const auto log = train_mlf<float>(net, trips, masks, tr.cfg, extractor, [&](const LossRecord& r) {
        if (tr.log_every > 0 && r.iteration % (tr.log_every * 100) == 0)
          err << "iter " << r.iteration << " l1 " << r.l1 << " perceptual " << r.perceptual << '\n';
      });
      save_network(tr.out, net, kMlfKind);
      if (!tr.loss_log.empty()) write_loss_csv(tr.loss_log, log, tr.log_every);
    };
  });

  // train-refiner -----------------------------------------------------------
  struct {
    std::string data, out;
    TrainConfig cfg;
    int levels = 3, base = 8, growth = 4, corruptions = 4;
  } trr;
  trr.cfg.iterations = 500;
  auto* c_trr = app.add_subcommand("train-refiner", "Train the mask refiner on corrupted dataset masks");
  c_trr->add_option("--data", trr.data)->required();
  c_trr->add_option("--out", trr.out)->required();
  c_trr->add_option("--iterations", trr.cfg.iterations);
  c_trr->add_option("--lr", trr.cfg.lr);
  c_trr->add_option("--batch-size", trr.cfg.batch_size);
  c_trr->add_option("--patch-sizes", trr.cfg.patch_sizes)->delimiter(',');
  c_trr->add_option("--levels", trr.levels);
  c_trr->add_option("--base", trr.base);
  c_trr->add_option("--growth", trr.growth);
  c_trr->add_option("--corruptions", trr.corruptions, "Corrupted masks per sample");
  c_trr->callback([&] {
    action = [&] {
      trr.cfg.validate();
      const std::uint64_t seed = resolve_seed(g, err);
      trr.cfg.seed = seed;
      const auto ncfg = refiner_config(trr.levels, trr.base, trr.growth);
      ncfg.validate();
      const auto pairs = make_refine_pairs(load_dataset(trr.data), trr.corruptions, seed);
      RefineNetwork<float> net(ncfg, seed);
      train_refiner<float>(net, pairs, trr.cfg);
      save_network(trr.out, net, kRefinerKind);
    };
  });

  // augment -----------------------------------------------------------------
  struct {
    std::string out, model, asset_dir, background_dir, mask_mode = "binary";
    int n_easy = 16, n_hard = 0, size = 64, assets = 16, backgrounds = 16;
  } aug;
  auto* c_aug = app.add_subcommand("augment", "Write easy and model-generated hard triplets");
  c_aug->add_option("--out", aug.out)->required();
  c_aug->add_option("--n-easy", aug.n_easy);
  c_aug->add_option("--n-hard", aug.n_hard);
  c_aug->add_option("--model", aug.model, "Fusion network checkpoint for hard triplets");
  c_aug->add_option("--asset-dir", aug.asset_dir, "RGBA matting assets (synthetic when omitted)");
  c_aug->add_option("--background-dir", aug.background_dir, "Background images (synthetic when omitted)");
  c_aug->add_option("--size", aug.size, "Side of synthetic assets");
  c_aug->add_option("--assets", aug.assets, "Number of synthetic assets");
  c_aug->add_option("--backgrounds", aug.backgrounds, "Number of synthetic backgrounds");
  c_aug->add_option("--generator-mask", aug.mask_mode)->check(CLI::IsMember({"binary", "soft"}));
  c_aug->callback([&] {
    action = [&] {
      if (aug.n_hard > 0 && aug.model.empty()) throw UsageError("--n-hard needs --model");
      if (aug.size < 2 || aug.assets < 1 || aug.backgrounds < 1) throw UsageError("invalid synthetic asset settings");
      const std::uint64_t seed = resolve_seed(g, err);
      std::mt19937_64 seeds(seed);
      const std::uint64_t asset_seed = seeds(), hard_seed = seeds(), bg_seed = seeds(), sample_seed = seeds();
      const auto assets = aug.asset_dir.empty() ? synthetic_assets(aug.assets, aug.size, aug.size, asset_seed)
                                                : load_assets(aug.asset_dir);
      const auto hard_sources = aug.asset_dir.empty() ? synthetic_assets(aug.assets, aug.size, aug.size, hard_seed)
                                                      : assets;
      const auto bgs = aug.background_dir.empty() ? synthetic_backgrounds(aug.backgrounds, aug.size, aug.size, bg_seed)
                                                  : load_images(aug.background_dir);
      std::optional<MlfNetwork<float>> net;
      if (!aug.model.empty()) net.emplace(load_network<float>(aug.model, kMlfKind));
      SynthesisConfig cfg;
      cfg.n_easy = aug.n_easy;
      cfg.n_hard = aug.n_hard;
      cfg.seed = sample_seed;
      cfg.generator_mask = mask_mode_from_string(aug.mask_mode);
      synthesize_dataset(assets, bgs, cfg, net ? network_compositor(*net) : Compositor{}, aug.out, &hard_sources);
    };
  });

  // syntest -----------------------------------------------------------------
  struct {
    std::string out, asset_dir, background_dir;
    int n = 50, size = 64, assets = 24, backgrounds = 24, band = 16;
  } st;
  auto* c_st = app.add_subcommand("syntest", "Write an evaluation set with exact targets and trimaps");
  c_st->add_option("--out", st.out)->required();
  c_st->add_option("--n", st.n);
  c_st->add_option("--size", st.size);
  c_st->add_option("--assets", st.assets);
  c_st->add_option("--backgrounds", st.backgrounds);
  c_st->add_option("--asset-dir", st.asset_dir);
  c_st->add_option("--background-dir", st.background_dir);
  c_st->add_option("--band", st.band, "Trimap band width");
  c_st->callback([&] {
    action = [&] {
      if (st.size < 2 || st.assets < 1 || st.backgrounds < 1 || st.band < 0)
        throw UsageError("invalid syntest settings");
      const std::uint64_t seed = resolve_seed(g, err);
      std::mt19937_64 seeds(seed);
      const std::uint64_t asset_seed = seeds(), bg_seed = seeds(), sample_seed = seeds();
      const auto assets = st.asset_dir.empty() ? synthetic_assets(st.assets, st.size, st.size, asset_seed)
                                               : load_assets(st.asset_dir);
      const auto bgs = st.background_dir.empty() ? synthetic_backgrounds(st.backgrounds, st.size, st.size, bg_seed)
                                                 : load_images(st.background_dir);
      CompositeConfig ccfg;
      ccfg.trimap_band = st.band;
      make_syntest(assets, bgs, st.n, sample_seed, st.out, ccfg);
    };
  });

  // eval --------------------------------------------------------------------
  struct {
    std::string data, report, mlf, region = "unknown";
    std::vector<std::string> methods;
    int canvas = 0;
    double sigma = 2.0;
  } ev;
  auto* c_ev = app.add_subcommand("eval", "PSNR benchmark over a dataset");
  c_ev->add_option("--data", ev.data)->required();
  c_ev->add_option("--report", ev.report, "Report CSV path")->required();
  c_ev->add_option("--methods", ev.methods,
                   "oracle, copy-paste, feather, pyramid, mlf, or name=<prediction dir>")
      ->delimiter(',');
  c_ev->add_option("--mlf", ev.mlf, "Fusion network checkpoint for method mlf");
  c_ev->add_option("--region", ev.region)->check(CLI::IsMember({"whole", "unknown"}));
  c_ev->add_option("--canvas", ev.canvas, "Fusion network canvas (0 = native)");
  c_ev->add_option("--sigma", ev.sigma, "Feather sigma");
  c_ev->callback([&] {
    action = [&] {
      std::optional<MlfNetwork<float>> net;
      std::vector<Method> methods;
      for (const auto& m : ev.methods) {
        const auto eq = m.find('=');
        if (eq != std::string::npos) {
          methods.push_back(Method::from_directory(m.substr(0, eq), m.substr(eq + 1)));
        } else if (m == "oracle") {
          methods.push_back(oracle_method());
        } else if (m == "copy-paste") {
          methods.push_back(copy_paste_method());
        } else if (m == "feather") {
          methods.push_back(feather_method(ev.sigma));
        } else if (m == "pyramid") {
          methods.push_back(pyramid_method());
        } else if (m == "mlf") {
          if (ev.mlf.empty()) throw UsageError("method mlf needs --mlf");
          if (!net) net.emplace(load_network<float>(ev.mlf, kMlfKind));
          methods.push_back(mlf_method(*net, ev.canvas));
        } else {
          throw UsageError("unknown method '" + m + "'");
        }
      }
      const auto data = methods.empty() ? std::vector<DatasetSample>{} : load_dataset(ev.data);
      const auto results = run_benchmark(data, methods, region_mode_from_string(ev.region), g.threads);
      emit_report(results, ev.report);
      for (const auto& r : results) out << r.method << ' ' << to_string(r.region) << ' ' << r.mean << " dB\n";
    };
  });

  // gradcheck ---------------------------------------------------------------
  struct {
    std::string suite = "all";
    double h = 1e-3;
  } gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  c_gc->add_option("--suite", gc.suite, "'all' or one case name");
  c_gc->add_option("--step", gc.h, "Central-difference step h");
  bool gradcheck_failed = false;
  c_gc->callback([&] {
    action = [&] {
      for (const auto& c : run_gradient_suite(gc.suite, gc.h)) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << " max_rel_error=" << c.result.max_rel_error
            << " coords=" << c.result.coordinates << " kink_skips=" << c.result.kink_skips << '\n';
        gradcheck_failed = gradcheck_failed || !c.passed;
      }
    };
  });

  try {
    std::vector<std::string> args = expand_config(std::move(raw_args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  }
  try {
    if (action) action();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Data);
  }
  return gradcheck_failed ? static_cast<int>(ErrorKind::Numeric) : 0;
}

// argv[0] is skipped.
inline int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args));
}

}  // namespace autocomp::cli
