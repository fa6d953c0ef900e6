#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <fmt/core.h>
#include <map>
#include <set>
#include <sstream>

#include "nst/bench/config.hpp"
#include "nst/bench/image_io.hpp"
#include "nst/bench/patterns.hpp"
#include "nst/bench/report.hpp"
#include "nst/bench/runner.hpp"
#include "nst/bench/svg.hpp"
#include "nst/errors.hpp"
#include "test_support.hpp"

using namespace nst;
using namespace nst::bench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nst_test_bench" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const json& j, const fs::path& base = ".") {
  try {
    parse_config(j, base);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig quick(std::string arch, std::uint64_t seed, int epochs = 20) {
  ExperimentConfig c = preset_defaults(Preset::desk);
  c.arch = std::move(arch);
  c.image_size = 32;
  c.max_epochs = epochs;
  c.checkpoint_epochs = {epochs};
  c.seed = seed;
  return c;
}

// Field groups a variant may touch; everything else must match the base.
std::set<std::string> changed_keys(const ExperimentConfig& a, const ExperimentConfig& b) {
  std::set<std::string> out;
  const auto ja = a.to_json(), jb = b.to_json();
  for (const auto& [k, v] : ja.items()) {
    if (k != "tag" && jb.at(k) != v) out.insert(k);
  }
  return out;
}

ExperimentRecord synthetic_record(std::size_t index, std::string arch, double ssim, double psnr) {
  ExperimentRecord r;
  r.index = index;
  r.config = quick(arch, index);
  r.fingerprint = r.config.fingerprint();
  r.graph = arch;
  r.content_tap = 1;
  r.style_taps = {4};
  r.metrics = MetricValues{ssim, psnr, 0.01 * static_cast<double>(index + 1), 0.5};
  r.training_seconds = 1.0 + static_cast<double>(index);
  return r;
}

std::vector<std::string> csv_column(const std::string& csv, const std::string& name) {
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  const auto col = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  std::vector<std::string> out;
  while (std::getline(ss, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i <= col && std::getline(ls, cell, ','); ++i) {
    }
    out.push_back(cell);
  }
  return out;
}

}  // namespace

TEST(Config, EmptyExperimentListIsRejected) {
  EXPECT_NE(config_error({{"experiments", json::array()}}).find("no experiments"), std::string::npos);
  EXPECT_NE(config_error(json::object()).find("experiments"), std::string::npos);
}

TEST(Config, DefaultsComeFromTheBaselineTable) {
  const auto loaded = parse_config({{"experiments", {json::object()}}}, ".");
  ASSERT_EQ(loaded.experiments.size(), 1u);
  const auto& c = loaded.experiments[0];
  EXPECT_EQ(c.learning_rate, 0.05);
  EXPECT_EQ(c.alpha, 1.0);
  EXPECT_EQ(c.beta, 1e8);
  EXPECT_EQ(c.content_layer, 2);
  EXPECT_EQ(c.style_layers, std::vector<int>{8});
  EXPECT_EQ(c.arch, "tiny_vgg");
  EXPECT_EQ(c.image_size, 64);
  EXPECT_EQ(c.checkpoint_epochs, (std::vector<int>{100, 250, 500}));

  const auto full = parse_config({{"preset", "full"}, {"experiments", {json::object()}}}, ".");
  EXPECT_EQ(full.experiments[0].max_epochs, 5000);
  EXPECT_EQ(full.experiments[0].image_size, 512);
  EXPECT_EQ(full.experiments[0].arch, "vgg19");
}

TEST(Config, VariantTagsSetTheirFieldGroup) {
  const auto loaded = parse_config(
      {{"experiments", {{{"tag", "variant_a"}}, {{"tag", "variant_b"}}, {{"tag", "multi"}}, {{"tag", "lr_0.2"}}}}},
      ".");
  EXPECT_EQ(loaded.experiments[0].beta, 1e7);
  EXPECT_EQ(loaded.experiments[1].beta, 1e9);
  EXPECT_EQ(loaded.experiments[2].style_layers, (std::vector<int>{6, 8, 10}));
  EXPECT_EQ(loaded.experiments[3].learning_rate, 0.2);
  // An explicit value agreeing with the tag is fine; a contradicting one is not.
  EXPECT_NO_THROW(parse_config({{"experiments", {{{"tag", "variant_a"}, {"beta", 1e7}}}}}, "."));
  EXPECT_NE(config_error({{"experiments", {{{"tag", "variant_a"}, {"beta", 5e7}}}}}).find("contradicts"),
            std::string::npos);
  EXPECT_NE(config_error({{"experiments", {{{"tag", "variant_z"}}}}}).find("variant_z"), std::string::npos);
}

TEST(Config, StrictSchemaNamesThePath) {
  EXPECT_NE(config_error({{"experiments", {json::object(), {{"lerning_rate", 0.1}}}}})
                .find("$.experiments[1].lerning_rate"),
            std::string::npos);
  EXPECT_NE(config_error({{"experiments", {json::object()}}, {"extra", 1}}).find("$.extra"), std::string::npos);
  EXPECT_NE(config_error({{"defaults", {{"beta", "big"}}}, {"experiments", {json::object()}}}).find("$.defaults.beta"),
            std::string::npos);
  EXPECT_NE(config_error({{"experiments", {{{"arch", "alexnet"}}}}}).find("alexnet"), std::string::npos);
  EXPECT_NE(config_error({{"experiments", {{{"style_layers", {11}}}}}}).find("style_layers"), std::string::npos);
  EXPECT_NE(config_error({{"experiments", {{{"content", "missing.png"}}}}}).find("missing.png"), std::string::npos);
  EXPECT_NE(config_error({{"experiments", {{{"content", "pattern:paisley:1"}}}}}).find("content"), std::string::npos);
}

TEST(Config, PrecedenceAndCheckpointDefaulting) {
  const auto loaded = parse_config(
      {{"defaults", {{"max_epochs", 50}, {"seed", 4}}}, {"experiments", {json::object(), {{"max_epochs", 300}}}}}, ".");
  EXPECT_EQ(loaded.experiments[0].seed, 4u);
  EXPECT_EQ(loaded.experiments[0].checkpoint_epochs, std::vector<int>{50});
  EXPECT_EQ(loaded.experiments[1].checkpoint_epochs, (std::vector<int>{100, 250, 300}));
  EXPECT_NE(config_error({{"experiments", {{{"max_epochs", 50}, {"checkpoint_epochs", {100}}}}}}).find("checkpoint"),
            std::string::npos);
}

TEST(Config, DeskPresetMapsFullSizeBackbones) {
  const auto loaded = parse_config({{"experiments", {{{"arch", "resnet101"}}, {{"arch", "inception_v3"}}}}}, ".");
  EXPECT_EQ(loaded.experiments[0].arch, "tiny_resnet");
  EXPECT_EQ(loaded.experiments[1].arch, "tiny_inception");
  const auto kept = parse_config({{"experiments", {{{"arch", "resnet101"}}}}}, ".", Preset::full);
  EXPECT_EQ(kept.experiments[0].arch, "resnet101");
}

TEST(Config, FingerprintIgnoresKeyOrder) {
  const auto a = parse_config(json::parse(R"({"experiments":[{"beta":1e7,"seed":3,"learning_rate":0.01}]})"), ".");
  const auto b = parse_config(json::parse(R"({"experiments":[{"learning_rate":0.01,"seed":3,"beta":1e7}]})"), ".");
  EXPECT_EQ(a.experiments[0].fingerprint(), b.experiments[0].fingerprint());
  EXPECT_EQ(a.experiments[0].fingerprint().size(), 64u);
  auto c = a.experiments[0];
  c.seed = 4;
  EXPECT_NE(c.fingerprint(), a.experiments[0].fingerprint());
}

TEST(Config, LoadsFileAndResolvesRelativePaths) {
  const auto dir = scratch("config_file");
  write_png(make_pattern("truntum", 3, 16), dir / "content.png");
  {
    std::ofstream(dir / "run.json") << R"({"experiments":[{"content":"content.png","image_size":16}]})";
    std::ofstream(dir / "broken.json") << "{ not json";
  }
  const auto loaded = load_config(dir / "run.json");
  EXPECT_EQ(fs::path(loaded.experiments[0].content), (dir / "content.png").lexically_normal());
  EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "absent.json"), ConfigError);
}

TEST(Ablation, SetsFollowTheFactorialDesign) {
  const auto base = preset_defaults(Preset::desk);
  const auto sets = make_ablation_sets(base);
  std::vector<double> rates;
  for (const auto& c : sets.rates) rates.push_back(c.learning_rate);
  EXPECT_EQ(rates, (std::vector<double>{0.05, 0.01, 0.1, 0.2}));
  EXPECT_EQ(sets.layers[3].style_layers, (std::vector<int>{6, 8, 10}));
  EXPECT_EQ(sets.layers[1].content_layer, 1);
  EXPECT_EQ(sets.layers[2].style_layers, std::vector<int>{10});
  EXPECT_EQ(sets.weights[1].beta, 1e7);
  EXPECT_EQ(sets.weights[2].beta, 1e9);
  EXPECT_EQ(sets.weights[3].alpha, 10.0);

  const std::vector<std::set<std::string>> groups{
      {"alpha"}, {"beta"}, {"content_layer", "style_layers", "style_weights"}, {"learning_rate"}};
  for (int s = 1; s <= 3; ++s) {
    const auto& set = sets.set(s);
    ASSERT_EQ(set.size(), 4u);
    EXPECT_TRUE(changed_keys(set[0], base).empty());
    for (std::size_t i = 1; i < set.size(); ++i) {
      const auto changed = changed_keys(set[i], base);
      int touched = 0;
      for (const auto& g : groups) {
        bool any = false;
        for (const auto& k : changed) any = any || g.contains(k);
        if (any) {
          ++touched;
          for (const auto& k : changed) EXPECT_TRUE(g.contains(k)) << set[i].tag << " " << k;
        }
      }
      EXPECT_EQ(touched, 1) << set[i].tag;
    }
  }
  EXPECT_THROW(sets.set(4), ConfigError);
}

TEST(Patterns, DeterministicAndInRange) {
  for (auto name : pattern_names()) {
    const Tensor a = make_pattern(name, 7, 24);
    EXPECT_EQ(a.shape(), (Shape{3, 24, 24}));
    EXPECT_EQ(a, make_pattern(name, 7, 24)) << name;
    EXPECT_NE(a, make_pattern(name, 8, 24)) << name;
    for (float v : a.data()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  const auto ref = parse_pattern_ref("pattern:ceplok:12");
  EXPECT_EQ(ref.name, "ceplok");
  EXPECT_EQ(ref.seed, 12u);
  EXPECT_THROW(parse_pattern_ref("pattern:ceplok"), ConfigError);
  EXPECT_THROW(parse_pattern_ref("pattern:ceplok:x"), ConfigError);
  EXPECT_THROW(parse_pattern_ref("pattern:lurik:1"), ConfigError);
}

TEST(ImageIo, PngRoundTripWithinQuantization) {
  const auto dir = scratch("png");
  const Tensor img = make_pattern("kawung", 5, 20);
  write_png(img, dir / "a.png");
  const Tensor back = read_png(dir / "a.png");
  ASSERT_EQ(back.shape(), img.shape());
  EXPECT_LE(nst::testing::max_abs_diff(back, img), 0.5 / 255 + 1e-6);
  const Tensor gray(Shape{1, 4, 4}, 0.5f);
  write_png(gray, dir / "g.png");
  const Tensor rgb = read_png(dir / "g.png");
  EXPECT_EQ(rgb.channels(), 3);
  EXPECT_NEAR(rgb[0], 128.0 / 255, 1e-6);
  EXPECT_THROW(read_png(dir / "none.png"), LoadError);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(read_png(dir / "bad.png"), LoadError);
}

TEST(ImageIo, RawIsBitExact) {
  const auto dir = scratch("raw");
  const Tensor img = nst::testing::random_tensor(Shape{3, 5, 7}, 3, 0.0f, 1.0f);
  write_raw(img, dir / "a.f32");
  EXPECT_EQ(read_raw(dir / "a.f32"), img);
  std::ofstream(dir / "bad.f32") << "NSTF0";
  EXPECT_THROW(read_raw(dir / "bad.f32"), LoadError);
}

TEST(ImageIo, ResizeAndLoad) {
  const Tensor img = make_pattern("parang", 1, 16);
  EXPECT_EQ(resize_bilinear(img, 16, 16), img);
  const Tensor flat = resize_bilinear(Tensor(Shape{3, 5, 9}, 0.25f), 13, 4);
  EXPECT_EQ(flat.shape(), (Shape{3, 13, 4}));
  for (float v : flat.data()) EXPECT_NEAR(v, 0.25f, 1e-7);
  // Downsampling by 2 with centre alignment averages 2x2 blocks.
  Tensor ramp(Shape{1, 2, 4});
  for (int c = 0; c < 4; ++c) ramp.at(0, 0, c) = ramp.at(0, 1, c) = static_cast<float>(c);
  const Tensor half = resize_bilinear(ramp, 1, 2);
  EXPECT_NEAR(half[0], 0.5f, 1e-6);
  EXPECT_NEAR(half[1], 2.5f, 1e-6);

  EXPECT_EQ(load_image("pattern:parang:1", 16), img);
  EXPECT_EQ(load_image("pattern:parang:1", 8).shape(), (Shape{3, 8, 8}));
  const auto dir = scratch("load");
  write_raw(img, dir / "img.f32");
  EXPECT_EQ(load_image((dir / "img.f32").string(), 16), img);
}

TEST(Svg, BoxStatisticsMatchHandValues) {
  const double sorted[] = {1, 2, 3, 4, 5};
  EXPECT_EQ(quantile(sorted, 0.0), 1.0);
  EXPECT_EQ(quantile(sorted, 0.25), 2.0);
  EXPECT_EQ(quantile(sorted, 0.5), 3.0);
  EXPECT_EQ(quantile(sorted, 0.6), 3.4);
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 30};
  const auto b = box_stats(v);
  EXPECT_EQ(b.q1, 3.0);
  EXPECT_EQ(b.median, 5.0);
  EXPECT_EQ(b.q3, 7.0);
  EXPECT_EQ(b.whisker_low, 1.0);
  EXPECT_EQ(b.whisker_high, 8.0);
  EXPECT_EQ(b.outliers, std::vector<double>{30});
  EXPECT_NEAR(b.mean, 66.0 / 9, 1e-12);
  EXPECT_THROW(box_stats(std::vector<double>{}), PreconditionError);
}

TEST(Svg, OneBoxGroupPerArchitecture) {
  const std::vector<stats::SampleGroup> groups{{"tiny_vgg", {0.3, 0.32, 0.35}},
                                               {"tiny_resnet", {0.2, 0.25, 0.9}},
                                               {"a<b", {0.4}}};
  const auto svg = box_plot_svg("SSIM", "SSIM", groups);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("width=\"800\""), std::string::npos);
  EXPECT_NE(svg.find("height=\"500\""), std::string::npos);
  std::size_t count = 0;
  for (auto pos = svg.find("class=\"box-group\""); pos != std::string::npos;
       pos = svg.find("class=\"box-group\"", pos + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 3u);
  EXPECT_NE(svg.find("data-label=\"tiny_resnet\""), std::string::npos);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
  EXPECT_EQ(svg, box_plot_svg("SSIM", "SSIM", groups));
}

TEST(Batch, ThreeTinyRunsInOrder) {
  const std::vector<ExperimentConfig> configs{quick("tiny_vgg", 1), quick("tiny_resnet", 2), quick("tiny_inception", 3)};
  const auto dir = scratch("batch3");
  BatchOptions opts;
  opts.artifacts_dir = dir;
  const auto records = run_batch(configs, opts);
  ASSERT_EQ(records.size(), 3u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    EXPECT_EQ(r.status, RunStatus::ok) << r.failure_reason;
    EXPECT_EQ(r.index, i);
    EXPECT_EQ(r.graph, configs[i].arch);
    EXPECT_EQ(r.fingerprint, configs[i].fingerprint());
    ASSERT_TRUE(r.metrics.has_value());
    EXPECT_EQ(r.checkpoints.size(), 1u);
    EXPECT_LE(r.started_at, r.finished_at);
    if (i > 0) {
      EXPECT_GE(r.started_at, records[i - 1].finished_at);
    }
    EXPECT_TRUE(fs::exists(dir / r.trace_file));
    EXPECT_TRUE(fs::exists(dir / r.output_png));
    EXPECT_TRUE(fs::exists(dir / r.checkpoints[0].raw));
    EXPECT_EQ(r.ssim_channel_mode, "luma");
    const auto back = record_from_json(json::parse(to_json(r).dump()));
    EXPECT_TRUE(back.same_results(r));
    EXPECT_EQ(to_json(back), to_json(r));
  }
}

TEST(Batch, FailuresAreIsolated) {
  std::vector<ExperimentConfig> configs{quick("tiny_vgg", 1), quick("tiny_vgg", 2), quick("tiny_vgg", 3),
                                        quick("tiny_vgg", 4)};
  configs[1].beta = 1e300;  // overflows the loss
  configs[2].max_epochs = 100000;
  configs[2].checkpoint_epochs = {100000};
  configs[2].time_budget_seconds = 0.05;  // injected budget failure
  apply_variant(configs[3], "lr_0.2");
  const auto records = run_batch(configs);
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records[0].status, RunStatus::ok);
  EXPECT_EQ(records[1].status, RunStatus::diverged);
  EXPECT_EQ(records[1].failure_epoch, 1);
  EXPECT_FALSE(records[1].metrics.has_value());
  EXPECT_FALSE(records[1].failure_reason.empty());
  EXPECT_EQ(records[2].status, RunStatus::budget_exceeded);
  EXPECT_FALSE(records[2].metrics.has_value());
  // Adam's per-pixel step is bounded by the learning rate, so 0.2 stays finite.
  EXPECT_EQ(records[3].status, RunStatus::ok);
  const auto alone = run_experiment(configs[0], 0);
  EXPECT_TRUE(alone.same_results(records[0]));
  const auto j = to_json(records[1]);
  EXPECT_TRUE(j.at("metrics").is_null());
  EXPECT_EQ(j.at("status"), "diverged");
  EXPECT_FALSE(j.at("metrics_null_reason").get<std::string>().empty());
}

TEST(Batch, BitIdenticalAcrossRerunsAndWorkerCounts) {
  const std::vector<ExperimentConfig> configs{quick("tiny_vgg", 5), quick("tiny_resnet", 6), quick("tiny_vgg", 7),
                                              quick("tiny_inception", 8)};
  const auto a = run_batch(configs);
  BatchOptions two;
  two.parallelism = 2;
  const auto b = run_batch(configs, two);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i].same_results(b[i])) << i;
  EXPECT_EQ(records_csv(a), records_csv(b));
}

TEST(Batch, Parallelism) {
  EXPECT_EQ(effective_parallelism(4, 2), 2);
  EXPECT_EQ(effective_parallelism(1, 10), 1);
  EXPECT_GE(effective_parallelism(0, 100), 1);
  ::setenv("NST_BENCH_THREADS", "1", 1);
  EXPECT_EQ(effective_parallelism(8, 8), 1);
  ::unsetenv("NST_BENCH_THREADS");
}

TEST(Report, SummaryMeansMatchHandValues) {
  std::vector<ExperimentRecord> recs;
  const double ssim_a[] = {0.30, 0.34, 0.32}, ssim_b[] = {0.20, 0.26, 0.29};
  for (int i = 0; i < 3; ++i) recs.push_back(synthetic_record(recs.size(), "tiny_vgg", ssim_a[i], 20.0 + i));
  for (int i = 0; i < 3; ++i) recs.push_back(synthetic_record(recs.size(), "tiny_resnet", ssim_b[i], 18.0 + i));
  const auto csv = summary_csv(recs);
  std::stringstream ss(csv);
  std::string header, row_a, row_b, extra;
  std::getline(ss, header);
  std::getline(ss, row_a);
  std::getline(ss, row_b);
  EXPECT_FALSE(std::getline(ss, extra));
  EXPECT_EQ(header, "arch,n,ssim,psnr_db,mse,deep_feature_distance");
  const double mean_a = (0.30 + 0.34 + 0.32) / 3;
  double var_a = 0;
  for (double v : ssim_a) var_a += (v - mean_a) * (v - mean_a);
  EXPECT_EQ(row_a.rfind(fmt::format("tiny_vgg,3,{}±{},", mean_a, std::sqrt(var_a / 2)), 0), 0u) << row_a;
  EXPECT_EQ(row_b.rfind("tiny_resnet,3,", 0), 0u);
  EXPECT_NE(row_a.find("21±1,"), std::string::npos);
  EXPECT_NE(row_a.find("0.5±0"), std::string::npos);
}

TEST(Report, BundleIsCompleteAndDeterministic) {
  std::vector<ExperimentRecord> recs;
  const double ssim_a[] = {0.30, 0.34, 0.32}, ssim_b[] = {0.20, 0.26, 0.29};
  for (int i = 0; i < 3; ++i) recs.push_back(synthetic_record(recs.size(), "tiny_vgg", ssim_a[i], 20.0 + i));
  for (int i = 0; i < 3; ++i) recs.push_back(synthetic_record(recs.size(), "tiny_resnet", ssim_b[i], 18.0 + i));
  auto failed = synthetic_record(recs.size(), "tiny_resnet", 0, 0);
  failed.status = RunStatus::diverged;
  failed.metrics.reset();
  failed.failure_reason = "non-finite loss";
  failed.failure_epoch = 7;
  recs.push_back(failed);

  const auto root = scratch("report");
  const auto files = emit_report(recs, root / "a");
  for (auto name : {"records.csv", "records.json", "summary.csv", "anova_ssim.csv", "pairwise_ssim.csv", "cost.csv",
                    "timing.csv", "box_ssim.svg", "box_psnr_db.svg", "box_deep_feature_distance.svg",
                    "box_training_seconds.svg", "manifest.json"}) {
    EXPECT_NE(std::find(files.begin(), files.end(), name), files.end()) << name;
    EXPECT_TRUE(fs::exists(root / "a" / name)) << name;
  }
  const auto manifest = json::parse(slurp(root / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("failed_records"), 1);

  // Recompute the ANOVA from the SSIM column of records.csv.
  const auto csv = slurp(root / "a" / "records.csv");
  const auto ssim = csv_column(csv, "ssim");
  const auto arch = csv_column(csv, "arch");
  std::map<std::string, stats::SampleGroup> by_arch;
  std::vector<stats::SampleGroup> groups;
  for (std::size_t i = 0; i < ssim.size(); ++i) {
    if (ssim[i].empty()) continue;
    auto& g = by_arch[arch[i]];
    g.label = arch[i];
    g.values.push_back(std::stod(ssim[i]));
  }
  groups = {by_arch.at("tiny_vgg"), by_arch.at("tiny_resnet")};
  EXPECT_EQ(slurp(root / "a" / "anova_ssim.csv"), stats::anova_csv(stats::one_way_anova(groups)));

  // Regenerating gives byte-identical tables and plots apart from wall-clock files.
  emit_report(recs, root / "b");
  for (auto name : {"records.csv", "summary.csv", "anova_ssim.csv", "pairwise_ssim.csv", "cost.csv", "box_ssim.svg",
                    "box_psnr_db.svg", "box_deep_feature_distance.svg"}) {
    EXPECT_EQ(slurp(root / "a" / name), slurp(root / "b" / name)) << name;
  }
  const auto svg = slurp(root / "a" / "box_ssim.svg");
  std::size_t boxes = 0;
  for (auto pos = svg.find("class=\"box-group\""); pos != std::string::npos;
       pos = svg.find("class=\"box-group\"", pos + 1)) {
    ++boxes;
  }
  EXPECT_EQ(boxes, 2u);

  const auto loaded = load_records(root / "a");
  ASSERT_EQ(loaded.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_TRUE(loaded[i].same_results(recs[i]));
}

TEST(Report, RefusesForeignDirectoriesAndEmptyInput) {
  const auto root = scratch("report_guard");
  const std::vector<ExperimentRecord> recs{synthetic_record(0, "tiny_vgg", 0.3, 20)};
  fs::create_directories(root / "busy");
  std::ofstream(root / "busy" / "keep.txt") << "user data";
  EXPECT_THROW(emit_report(recs, root / "busy"), ConfigError);
  EXPECT_TRUE(fs::exists(root / "busy" / "keep.txt"));
  EXPECT_THROW(emit_report(std::vector<ExperimentRecord>{}, root / "x"), PreconditionError);
  // A previous report is replaced; the single-arch case skips the tests with a note.
  emit_report(recs, root / "r");
  const auto files = emit_report(recs, root / "r");
  EXPECT_EQ(std::find(files.begin(), files.end(), "anova_ssim.csv"), files.end());
  EXPECT_FALSE(json::parse(slurp(root / "r" / "manifest.json")).at("notes").empty());
}

#ifdef NST_BENCH_EXE
namespace {
int run_cli(const std::string& args) {
  const int rc = std::system((std::string(NST_BENCH_EXE) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  {
    std::ofstream(dir / "bad.json") << R"({"experiments":[{"colour":1}]})";
    std::ofstream(dir / "ok.json")
        << R"({"defaults":{"image_size":32,"max_epochs":10},"experiments":[{"seed":1},{"seed":2,"arch":"resnet50"}]})";
    std::ofstream(dir / "partial.json")
        << R"({"defaults":{"image_size":32,"max_epochs":10},"experiments":[{"seed":1},{"beta":1e300}]})";
  }
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string() + " --out " + (dir / "o1").string()), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "o2").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o2" / "report" / "summary.csv"));
  EXPECT_EQ(load_records(dir / "o2").size(), 2u);
  EXPECT_EQ(run_cli("run --config " + (dir / "partial.json").string() + " --out " + (dir / "o3").string()), 3);
  EXPECT_EQ(run_cli("profile --arch resnet50 --size 224 --repeats 0"), 0);
  EXPECT_EQ(run_cli("profile --arch alexnet --size 224 --repeats 0"), 2);
  EXPECT_EQ(run_cli("stats --records " + (dir / "o2").string()), 2);
}
#endif
