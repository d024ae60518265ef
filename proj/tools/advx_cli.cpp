// advx: command-line driver for the attack engine.
//
// Exit codes: 0 success, 2 attack failed (no success within the budget), 1 error.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advx/evaluation.hpp"
#include "advx/metrics.hpp"
#include "advx/mock_oracle.hpp"
#include "advx/png_io.hpp"

using namespace advx;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 1234;
constexpr int kExitOk = 0, kExitError = 1, kExitFailed = 2;

bool g_log_json = false;

void log_event(const std::string& event, const json& fields = json::object()) {
  if (g_log_json) {
    json line = fields;
    line["event"] = event;
    std::cerr << line.dump() << '\n';
    return;
  }
  std::cerr << "advx: " << event;
  for (const auto& [k, v] : fields.items()) std::cerr << ' ' << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
  std::cerr << '\n';
}

struct OracleOptions {
  std::string oracle;
  double timeout = 30.0;
  int retries = 2;
};

/// Oracle plus embedder chosen by --oracle / ADVX_ORACLE_URL.
struct OracleBundle {
  std::unique_ptr<ExplanationOracle> oracle;
  std::unique_ptr<EmbeddingProvider> embedder;
};

OracleBundle make_oracle(const OracleOptions& opt) {
  std::string target = opt.oracle;
  if (target.empty()) {
    const char* env = std::getenv(kOracleUrlEnv);
    target = env && *env ? env : "builtin-mock";
  }
  OracleBundle b;
  if (target == "builtin-mock") {
    b.oracle = std::make_unique<MockOracle>();
    b.embedder = std::make_unique<HashedBagOfWords>();
    return b;
  }
  OracleEndpoint ep;
  ep.base_url = effective_base_url(target);
  ep.timeout_seconds = opt.timeout;
  ep.max_retries = opt.retries;
  ep.validate();
  b.oracle = std::make_unique<HttpOracle>(ep);
  b.embedder = std::make_unique<HttpEmbedder>(ep);
  return b;
}

void add_oracle_options(CLI::App* app, OracleOptions& o) {
  app->add_option("--oracle", o.oracle, "builtin-mock or oracle base URL (default: $ADVX_ORACLE_URL, else builtin-mock)");
  app->add_option("--timeout", o.timeout, "HTTP timeout in seconds")->check(CLI::PositiveNumber);
  app->add_option("--retries", o.retries, "retries on 5xx / connection failure")->check(CLI::NonNegativeNumber);
}

std::string g_scenario = "s1";
std::string g_policy_file;

void add_plan_options(CLI::App* app, AttackPlan& plan) {
  app->add_option("--attack", plan.attack, "cfx, fl-s, lc-s, fl-m, lc-m or <fl|lc>-<none|text|image|both>");
  app->add_option("--scenario", g_scenario, "s1 or s2");
  app->add_option("--threshold", plan.threshold, "explanation similarity threshold t")->check(CLI::Range(0.0, 1.0));
  app->add_option("--seed", plan.seed, "run seed");
  app->add_option("--budget", plan.query_budget, "oracle queries per image including the clean one (0 = unlimited)");
  app->add_option("--superpixels", plan.superpixels, "subregions per non-sensitive component (0 = automatic)");
  app->add_option("--color-policy", g_policy_file, "JSON file with per-class a/b offset ranges");
  app->add_option("--max-trials", plan.cfx.max_trials, "CFX: maximum colorization trials N")->check(CLI::PositiveNumber);
  app->add_flag("--cfx-exhaustive", plan.cfx.exhaustive, "CFX: keep searching after success");
  app->add_option("--population", plan.evo.outer_population, "GA population N_out")->check(CLI::PositiveNumber);
  app->add_option("--generations", plan.evo.outer_generations, "GA generations G_out")->check(CLI::PositiveNumber);
  app->add_option("--mutation", plan.evo.mutation_probability, "GA per-gene mutation probability")->check(CLI::Range(0.0, 1.0));
  app->add_option("--lambda", plan.evo.inner_lambda, "ES children per generation")->check(CLI::PositiveNumber);
  app->add_option("--inner-generations", plan.evo.inner_generations, "ES generations G_in")->check(CLI::PositiveNumber);
  app->add_option("--learning-rate", plan.evo.learning_rate, "ES initial step size")->check(CLI::NonNegativeNumber);
  app->add_option("--step-decay", plan.evo.step_decay, "ES step decay per generation")->check(CLI::Range(0.0, 1.0));
  app->add_option("--chain-length", plan.evo.chain_length, "filters per chain L")->check(CLI::PositiveNumber);
  app->add_option("--region-fraction", plan.evo.region_fraction, "LC: share of non-sensitive pixels attacked");
  app->add_option("--initial-alpha", plan.evo.initial_alpha, "ES start blend weight")->check(CLI::Range(0.0, 1.0));
  app->add_option("--initial-beta", plan.evo.initial_beta, "ES start intensity")->check(CLI::Range(0.0, 1.0));
  app->add_flag("--random-search", "sample filter chains at random instead of GA/ES");
  app->add_flag("--exhaustive", plan.evo.exhaustive, "filter text mode: keep searching after success");
}

void finish_plan(CLI::App* app, AttackPlan& plan) {
  plan.scenario = parse_scenario(g_scenario);
  if (app->count("--random-search")) plan.evo.search = SearchStrategy::random;
  if (!g_policy_file.empty()) plan.policy = ColorRangePolicy::from_json(read_text(g_policy_file));
  plan.validate();
}

json outcome_json(const ImageResult& r, const AttackPlan& plan) {
  json trace = json::array();
  for (const auto& t : r.outcome.trace)
    trace.push_back({{"query", t.query_index}, {"q_text", t.q_text}, {"q_image", t.q_image}, {"feasible", t.feasible}});
  const ImageRecord& rec = r.record;
  json j{{"image_id", rec.image_id},
         {"success", rec.success},
         {"activity_changed", rec.activity_changed},
         {"found_feasible", rec.found_feasible},
         {"q_text", rec.q_text},
         {"q_image", rec.q_image},
         {"colorfulness_clean", rec.colorfulness_clean},
         {"colorfulness_adv", rec.colorfulness_adv},
         {"queries", rec.queries},
         {"activity", r.outcome.oracle_output.activity},
         {"explanation", r.outcome.oracle_output.explanation},
         {"trace", trace},
         {"config", plan.to_json()}};
  if (!rec.error.empty()) j["error"] = rec.error;
  return j;
}

std::vector<CorpusItem> load_inputs(const std::string& corpus, int synthetic, std::uint64_t synthetic_seed) {
  if (!corpus.empty()) return load_corpus(corpus);
  if (synthetic > 0) return synthetic_corpus(synthetic, synthetic_seed);
  throw std::invalid_argument("either --corpus or --synthetic is required");
}

int serve_mock(const std::string& host, int port, std::uint64_t budget) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  MockServer server({host, port, budget});
  server.start();
  log_event("listening", {{"url", server.base_url()}});
  std::cout << server.base_url() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  log_event("stopped", {{"signal", sig}});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box attacks on self-rationalizing models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML configuration file (flags override it)");
  app.add_flag("--log-json", g_log_json, "structured JSON-lines logs on stderr");

  AttackPlan plan;
  plan.seed = kDefaultSeed;
  OracleOptions oracle_opt;

  // attack
  auto* attack = app.add_subcommand("attack", "attack one image");
  std::string image_path, mask_path, mask_json, skin_path, out_dir = "advx-out";
  attack->add_option("--image", image_path, "input PNG")->required()->check(CLI::ExistingFile);
  attack->add_option("--mask", mask_path, "semantic label PNG (default: <image>.mask.png)");
  attack->add_option("--mask-json", mask_json, "class table JSON (default: <image>.mask.json)");
  attack->add_option("--skin", skin_path, "skin mask PNG (default: <image>.skin.png if present)");
  attack->add_option("--out", out_dir, "output directory");
  add_plan_options(attack, plan);
  add_oracle_options(attack, oracle_opt);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "attack a corpus and report");
  std::string corpus_dir, replay_path, scorer_cmd;
  int synthetic = 0, jobs = 1;
  std::uint64_t synthetic_seed = 7;
  for (auto* sub : {evaluate}) {
    sub->add_option("--corpus", corpus_dir, "directory of <id>.png + masks")->check(CLI::ExistingDirectory);
    sub->add_option("--synthetic", synthetic, "use N generated images instead of --corpus");
    sub->add_option("--synthetic-seed", synthetic_seed, "generator seed for --synthetic");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory");
  }
  evaluate->add_option("--replay", replay_path, "re-run a manifest and compare records")->check(CLI::ExistingFile);
  evaluate->add_option("--scorer", scorer_cmd, "external quality scorer command");
  add_plan_options(evaluate, plan);
  add_oracle_options(evaluate, oracle_opt);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "objective ablation over filter modes");
  std::vector<std::string> modes = {"fl-none", "fl-text", "fl-image", "fl-both",
                                    "lc-none", "lc-text", "lc-image", "lc-both"};
  ablate->add_option("--corpus", corpus_dir, "directory of <id>.png + masks")->check(CLI::ExistingDirectory);
  ablate->add_option("--synthetic", synthetic, "use N generated images instead of --corpus");
  ablate->add_option("--synthetic-seed", synthetic_seed, "generator seed for --synthetic");
  ablate->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  ablate->add_option("--out", out_dir, "output directory");
  ablate->add_option("--modes", modes, "filter modes to compare");
  add_plan_options(ablate, plan);
  add_oracle_options(ablate, oracle_opt);

  // serve-mock
  auto* serve = app.add_subcommand("serve-mock", "serve the mock oracle over HTTP");
  std::string host = "127.0.0.1";
  int port = 8765;
  std::uint64_t serve_budget = 0;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--budget", serve_budget, "total /predict budget; 429 afterwards (0 = unlimited)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "colorfulness, SSIM and explanation similarity");
  std::string reference_path, expl1, expl2;
  metrics->add_option("--image", image_path, "image PNG")->check(CLI::ExistingFile);
  metrics->add_option("--reference", reference_path, "reference PNG for SSIM")->check(CLI::ExistingFile);
  metrics->add_option("--explanation", expl1, "text file with an explanation")->check(CLI::ExistingFile);
  metrics->add_option("--reference-explanation", expl2, "text file with the reference explanation")
      ->check(CLI::ExistingFile);
  add_oracle_options(metrics, oracle_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*attack) {
      finish_plan(attack, plan);
      const fs::path image(image_path);
      const fs::path stem = image.parent_path() / image.stem();
      CorpusItem item;
      item.id = image.stem().string();
      item.image = read_png_rgb(image);
      const fs::path mp = mask_path.empty() ? fs::path(stem.string() + ".mask.png") : fs::path(mask_path);
      const fs::path mj = mask_json.empty() ? fs::path(stem.string() + ".mask.json") : fs::path(mask_json);
      if (!fs::exists(mp)) throw IoError("semantic mask not found: " + mp.string());
      if (!fs::exists(mj)) throw IoError("class table not found: " + mj.string());
      item.semantic = load_semantic_mask(mp, mj);
      const fs::path sp = skin_path.empty() ? fs::path(stem.string() + ".skin.png") : fs::path(skin_path);
      if (!skin_path.empty() && !fs::exists(sp)) throw IoError("skin mask not found: " + sp.string());
      if (fs::exists(sp)) item.skin = load_skin_mask(sp);

      OracleBundle ob = make_oracle(oracle_opt);
      log_event("attack", {{"image", item.id}, {"attack", plan.attack}, {"scenario", g_scenario}});
      const ImageResult r = attack_item(item, plan, *ob.oracle, *ob.embedder);
      write_png(fs::path(out_dir) / (item.id + ".adv.png"), r.outcome.adversarial_image);
      write_text(fs::path(out_dir) / (item.id + ".json"), outcome_json(r, plan).dump(2) + "\n");
      log_event("done", {{"success", r.record.success}, {"q_text", r.record.q_text}, {"queries", r.record.queries}});
      if (!r.record.error.empty()) throw std::runtime_error(r.record.error);
      return r.record.success ? kExitOk : kExitFailed;
    }

    if (*evaluate) {
      finish_plan(evaluate, plan);
      const auto items = load_inputs(corpus_dir, synthetic, synthetic_seed);
      OracleBundle ob = make_oracle(oracle_opt);
      if (!replay_path.empty()) {
        const RunManifest old = RunManifest::from_json(read_text(replay_path));
        const RunManifest fresh = replay(old, items, *ob.oracle, *ob.embedder, jobs);
        const bool same = fresh.to_json() == old.to_json();
        log_event("replay", {{"records", fresh.records.size()}, {"identical", same}});
        std::cout << json{{"identical", same}}.dump() << '\n';
        return same ? kExitOk : kExitError;
      }
      std::unique_ptr<ExternalScorer> scorer;
      if (!scorer_cmd.empty()) scorer = std::make_unique<ExternalScorer>(scorer_cmd);
      RunOptions ro;
      ro.jobs = jobs;
      ro.output_dir = fs::path(out_dir);
      ro.scorer = scorer.get();
      ro.on_result = [](const ImageResult& r) {
        log_event("image", {{"id", r.record.image_id}, {"success", r.record.success}, {"queries", r.record.queries}});
      };
      const RunManifest m = run_corpus(items, plan, *ob.oracle, *ob.embedder, ro);
      const DistributionReport rep = distribution_report(m.records);
      write_text(fs::path(out_dir) / "report.json", rep.to_json().dump(2) + "\n");
      write_text(fs::path(out_dir) / "report.csv", rep.to_csv());
      const double sr = success_rate(m.records, plan.scenario, plan.threshold);
      const double ms = mean_q_image(m.records);
      std::cout << json{{"attack", plan.attack},
                        {"scenario", g_scenario},
                        {"images", m.records.size()},
                        {"success_rate", sr},
                        {"mean_ssim", std::isnan(ms) ? json(nullptr) : json(ms)}}
                       .dump()
                << '\n';
      return kExitOk;
    }

    if (*ablate) {
      finish_plan(ablate, plan);
      const auto items = load_inputs(corpus_dir, synthetic, synthetic_seed);
      OracleBundle ob = make_oracle(oracle_opt);
      const auto rows = ablation_matrix(items, plan, modes, *ob.oracle, *ob.embedder, jobs);
      write_text(fs::path(out_dir) / "ablation.json", ablation_to_json(rows).dump(2) + "\n");
      write_text(fs::path(out_dir) / "ablation.csv", ablation_to_csv(rows));
      std::cout << ablation_to_csv(rows);
      return kExitOk;
    }

    if (*serve) return serve_mock(host, port, serve_budget);

    if (*metrics) {
      json out = json::object();
      if (!image_path.empty()) {
        const RgbImage img = read_png_rgb(image_path);
        out["colorfulness"] = colorfulness(img);
        if (!reference_path.empty()) out["ssim"] = ssim(read_png_rgb(reference_path), img);
      }
      if (!expl1.empty() && !expl2.empty()) {
        OracleBundle ob = make_oracle(oracle_opt);
        const auto e1 = ob.embedder->embed(mock::split_words(read_text(expl1)));
        const auto e2 = ob.embedder->embed(mock::split_words(read_text(expl2)));
        out["q_text"] = explanation_similarity(e1, e2);
      }
      if (out.empty()) throw std::invalid_argument("metrics: nothing to compute (give --image and/or two explanations)");
      std::cout << out.dump() << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    log_event("error", {{"message", e.what()}});
    return kExitError;
  }
  return kExitError;
}
