#include "advx/evaluation.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "advx/metrics.hpp"
#include "advx/png_io.hpp"

namespace advx {

using json = nlohmann::json;
namespace fs = std::filesystem;

double success_rate(const std::vector<ImageRecord>& records, Scenario scenario, double threshold) {
  if (records.empty()) throw std::invalid_argument("success_rate: empty record set");
  std::size_t hits = 0;
  for (const auto& r : records)
    if (omega(scenario, r.activity_changed, r.q_text, threshold)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double mean_q_image(const std::vector<ImageRecord>& records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (!r.found_feasible) continue;
    sum += r.q_image;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

// ---------------------------------------------------------------------------
// Plan serialization

void AttackPlan::validate() const {
  if (!is_cfx()) (void)FilterAttackMode::parse(attack);
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("plan: threshold must be in [0, 1]");
  if (superpixels < 0) throw std::invalid_argument("plan: superpixels must be >= 0");
  cfx.validate();
  evo.validate();
  policy.validate();
}

json AttackPlan::to_json() const {
  return json{
      {"attack", attack},
      {"scenario", std::string(to_string(scenario))},
      {"threshold", threshold},
      {"seed", seed},
      {"query_budget", query_budget},
      {"superpixels", superpixels},
      {"cfx", {{"max_trials", cfx.max_trials}, {"exhaustive", cfx.exhaustive}}},
      {"evo",
       {{"outer_population", evo.outer_population},
        {"outer_generations", evo.outer_generations},
        {"mutation_probability", evo.mutation_probability},
        {"inner_lambda", evo.inner_lambda},
        {"inner_generations", evo.inner_generations},
        {"learning_rate", evo.learning_rate},
        {"step_decay", evo.step_decay},
        {"chain_length", evo.chain_length},
        {"region_fraction", evo.region_fraction},
        {"search", evo.search == SearchStrategy::random ? "random" : "evolutionary"},
        {"exhaustive", evo.exhaustive},
        {"initial_alpha", evo.initial_alpha},
        {"initial_beta", evo.initial_beta}}},
      {"color_policy", json::parse(policy.to_json())},
  };
}

AttackPlan AttackPlan::from_json(const json& j) {
  AttackPlan p;
  try {
    p.attack = j.at("attack").get<std::string>();
    p.scenario = parse_scenario(j.at("scenario").get<std::string>());
    p.threshold = j.at("threshold").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.query_budget = j.at("query_budget").get<std::uint64_t>();
    p.superpixels = j.at("superpixels").get<int>();
    const json& c = j.at("cfx");
    p.cfx.max_trials = c.at("max_trials").get<int>();
    p.cfx.exhaustive = c.at("exhaustive").get<bool>();
    const json& e = j.at("evo");
    p.evo.outer_population = e.at("outer_population").get<int>();
    p.evo.outer_generations = e.at("outer_generations").get<int>();
    p.evo.mutation_probability = e.at("mutation_probability").get<double>();
    p.evo.inner_lambda = e.at("inner_lambda").get<int>();
    p.evo.inner_generations = e.at("inner_generations").get<int>();
    p.evo.learning_rate = e.at("learning_rate").get<double>();
    p.evo.step_decay = e.at("step_decay").get<double>();
    p.evo.chain_length = e.at("chain_length").get<int>();
    p.evo.region_fraction = e.at("region_fraction").get<double>();
    p.evo.search = e.at("search").get<std::string>() == "random" ? SearchStrategy::random
                                                                 : SearchStrategy::evolutionary;
    p.evo.exhaustive = e.at("exhaustive").get<bool>();
    p.evo.initial_alpha = e.at("initial_alpha").get<double>();
    p.evo.initial_beta = e.at("initial_beta").get<double>();
    p.policy = ColorRangePolicy::from_json(j.at("color_policy").dump());
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("attack plan: ") + ex.what());
  }
  p.validate();
  return p;
}

std::uint64_t image_seed(std::uint64_t run_seed, const std::string& image_id) {
  return derive_seed({run_seed, fnv1a64(image_id)});
}

// ---------------------------------------------------------------------------
// External scorer

struct ExternalScorer::Impl {
  pid_t pid = -1;
  FILE* to_child = nullptr;
  FILE* from_child = nullptr;
  std::mutex mutex;
};

ExternalScorer::ExternalScorer(const std::string& command) : impl_(std::make_unique<Impl>()) {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw IoError("scorer: pipe failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw IoError("scorer: pipe failed");
  }
  const pid_t pid = fork();
  if (pid < 0) throw IoError("scorer: fork failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  impl_->pid = pid;
  impl_->to_child = fdopen(in_pipe[1], "w");
  impl_->from_child = fdopen(out_pipe[0], "r");
  // A scorer that exits early must not kill us on write.
  std::signal(SIGPIPE, SIG_IGN);
}

ExternalScorer::~ExternalScorer() {
  if (impl_->to_child) fclose(impl_->to_child);
  if (impl_->from_child) fclose(impl_->from_child);
  if (impl_->pid > 0) waitpid(impl_->pid, nullptr, 0);
}

double ExternalScorer::score(const RgbImage& image) {
  const std::string request = json{{"image_png_b64", base64_encode(encode_png(image))}}.dump() + "\n";
  std::lock_guard lock(impl_->mutex);
  if (std::fputs(request.c_str(), impl_->to_child) < 0 || std::fflush(impl_->to_child) != 0)
    throw IoError("scorer: write failed");
  std::string line;
  for (int c; (c = std::fgetc(impl_->from_child)) != EOF && c != '\n';) line += static_cast<char>(c);
  if (line.empty()) throw IoError("scorer: no answer");
  try {
    return json::parse(line).at("score").get<double>();
  } catch (const json::exception& e) {
    throw IoError(std::string("scorer: bad answer: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Running attacks

ImageResult attack_item(const CorpusItem& item, const AttackPlan& plan, ExplanationOracle& oracle,
                        EmbeddingProvider& embedder) {
  ImageResult result;
  ImageRecord& rec = result.record;
  AttackOutcome& out = result.outcome;
  rec.image_id = item.id;
  const std::uint64_t seed = image_seed(plan.seed, item.id);
  const SensitivityPolicy policy = plan.is_cfx() ? SensitivityPolicy::colorization : SensitivityPolicy::filter;

  OracleSession session(oracle, plan.query_budget);
  try {
    const Partition partition = build_partition(item.image, item.semantic, item.skin, plan.superpixels, policy);
    const CleanReference clean = query_clean(session, embedder, item.image);
    if (plan.is_cfx()) {
      CfxConfig cfg = plan.cfx;
      cfg.scenario = plan.scenario;
      cfg.threshold = plan.threshold;
      cfg.seed = seed;
      out = run_cfx(clean, partition, plan.policy, cfg, session, embedder);
    } else {
      EvoConfig cfg = plan.evo;
      cfg.scenario = plan.scenario;
      cfg.threshold = plan.threshold;
      cfg.seed = seed;
      out = run_filter_attack(clean, partition, cfg, FilterAttackMode::parse(plan.attack), session, embedder);
    }
  } catch (const EmptyNonSensitive& e) {
    rec.error = e.what();
    out = AttackOutcome{};
    out.adversarial_image = item.image;
    out.q_text = unset_q_text(plan.scenario);
    out.queries_used = session.ledger().issued();
  }
  rec.success = out.success;
  rec.activity_changed = out.activity_changed;
  rec.found_feasible = out.found_feasible;
  rec.q_text = out.q_text;
  rec.q_image = out.q_image;
  rec.colorfulness_clean = colorfulness(item.image);
  rec.colorfulness_adv = colorfulness(out.adversarial_image);
  rec.queries = out.queries_used;
  return result;
}

namespace {

json record_to_json(const ImageRecord& r) {
  json j{{"image_id", r.image_id},
         {"success", r.success},
         {"activity_changed", r.activity_changed},
         {"found_feasible", r.found_feasible},
         {"q_text", r.q_text},
         {"q_image", r.q_image},
         {"colorfulness_clean", r.colorfulness_clean},
         {"colorfulness_adv", r.colorfulness_adv},
         {"queries", r.queries}};
  if (r.quality_score) j["quality_score"] = *r.quality_score;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

ImageRecord record_from_json(const json& j) {
  ImageRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.activity_changed = j.at("activity_changed").get<bool>();
  r.found_feasible = j.at("found_feasible").get<bool>();
  r.q_text = j.at("q_text").get<double>();
  r.q_image = j.at("q_image").get<double>();
  r.colorfulness_clean = j.at("colorfulness_clean").get<double>();
  r.colorfulness_adv = j.at("colorfulness_adv").get<double>();
  r.queries = j.at("queries").get<std::uint64_t>();
  if (j.contains("quality_score")) r.quality_score = j["quality_score"].get<double>();
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  return r;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string RunManifest::to_json() const {
  std::vector<ImageRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  json rows = json::array();
  for (const auto& r : sorted) rows.push_back(record_to_json(r));
  return json{{"attack", attack}, {"scenario", std::string(advx::to_string(scenario))}, {"config", config},
              {"records", rows}}
             .dump(2) +
         "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.attack = j.at("attack").get<std::string>();
    m.scenario = parse_scenario(j.at("scenario").get<std::string>());
    m.config = j.at("config");
    for (const auto& r : j.at("records")) m.records.push_back(record_from_json(r));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest: ") + e.what());
  }
  if (m.records.empty()) throw std::invalid_argument("manifest: no records");
  return m;
}

RunManifest run_corpus(const std::vector<CorpusItem>& items, const AttackPlan& plan, ExplanationOracle& oracle,
                       EmbeddingProvider& embedder, const RunOptions& options) {
  plan.validate();
  const std::string started = utc_now();
  std::vector<ImageRecord> records(items.size());
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        ImageResult res = attack_item(items[i], plan, oracle, embedder);
        if (options.scorer) res.record.quality_score = options.scorer->score(res.outcome.adversarial_image);
        if (options.output_dir) {
          const fs::path dir = *options.output_dir;
          write_png(dir / "images" / (items[i].id + ".clean.png"), items[i].image);
          write_png(dir / "images" / (items[i].id + ".adv.png"), res.outcome.adversarial_image);
          write_text(dir / "records" / (items[i].id + ".json"), record_to_json(res.record).dump(2) + "\n");
        }
        std::lock_guard lock(mutex);
        records[i] = res.record;
        if (options.on_result) options.on_result(res);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next.store(items.size());
        return;
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  RunManifest m;
  m.attack = plan.attack;
  m.scenario = plan.scenario;
  m.config = plan.to_json();
  m.records = std::move(records);
  std::sort(m.records.begin(), m.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  if (options.output_dir) {
    write_text(*options.output_dir / "manifest.json", m.to_json());
    write_text(*options.output_dir / "timing.json",
               json{{"started", started}, {"finished", utc_now()}, {"jobs", jobs}}.dump(2) + "\n");
  }
  return m;
}

RunManifest replay(const RunManifest& manifest, const std::vector<CorpusItem>& items, ExplanationOracle& oracle,
                   EmbeddingProvider& embedder, int jobs) {
  RunOptions options;
  options.jobs = jobs;
  return run_corpus(items, AttackPlan::from_json(manifest.config), oracle, embedder, options);
}

// ---------------------------------------------------------------------------
// Reports

Distribution describe(const std::vector<double>& values, double lo, double hi) {
  Distribution d;
  d.count = values.size();
  d.lo = lo;
  d.hi = hi;
  if (values.empty()) return d;
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - d.mean) * (v - d.mean);
  d.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  for (double v : values) {
    int bin = 0;
    if (hi > lo) bin = static_cast<int>(std::floor((v - lo) / (hi - lo) * kHistogramBins));
    ++d.histogram[static_cast<std::size_t>(std::clamp(bin, 0, kHistogramBins - 1))];
  }
  return d;
}

DistributionReport distribution_report(const std::vector<ImageRecord>& records) {
  std::vector<double> ssim_v, cc, ca, qt;
  for (const auto& r : records) {
    ssim_v.push_back(r.q_image);
    cc.push_back(r.colorfulness_clean);
    ca.push_back(r.colorfulness_adv);
    qt.push_back(r.q_text);
  }
  double cmax = 0.0;
  for (double v : cc) cmax = std::max(cmax, v);
  for (double v : ca) cmax = std::max(cmax, v);
  if (cmax <= 0.0) cmax = 1.0;
  return {describe(ssim_v, -1.0, 1.0), describe(cc, 0.0, cmax), describe(ca, 0.0, cmax), describe(qt, 0.0, 1.0)};
}

namespace {

json distribution_json(const Distribution& d) {
  return json{{"count", d.count}, {"mean", d.mean},  {"stddev", d.stddev},
              {"lo", d.lo},       {"hi", d.hi},      {"histogram", d.histogram}};
}

}  // namespace

json DistributionReport::to_json() const {
  return json{{"ssim", distribution_json(ssim)},
              {"colorfulness_clean", distribution_json(colorfulness_clean)},
              {"colorfulness_adv", distribution_json(colorfulness_adv)},
              {"q_text", distribution_json(q_text)}};
}

std::string DistributionReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "metric,bin,bin_lo,bin_hi,count,mean,stddev\n";
  const std::pair<const char*, const Distribution*> rows[] = {{"ssim", &ssim},
                                                               {"colorfulness_clean", &colorfulness_clean},
                                                               {"colorfulness_adv", &colorfulness_adv},
                                                               {"q_text", &q_text}};
  for (const auto& [name, d] : rows) {
    const double width = (d->hi - d->lo) / kHistogramBins;
    for (int b = 0; b < kHistogramBins; ++b)
      out << name << ',' << b << ',' << d->lo + b * width << ',' << d->lo + (b + 1) * width << ','
          << d->histogram[static_cast<std::size_t>(b)] << ',' << d->mean << ',' << d->stddev << '\n';
  }
  return out.str();
}

std::vector<AblationRow> ablation_matrix(const std::vector<CorpusItem>& items, const AttackPlan& base,
                                         const std::vector<std::string>& modes, ExplanationOracle& oracle,
                                         EmbeddingProvider& embedder, int jobs,
                                         const std::function<void(const ImageResult&)>& on_result) {
  std::vector<AblationRow> rows;
  for (const auto& mode : modes) {
    AttackPlan plan = base;
    plan.attack = FilterAttackMode::parse(mode).name();
    RunOptions options;
    options.jobs = jobs;
    options.on_result = on_result;
    const RunManifest m = run_corpus(items, plan, oracle, embedder, options);
    rows.push_back({mode, success_rate(m.records, plan.scenario, plan.threshold), mean_q_image(m.records),
                    m.records.size()});
  }
  return rows;
}

json ablation_to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json mean = std::isnan(r.mean_ssim) ? json(nullptr) : json(r.mean_ssim);
    out.push_back({{"mode", r.mode}, {"success_rate", r.success_rate}, {"mean_ssim", mean}, {"images", r.images}});
  }
  return out;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "mode,success_rate,mean_ssim,images\n";
  for (const auto& r : rows) out << r.mode << ',' << r.success_rate << ',' << r.mean_ssim << ',' << r.images << '\n';
  return out.str();
}

}  // namespace advx
