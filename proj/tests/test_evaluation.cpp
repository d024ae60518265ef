#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <unistd.h>

#include "advx/evaluation.hpp"
#include "advx/png_io.hpp"

using namespace advx;
namespace fs = std::filesystem;

namespace {

ImageRecord rec(std::string id, bool changed, double q) {
  ImageRecord r;
  r.image_id = std::move(id);
  r.activity_changed = changed;
  r.found_feasible = true;
  r.q_text = q;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("advx-eval-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

AttackPlan quick_plan(const std::string& attack, Scenario s) {
  AttackPlan plan;
  plan.attack = attack;
  plan.scenario = s;
  plan.seed = 3;
  plan.query_budget = 40;
  plan.cfx.max_trials = 39;
  plan.evo.outer_population = 3;
  plan.evo.outer_generations = 2;
  plan.evo.inner_lambda = 2;
  plan.evo.inner_generations = 2;
  return plan;
}

}  // namespace

TEST_CASE("success rate examples") {
  std::vector<ImageRecord> rs;
  for (int i = 0; i < 10; ++i) rs.push_back(rec("r" + std::to_string(i), true, i < 6 ? 0.9 : 0.5));
  CHECK(success_rate(rs, Scenario::s1) == doctest::Approx(0.6));

  // The threshold itself counts as similar.
  CHECK(success_rate({rec("a", true, 0.85)}, Scenario::s1, 0.85) == 1.0);
  CHECK(success_rate({rec("a", false, 0.85)}, Scenario::s2, 0.85) == 0.0);
  CHECK(success_rate({rec("a", false, 0.8499)}, Scenario::s2, 0.85) == 1.0);
  CHECK(success_rate({rec("a", false, 0.99)}, Scenario::s1, 0.85) == 0.0);
  CHECK(success_rate({rec("a", true, 0.1)}, Scenario::s2, 0.85) == 0.0);
  CHECK_THROWS_AS(success_rate({}, Scenario::s1), std::invalid_argument);
}

TEST_CASE("success rate matches a direct count") {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    std::vector<ImageRecord> rs;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) rs.push_back(rec("x", rng.bernoulli(0.5), rng.below(21) / 20.0));
    const double thr = rng.below(21) / 20.0;
    for (Scenario s : {Scenario::s1, Scenario::s2}) {
      std::size_t hits = 0;
      for (const auto& r : rs) {
        const bool ok = s == Scenario::s1 ? (r.activity_changed && r.q_text >= thr)
                                          : (!r.activity_changed && r.q_text < thr);
        hits += ok;
      }
      const double rate = success_rate(rs, s, thr);
      REQUIRE(rate == static_cast<double>(hits) / n);
      REQUIRE(rate >= 0.0);
      REQUIRE(rate <= 1.0);
    }
  }
}

TEST_CASE("distributions") {
  const Distribution d = describe({-1.0, 0.0, 0.5, 1.0, 2.0}, -1.0, 1.0);
  std::size_t total = 0;
  for (auto c : d.histogram) total += c;
  CHECK(total == 5);
  CHECK(d.histogram.front() == 1);
  CHECK(d.histogram.back() == 2);  // 1.0 and the clamped 2.0
  CHECK(d.mean == doctest::Approx(0.5));

  const Distribution one = describe({0.3}, 0.0, 1.0);
  CHECK(one.count == 1);
  CHECK(one.stddev == 0.0);
  CHECK(describe({}, 0.0, 1.0).count == 0);

  ImageRecord r = rec("a", true, 0.9);
  r.colorfulness_clean = r.colorfulness_adv = 12.0;
  r.q_image = 1.0;
  const DistributionReport rep = distribution_report({r, r, r});
  CHECK(rep.colorfulness_clean.histogram == rep.colorfulness_adv.histogram);
  CHECK(rep.ssim.histogram.back() == 3);
  CHECK(rep.to_json().at("q_text").at("count") == 3);
  const std::string csv = rep.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * kHistogramBins);
}

TEST_CASE("plan json round trip") {
  AttackPlan p = quick_plan("lc-m", Scenario::s2);
  p.evo.search = SearchStrategy::random;
  p.superpixels = 4;
  const AttackPlan q = AttackPlan::from_json(p.to_json());
  CHECK(q.to_json() == p.to_json());
  CHECK(q.evo.search == SearchStrategy::random);
  nlohmann::json bad = p.to_json();
  bad["attack"] = "nope";
  CHECK_THROWS(AttackPlan::from_json(bad));
  bad = p.to_json();
  bad.erase("seed");
  CHECK_THROWS(AttackPlan::from_json(bad));
}

TEST_CASE("manifest json round trip") {
  RunManifest m;
  m.attack = "fl-s";
  m.scenario = Scenario::s2;
  m.config = quick_plan("fl-s", Scenario::s2).to_json();
  ImageRecord a = rec("b", false, 0.25), b = rec("a", true, 0.75);
  a.quality_score = 0.5;
  b.error = "boom";
  m.records = {a, b};
  const RunManifest back = RunManifest::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0] == b);  // sorted by id
  CHECK(back.records[1] == a);
  CHECK_THROWS(RunManifest::from_json(R"({"attack":"cfx","scenario":"s1","config":{},"records":[]})"));
  CHECK_THROWS(RunManifest::from_json("{"));
}

TEST_CASE("image seeds depend on the id only") {
  CHECK(image_seed(1, "a") == image_seed(1, "a"));
  CHECK(image_seed(1, "a") != image_seed(1, "b"));
  CHECK(image_seed(1, "a") != image_seed(2, "a"));
}

TEST_CASE("corpus files round trip") {
  TempDir dir;
  const auto items = synthetic_corpus(3, 11);
  save_corpus(dir.path, items);
  const auto back = load_corpus(dir.path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == items[i].id);
    CHECK(back[i].image == items[i].image);
    CHECK(back[i].semantic.labels == items[i].semantic.labels);
    CHECK(back[i].semantic.class_names == items[i].semantic.class_names);
    REQUIRE(back[i].skin.has_value());
    CHECK(*back[i].skin == *items[i].skin);
  }
  CHECK(synthetic_item(11, 1).image == items[1].image);
  CHECK(synthetic_item(12, 1).image != items[1].image);
  CHECK_THROWS(load_item(dir.path / "missing.png"));
}

TEST_CASE("runs replay bit for bit and ignore the worker count") {
  MockOracle oracle;
  HashedBagOfWords emb;
  const auto items = load_corpus(ADVX_FIXTURES "/corpus");
  for (const char* attack : {"cfx", "fl-s", "lc-m"}) {
    const AttackPlan plan = quick_plan(attack, std::string(attack) == "cfx" ? Scenario::s1 : Scenario::s2);
    RunOptions one, two;
    two.jobs = 2;
    const RunManifest a = run_corpus(items, plan, oracle, emb, one);
    const RunManifest b = run_corpus(items, plan, oracle, emb, two);
    CHECK(a.to_json() == b.to_json());
    CHECK(replay(a, items, oracle, emb).to_json() == a.to_json());
    for (const auto& r : a.records) {
      CHECK(r.queries <= plan.query_budget);
      CHECK(r.success == omega(plan.scenario, r.activity_changed, r.q_text, plan.threshold));
    }
  }
}

TEST_CASE("run outputs on disk") {
  TempDir dir;
  MockOracle oracle;
  HashedBagOfWords emb;
  const auto items = synthetic_corpus(2, 7);
  RunOptions opts;
  opts.output_dir = dir.path;
  int seen = 0;
  opts.on_result = [&](const ImageResult&) { ++seen; };
  const RunManifest m = run_corpus(items, quick_plan("fl-s", Scenario::s2), oracle, emb, opts);
  CHECK(seen == 2);
  CHECK(read_text(dir.path / "manifest.json") == m.to_json());
  CHECK(fs::exists(dir.path / "timing.json"));
  for (const auto& item : items) {
    CHECK(read_png_rgb(dir.path / "images" / (item.id + ".clean.png")) == item.image);
    CHECK(fs::exists(dir.path / "images" / (item.id + ".adv.png")));
    CHECK(fs::exists(dir.path / "records" / (item.id + ".json")));
  }
}

TEST_CASE("unattackable images are recorded, not fatal") {
  CorpusItem item = synthetic_item(7, 0);
  item.id = "all-skin";
  item.skin = GrayImage(item.image.width(), item.image.height(), 1);
  MockOracle oracle;
  HashedBagOfWords emb;
  const ImageResult r = attack_item(item, quick_plan("fl-s", Scenario::s1), oracle, emb);
  CHECK_FALSE(r.record.error.empty());
  CHECK_FALSE(r.record.success);
  CHECK(r.outcome.adversarial_image == item.image);
}

TEST_CASE("external scorer") {
  TempDir dir;
  const fs::path script = dir.path / "scorer.sh";
  // Answers with the byte length of each request line.
  write_text(script, "while IFS= read -r line; do printf '{\"score\": %d}\\n' ${#line}; done\n");
  ExternalScorer scorer("sh " + script.string());
  const RgbImage img(4, 4, Rgb{1, 2, 3});
  const std::string line = nlohmann::json{{"image_png_b64", base64_encode(encode_png(img))}}.dump();
  CHECK(scorer.score(img) == static_cast<double>(line.size()));
  CHECK(scorer.score(img) == static_cast<double>(line.size()));

  ExternalScorer liar("while read -r line; do echo nope; done");
  CHECK_THROWS_AS(liar.score(img), IoError);
  ExternalScorer quitter("exit 0");
  CHECK_THROWS_AS(quitter.score(img), IoError);

  MockOracle oracle;
  HashedBagOfWords emb;
  RunOptions opts;
  opts.scorer = &scorer;
  const RunManifest m = run_corpus(synthetic_corpus(1, 7), quick_plan("fl-s", Scenario::s2), oracle, emb, opts);
  CHECK(m.records.front().quality_score.has_value());
}

TEST_CASE("ablation rows") {
  MockOracle oracle;
  HashedBagOfWords emb;
  const auto items = synthetic_corpus(3, 7);
  AttackPlan base = quick_plan("fl-s", Scenario::s1);
  base.evo.search = SearchStrategy::random;
  const auto rows = ablation_matrix(items, base, {"fl-none", "lc-both"}, oracle, emb);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].mode == "fl-none");
  CHECK(rows[1].mode == "lc-both");
  for (const auto& r : rows) {
    CHECK(r.images == 3);
    CHECK(r.success_rate >= 0.0);
    CHECK(r.success_rate <= 1.0);
  }
  const auto j = ablation_to_json(rows);
  CHECK(j.size() == 2);
  const std::string csv = ablation_to_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK_THROWS(ablation_matrix(items, base, {"cfx"}, oracle, emb));

  CHECK(std::isnan(mean_q_image({})));
  ImageRecord a = rec("a", true, 1), b = rec("b", true, 1);
  a.q_image = 0.5;
  b.q_image = 0.9;
  b.found_feasible = false;
  CHECK(mean_q_image({a, b}) == 0.5);
}
