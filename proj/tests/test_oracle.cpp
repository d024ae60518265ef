#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "advx/metrics.hpp"
#include "advx/mock_oracle.hpp"
#include "advx/oracle.hpp"
#include "advx/png_io.hpp"

using namespace advx;
using nlohmann::json;

namespace {

RgbImage solid(Rgb c, int n = 64) { return RgbImage(n, n, c); }

std::string join(const WordList& w) {
  std::string s;
  for (const auto& t : w) s += (s.empty() ? "" : " ") + t;
  return s;
}

// Minimal scripted server used to exercise client retry and error mapping.
struct ScriptedServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> calls{0};

  template <class Handler>
  explicit ScriptedServer(Handler h) {
    server.Post("/predict", [this, h](const httplib::Request& req, httplib::Response& res) {
      h(++calls, req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~ScriptedServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

OracleEndpoint endpoint(const std::string& url, int retries = 2) {
  OracleEndpoint ep;
  ep.base_url = url;
  ep.timeout_seconds = 2.0;
  ep.max_retries = retries;
  return ep;
}

}  // namespace

TEST_CASE("mock rules on flat images") {
  const OracleOutput green = mock_predict(solid({0, 200, 0}));
  CHECK(join(green.activity) == "mowing the lawn");
  CHECK(join(green.explanation) == "because the grass and the shadows look calm and smooth");
  CHECK(mock_predict(solid({0, 200, 0})) == green);

  const OracleOutput gray = mock_predict(solid({128, 128, 128}));
  CHECK(mock::extract_features(solid({128, 128, 128})).dominant == -1);
  CHECK(join(gray.explanation) == "because the shadows and the shadows look calm and smooth");
  REQUIRE(gray.attention.width() == mock::kAttentionSize);
  for (double v : gray.attention.pixels()) CHECK(v == doctest::Approx(1.0 / 256));

  // Swapping channels moves the dominant hue and with it the activity.
  const OracleOutput red = mock_predict(solid({200, 0, 0}));
  CHECK(join(red.activity) == "sitting by a campfire");
  CHECK_FALSE(equal_activity(red.activity, green.activity));
  CHECK_THROWS(mock_predict(RgbImage()));
}

TEST_CASE("mock hue buckets and texture") {
  CHECK(mock::hue_bucket({255, 0, 0}) == 0);
  CHECK(mock::hue_bucket({255, 255, 0}) == 2);
  CHECK(mock::hue_bucket({0, 0, 255}) == 5);
  CHECK_FALSE(mock::hue_bucket({100, 110, 120}).has_value());

  RgbImage checker(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) checker.at(x, y) = (x + y) % 2 ? Rgb{250, 30, 30} : Rgb{30, 30, 250};
  const auto f = mock::extract_features(checker);
  CHECK(f.texture == mock::Texture::busy);
  CHECK(f.histogram[0] == f.histogram[5]);
  CHECK(f.dominant == 0);  // ties go to the lower bucket
  CHECK(f.second == 5);
  const OracleOutput out = mock_predict(checker);
  double total = 0;
  for (double v : out.attention.pixels()) total += v;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("activity comparison normalizes tokens") {
  CHECK(equal_activity({"Riding", " a  horse"}, {"riding", "a horse"}));
  CHECK_FALSE(equal_activity({"a", "b"}, {"b", "a"}));
  CHECK(normalize_token("  Two \t Words ") == "two words");
  CHECK(parse_scenario("S2") == Scenario::s2);
  CHECK_THROWS(parse_scenario("s3"));
}

TEST_CASE("query ledger") {
  QueryLedger ledger(3);
  CHECK(ledger.acquire() == 1);
  CHECK(ledger.acquire() == 2);
  CHECK(ledger.acquire() == 3);
  CHECK(ledger.exhausted());
  try {
    ledger.acquire();
    FAIL("expected budget error");
  } catch (const OracleError& e) {
    CHECK(e.kind() == OracleError::Kind::budget_exhausted);
  }
  CHECK(ledger.issued() == 3);

  QueryLedger unlimited;
  for (int i = 0; i < 1000; ++i) unlimited.acquire();
  CHECK_FALSE(unlimited.exhausted());

  MockOracle oracle;
  OracleSession session(oracle, 2);
  CHECK(session.predict(solid({1, 2, 3}, 8)).query_index == 1);
  CHECK(session.predict(solid({1, 2, 3}, 8)).query_index == 2);
  CHECK_THROWS_AS(session.predict(solid({1, 2, 3}, 8)), OracleError);
}

TEST_CASE("attention resizing renormalizes") {
  ScalarMap att(2, 2, std::vector<double>{1, 0, 0, 1});
  const ScalarMap up = attention_at_resolution(att, 8, 6);
  double total = 0;
  for (double v : up.pixels()) total += v;
  CHECK(total == doctest::Approx(1.0));
  const ScalarMap zero = attention_at_resolution(ScalarMap(3, 3, 0.0), 4, 4);
  for (double v : zero.pixels()) CHECK(v == doctest::Approx(1.0 / 16));
}

TEST_CASE("wire format round trip and schema errors") {
  const OracleOutput out = mock_predict(solid({10, 90, 200}, 20));
  CHECK(output_from_json(output_to_json(out)) == out);

  auto kind_of = [](const std::string& body) {
    try {
      output_from_json(body);
    } catch (const OracleError& e) {
      return e.kind();
    }
    return OracleError::Kind::transport;
  };
  CHECK(kind_of("not json") == OracleError::Kind::malformed);
  CHECK(kind_of(R"({"activity":["a"],"explanation":[]})") == OracleError::Kind::malformed);
  CHECK(kind_of(R"({"activity":["a"],"explanation":[],"attention_map":{"h":2,"w":2,"data":[1]}})") ==
        OracleError::Kind::malformed);
  CHECK(kind_of(R"({"activity":[],"explanation":[],"attention_map":{"h":1,"w":1,"data":[1]}})") ==
        OracleError::Kind::malformed);
  CHECK(kind_of(R"({"activity":["a"],"explanation":[],"attention_map":{"h":1,"w":1,"data":[-1]}})") ==
        OracleError::Kind::malformed);
}

TEST_CASE("golden wire fixtures") {
  const json request = json::parse(read_text(ADVX_FIXTURES "/wire/predict_request.json"));
  REQUIRE(request.size() == 1);
  const RgbImage image = decode_png_rgb(base64_decode(request.at("image_png_b64").get<std::string>()));
  CHECK(image.width() == 4);
  CHECK(image.at(0, 0) == Rgb{200, 40, 40});
  CHECK(image.at(3, 3) == Rgb{40, 60, 200});
  CHECK(predict_request_json(image) == request.dump());

  const std::string response = read_text(ADVX_FIXTURES "/wire/predict_response.json");
  CHECK(output_from_json(response) == mock_predict(image));
  const json r = json::parse(response);
  CHECK(r.at("attention_map").at("h") == mock::kAttentionSize);

  const json embed = json::parse(read_text(ADVX_FIXTURES "/wire/embed_request.json"));
  CHECK(embed.at("tokens").get<WordList>() == WordList{"a", "man", "is", "riding", "a", "horse"});
}

TEST_CASE("mock server matches the in-process mock") {
  MockServer server({"127.0.0.1", 0, 3});
  server.start();
  HttpOracle oracle(endpoint(server.base_url()));
  HttpEmbedder embedder(endpoint(server.base_url()));

  const RgbImage img = solid({220, 120, 30}, 24);
  CHECK(oracle.predict(img) == mock_predict(img));
  HashedBagOfWords local;
  const WordList words = {"a", "man", "is", "riding", "a", "horse"};
  CHECK(embedder.embed(words) == local.embed(words));

  httplib::Client raw(server.base_url());
  auto health = raw.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto bad = raw.Post("/predict", "{\"image_png_b64\": 5}", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto bad_embed = raw.Post("/embed", "[]", "application/json");
  REQUIRE(bad_embed);
  CHECK(bad_embed->status == 400);

  // Budget of 3 on the server: two more predicts succeed, the next is 429.
  oracle.predict(img);
  oracle.predict(img);
  try {
    oracle.predict(img);
    FAIL("expected 429");
  } catch (const OracleError& e) {
    CHECK(e.kind() == OracleError::Kind::budget_exhausted);
  }
  server.stop();
}

TEST_CASE("client retries server errors") {
  const std::string good = output_to_json(mock_predict(solid({5, 5, 5}, 4)));
  ScriptedServer flaky([&](int call, const httplib::Request&, httplib::Response& res) {
    if (call <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(good, "application/json");
  });
  HttpOracle oracle(endpoint(flaky.url(), 2));
  CHECK(oracle.predict(solid({5, 5, 5}, 4)) == output_from_json(good));
  CHECK(flaky.calls == 3);

  ScriptedServer down([](int, const httplib::Request&, httplib::Response& res) { res.status = 500; });
  HttpOracle one_retry(endpoint(down.url(), 1));
  try {
    one_retry.predict(solid({5, 5, 5}, 4));
    FAIL("expected transport error");
  } catch (const OracleError& e) {
    CHECK(e.kind() == OracleError::Kind::transport);
  }
  CHECK(down.calls == 2);

  ScriptedServer rejects([](int, const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("{\"error\":\"nope\"}", "application/json");
  });
  try {
    HttpOracle(endpoint(rejects.url())).predict(solid({5, 5, 5}, 4));
    FAIL("expected malformed error");
  } catch (const OracleError& e) {
    CHECK(e.kind() == OracleError::Kind::malformed);
  }
  CHECK(rejects.calls == 1);

  ScriptedServer garbage([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content("{}", "application/json");
  });
  CHECK_THROWS_AS(HttpOracle(endpoint(garbage.url())).predict(solid({5, 5, 5}, 4)), OracleError);
}

TEST_CASE("unreachable oracle is a transport error") {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpOracle oracle(endpoint("http://127.0.0.1:" + std::to_string(port), 0));
  try {
    oracle.predict(solid({5, 5, 5}, 4));
    FAIL("expected transport error");
  } catch (const OracleError& e) {
    CHECK(e.kind() == OracleError::Kind::transport);
  }
  OracleEndpoint bad = endpoint("http://x");
  bad.timeout_seconds = 0;
  CHECK_THROWS(HttpOracle{bad});
}

TEST_CASE("environment overrides the oracle url") {
  MockServer server({"127.0.0.1", 0, 0});
  server.start();
  ::unsetenv(kOracleUrlEnv);
  CHECK(effective_base_url("http://configured") == "http://configured");
  ::setenv(kOracleUrlEnv, server.base_url().c_str(), 1);
  CHECK(effective_base_url("http://configured") == server.base_url());
  HttpOracle oracle(endpoint("http://127.0.0.1:1"));
  const RgbImage img = solid({0, 0, 250}, 8);
  CHECK(oracle.predict(img) == mock_predict(img));
  ::unsetenv(kOracleUrlEnv);
}
