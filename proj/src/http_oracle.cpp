#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "advx/oracle.hpp"
#include "advx/png_io.hpp"

namespace advx {

using json = nlohmann::json;

void OracleEndpoint::validate() const {
  if (!(timeout_seconds > 0.0)) throw std::invalid_argument("oracle endpoint: timeout must be > 0");
  if (max_retries < 0) throw std::invalid_argument("oracle endpoint: retries must be >= 0");
  if (base_url.empty()) throw std::invalid_argument("oracle endpoint: empty base_url");
}

std::string effective_base_url(const std::string& configured) {
  if (const char* env = std::getenv(kOracleUrlEnv); env && *env) return env;
  return configured;
}

std::string predict_request_json(const RgbImage& image) {
  return json{{"image_png_b64", base64_encode(encode_png(image))}}.dump();
}

std::string output_to_json(const OracleOutput& output) {
  json data = json::array();
  for (double v : output.attention.pixels()) data.push_back(v);
  return json{{"activity", output.activity},
              {"explanation", output.explanation},
              {"attention_map",
               {{"h", output.attention.height()}, {"w", output.attention.width()}, {"data", data}}}}
      .dump();
}

OracleOutput output_from_json(std::string_view body) {
  auto malformed = [](const std::string& why) {
    return OracleError(OracleError::Kind::malformed, "malformed oracle response: " + why);
  };
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw malformed(e.what());
  }
  try {
    OracleOutput out;
    out.activity = j.at("activity").get<WordList>();
    out.explanation = j.at("explanation").get<WordList>();
    const json& map = j.at("attention_map");
    const int h = map.at("h").get<int>();
    const int w = map.at("w").get<int>();
    const auto data = map.at("data").get<std::vector<double>>();
    if (h <= 0 || w <= 0 || data.size() != static_cast<std::size_t>(h) * w)
      throw malformed("attention_map shape does not match data length");
    out.attention = ScalarMap(w, h, data);
    out.validate();
    return out;
  } catch (const OracleError&) {
    throw;
  } catch (const std::exception& e) {
    throw malformed(e.what());
  }
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  SplitUrl s;
  s.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) s.prefix = url.substr(path_start);
  while (!s.prefix.empty() && s.prefix.back() == '/') s.prefix.pop_back();
  return s;
}

/// POSTs one logical request, retrying transport failures and 5xx responses.
std::string post_json(const OracleEndpoint& ep, const std::string& path, const std::string& body) {
  const SplitUrl url = split_url(effective_base_url(ep.base_url));
  httplib::Client client(url.origin);
  const auto sec = static_cast<time_t>(ep.timeout_seconds);
  const auto usec = static_cast<time_t>((ep.timeout_seconds - sec) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  std::string last_error;
  for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 << (attempt - 1)));
    auto res = client.Post(url.prefix + path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    if (res->status == 429)
      throw OracleError(OracleError::Kind::budget_exhausted, "oracle rejected query: budget");
    if (res->status == 400)
      throw OracleError(OracleError::Kind::malformed, "oracle rejected request: " + res->body);
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status < 500) break;
  }
  throw OracleError(OracleError::Kind::transport,
                    "oracle " + path + " failed after retries: " + last_error);
}

}  // namespace

HttpOracle::HttpOracle(OracleEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
}

OracleOutput HttpOracle::predict(const RgbImage& image) {
  return output_from_json(post_json(endpoint_, "/predict", predict_request_json(image)));
}

HttpEmbedder::HttpEmbedder(OracleEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
}

Embedding HttpEmbedder::embed(const WordList& sentence) {
  const std::string body = post_json(endpoint_, "/embed", json{{"tokens", sentence}}.dump());
  try {
    return json::parse(body).at("vector").get<Embedding>();
  } catch (const std::exception& e) {
    throw OracleError(OracleError::Kind::malformed, std::string("malformed embed response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
  QueryLedger ledger;
  HashedBagOfWords embedder;
  explicit Impl(std::uint64_t budget) : ledger(budget) {}
};

MockServer::MockServer(Options options)
    : impl_(std::make_unique<Impl>(options.query_budget)), options_(std::move(options)) {
  auto& srv = impl_->server;
  Impl* impl = impl_.get();
  auto bad_request = [](httplib::Response& res, const std::string& why) {
    res.status = 400;
    res.set_content(json{{"error", why}}.dump(), "application/json");
  };

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"status\":\"ok\"}", "application/json");
  });

  srv.Post("/predict", [impl, bad_request](const httplib::Request& req, httplib::Response& res) {
    RgbImage image;
    try {
      const json body = json::parse(req.body);
      image = decode_png_rgb(base64_decode(body.at("image_png_b64").get<std::string>()));
      if (image.empty()) throw std::invalid_argument("empty image");
    } catch (const std::exception& e) {
      return bad_request(res, e.what());
    }
    try {
      impl->ledger.acquire();
    } catch (const OracleError& e) {
      res.status = 429;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    res.set_content(output_to_json(mock_predict(image)), "application/json");
  });

  srv.Post("/embed", [impl, bad_request](const httplib::Request& req, httplib::Response& res) {
    WordList tokens;
    try {
      tokens = json::parse(req.body).at("tokens").get<WordList>();
    } catch (const std::exception& e) {
      return bad_request(res, e.what());
    }
    res.set_content(json{{"vector", impl->embedder.embed(tokens)}}.dump(), "application/json");
  });
}

MockServer::~MockServer() { stop(); }

void MockServer::start() {
  auto& srv = impl_->server;
  if (options_.port == 0) {
    port_ = srv.bind_to_any_port(options_.host);
  } else {
    port_ = srv.bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0)
    throw IoError("mock server: cannot bind " + options_.host + ":" + std::to_string(options_.port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
}

void MockServer::run() {
  auto& srv = impl_->server;
  port_ = options_.port == 0 ? srv.bind_to_any_port(options_.host)
                             : (srv.bind_to_port(options_.host, options_.port) ? options_.port : -1);
  if (port_ <= 0)
    throw IoError("mock server: cannot bind " + options_.host + ":" + std::to_string(options_.port));
  srv.listen_after_bind();
}

void MockServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::base_url() const {
  return "http://" + options_.host + ":" + std::to_string(port_);
}

}  // namespace advx
