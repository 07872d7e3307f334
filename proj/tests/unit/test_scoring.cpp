#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "common/error.hpp"
#include "common/io.hpp"
#include "corpus/corpus.hpp"
#include "scoring/backend.hpp"
#include "scoring/cache.hpp"
#include "scoring/perplexity.hpp"
#include "scoring/score_corpus.hpp"
#include "scoring/scored_sentence.hpp"

using namespace gbias;
using namespace gbias::scoring;
namespace fs = std::filesystem;

namespace {

corpus::Sentence sentence(const std::string& name, const std::string& eth, corpus::Gender g, const std::string& desc,
                          int tmpl = 0) {
  corpus::Template t{tmpl, tmpl == 0 ? "{name} is {descriptor}." : "I think {name} is {descriptor}."};
  corpus::Sentence s;
  s.name = {name, eth, g};
  s.descriptor = desc;
  s.template_id = tmpl;
  s.text = corpus::realize(t, name, desc);
  s.id = corpus::sentence_id(s.name, desc, tmpl);
  return s;
}

std::vector<corpus::Sentence> small_corpus() {
  std::vector<corpus::Sentence> out;
  for (const char* n : {"Mei", "Ling", "Omar", "Karim"})
    for (const char* d : {"kind", "tall", "good at math"})
      for (int t : {0, 1})
        out.push_back(sentence(n, n[0] == 'M' || n[0] == 'L' ? "Chinese" : "Arab",
                               n[0] == 'M' || n[0] == 'L' ? corpus::Gender::F : corpus::Gender::M, d, t));
  return out;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Serves `handler` on an ephemeral localhost port for the lifetime of the object.
struct FakeServer {
  httplib::Server svr;
  std::thread thread;
  int port = 0;
  explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    svr.Post("/v1/completions", handler);
    svr.Post("/v1/chat/completions", handler);
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~FakeServer() {
    svr.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/completions"; }
};

}  // namespace

TEST_CASE("perplexity is exp of the negative mean logprob") {
  std::vector<double> lp = {std::log(0.5), std::log(0.25), std::log(0.125)};
  // geometric mean probability 1/4
  CHECK(ppl_from_logprobs(lp) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(pseudo_ppl_from_masked_logprobs(lp) == doctest::Approx(4.0).epsilon(1e-12));
  std::vector<double> certain = {0.0, 0.0};
  CHECK(ppl_from_logprobs(certain) == 1.0);
}

TEST_CASE("perplexity rejects impossible logprobs") {
  std::vector<double> empty;
  CHECK_THROWS_AS(ppl_from_logprobs(empty), Error);
  std::vector<double> positive = {-1.0, 0.1};
  CHECK_THROWS_AS(ppl_from_logprobs(positive), Error);
  std::vector<double> nan = {-1.0, NAN};
  CHECK_THROWS_AS(pseudo_ppl_from_masked_logprobs(nan), Error);
}

TEST_CASE("perplexity property: PPL >= 1 and uniform logprob c gives exp(-c)") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> lp(1 + rng() % 20);
    for (auto& v : lp) v = -static_cast<double>(rng() % 1000) / 100.0;
    CHECK(ppl_from_logprobs(lp) >= 1.0);
    double c = lp[0];
    std::vector<double> same(lp.size(), c);
    CHECK(ppl_from_logprobs(same) == doctest::Approx(std::exp(-c)).epsilon(1e-12));
  }
}

TEST_CASE("scored sentences round trip through the dump format") {
  auto s = make_scored("abc", "toy", Mode::Masked, {"he", "llo"}, {-0.5, -1.5});
  CHECK(s.ppl == doctest::Approx(std::exp(1.0)));
  auto j = to_json(s);
  CHECK(j.begin().key() == "sentence_id");
  CHECK(scored_from_json(nlohmann::json::parse(j.dump())) == s);
  auto no_ppl = nlohmann::json::parse(j.dump());
  no_ppl.erase("ppl");
  CHECK(scored_from_json(no_ppl) == s);
  auto wrong = nlohmann::json::parse(j.dump());
  wrong["ppl"] = 3.0;
  CHECK_THROWS_AS(scored_from_json(wrong), Error);
  CHECK_THROWS_AS(make_scored("x", "toy", Mode::Causal, {"a"}, {-1.0, -2.0}), Error);
}

TEST_CASE("mock backend is deterministic and honours planted shifts and group factors") {
  BackendDescriptor d;
  d.name = d.model_id = "mock";
  d.seed = 7;
  auto s = sentence("Mei", "Chinese", corpus::Gender::F, "good at math");
  MockBackend plain(d);
  auto a = plain.score(s), b = plain.score(s);
  CHECK(a.logprobs == b.logprobs);
  CHECK(a.tokens.size() == 5);
  for (double v : a.logprobs) {
    CHECK(v <= -1.0);
    CHECK(v >= -1.5);
  }
  CHECK(plain.calls() == 2);

  auto planted = d;
  planted.planted = {{"Chinese Female", "good at math", 0.5}};
  MockBackend p(planted);
  auto c = p.score(s);
  for (std::size_t i = 0; i < c.logprobs.size(); ++i) CHECK(c.logprobs[i] == doctest::Approx(a.logprobs[i] + 0.5));
  // other cells untouched
  auto other = sentence("Mei", "Chinese", corpus::Gender::F, "kind");
  CHECK(p.score(other).logprobs == plain.score(other).logprobs);

  auto factor = d;
  factor.group_ppl_factor = {{"Chinese Female", 2.0}};
  MockBackend f(factor);
  double base = ppl_from_logprobs(a.logprobs);
  CHECK(ppl_from_logprobs(f.score(s).logprobs) == doctest::Approx(2.0 * base).epsilon(1e-12));

  auto other_seed = d;
  other_seed.seed = 8;
  CHECK(MockBackend(other_seed).score(s).logprobs != a.logprobs);
}

TEST_CASE("backend descriptors validate") {
  CHECK_THROWS_AS(backend_from_json("x", {{"kind", "carrier-pigeon"}}), Error);
  CHECK_THROWS_AS(validate(backend_from_json("x", {{"kind", "http_completions"}})), Error);
  CHECK_THROWS_AS(validate(backend_from_json("x", {{"kind", "dump_file"}})), Error);
  auto m = backend_from_json("m", {{"kind", "mock"}, {"planted", {{{"group", "Thai Male"}, {"descriptor", "kind"}, {"logprob_shift", 1.0}}}}});
  CHECK(m.model_id == "m");
  REQUIRE(m.planted.size() == 1);
  CHECK(m.planted[0].group == "Thai Male");
}

TEST_CASE("score cache persists and answers lookups after reload") {
  auto dir = fresh_dir("gb_test_scoring_cache");
  auto path = (dir / "c.jsonl").string();
  auto sc = make_scored("id1", "toy", Mode::Causal, {"a", "b"}, {-1.0, -2.0});
  {
    ScoreCache cache(path);
    CHECK_FALSE(cache.lookup("toy", Mode::Causal, "a b"));
    std::vector<ScoreCache::Entry> e = {{"a b", sc}};
    cache.insert(e);
    CHECK(cache.size() == 1);
  }
  ScoreCache reloaded(path);
  CHECK(reloaded.size() == 1);
  auto hit = reloaded.lookup("toy", Mode::Causal, "a b");
  REQUIRE(hit);
  CHECK(hit->token_logprobs == sc.token_logprobs);
  CHECK_FALSE(reloaded.lookup("toy", Mode::Masked, "a b"));
  CHECK_FALSE(reloaded.lookup("other", Mode::Causal, "a b"));
  CHECK(cache_key("toy", Mode::Causal, "a b") != cache_key("toy", Mode::Causal, "a  b"));
  fs::remove_all(dir);
}

TEST_CASE("score_corpus: cached rerun makes zero backend calls and yields identical outcomes") {
  auto dir = fresh_dir("gb_test_scoring_rerun");
  auto path = (dir / "c.jsonl").string();
  BackendDescriptor d;
  d.name = d.model_id = "mock";
  auto corpus = small_corpus();
  ScoreOptions opt{3, 0, 1};

  MockBackend first(d);
  ScoreCache cache(path);
  ScoreStats st;
  auto out1 = score_corpus(first, corpus, cache, opt, &st);
  CHECK(st.scored == corpus.size());
  CHECK(first.calls() == corpus.size());
  auto bytes1 = read_text_file(path);

  MockBackend second(d);
  ScoreCache again(path);
  ScoreStats st2;
  auto out2 = score_corpus(second, corpus, again, opt, &st2);
  CHECK(second.calls() == 0);
  CHECK(st2.cached == corpus.size());
  REQUIRE(out1.size() == out2.size());
  for (std::size_t i = 0; i < out1.size(); ++i) {
    CHECK(out1[i].sentence_id == corpus[i].id);
    CHECK(out1[i].scored == out2[i].scored);
  }
  CHECK(read_text_file(path) == bytes1);

  // the cache file is independent of the concurrency level
  auto path1 = (dir / "serial.jsonl").string();
  MockBackend serial(d);
  ScoreCache c1(path1);
  score_corpus(serial, corpus, c1, ScoreOptions{1, 0, 1});
  CHECK(read_text_file(path1) == bytes1);
  fs::remove_all(dir);
}

TEST_CASE("dump backend serves records and keeps headers") {
  auto dir = fresh_dir("gb_test_scoring_dump");
  auto s = sentence("Mei", "Chinese", corpus::Gender::F, "kind");
  auto rec = make_scored(s.id, "toy-causal", Mode::Causal, {"Mei", "is", "kind."}, {-3.0, -1.0, -2.0});
  std::string content = R"({"header":{"mode":"causal","first_token":"bos_conditioned"}})" "\n" + to_json(rec).dump() + "\n";
  write_file_atomic(dir / "dump.jsonl", content);
  BackendDescriptor d;
  d.name = "dump";
  d.kind = BackendKind::DumpFile;
  d.path = (dir / "dump.jsonl").string();
  DumpBackend b(d);
  CHECK(b.model_id() == "toy-causal");
  CHECK(b.headers().size() == 1);
  CHECK(b.size() == 1);
  CHECK(b.score(s).logprobs == rec.token_logprobs);
  auto missing = sentence("Omar", "Arab", corpus::Gender::M, "kind");
  try {
    b.score(missing);
    FAIL("expected a backend error");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.retryable());
  }
  fs::remove_all(dir);
}

TEST_CASE("http completions backend parses echoed logprobs and retries transient failures") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    if (hits.fetch_add(1) == 0) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    CHECK(body["echo"] == true);
    CHECK(body["max_tokens"] == 0);
    CHECK(req.get_header_value("Authorization") == "Bearer s3cret");
    nlohmann::json lp = {{"tokens", {"Mei", " is", " kind", "."}}, {"token_logprobs", {nullptr, -1.0, -2.0, -0.5}}};
    res.set_content(nlohmann::json{{"choices", {{{"text", body["prompt"]}, {"logprobs", lp}}}}}.dump(),
                    "application/json");
  });
  ::setenv("GB_TEST_TOKEN", "s3cret", 1);
  BackendDescriptor d;
  d.name = "http";
  d.kind = BackendKind::HttpCompletions;
  d.endpoint = server.url();
  d.model_id = "toy";
  d.auth_env = "GB_TEST_TOKEN";
  HttpCompletionsBackend b(d);
  std::vector<corpus::Sentence> one = {sentence("Mei", "Chinese", corpus::Gender::F, "kind")};
  ScoreCache cache;
  ScoreStats st;
  auto out = score_corpus(b, one, cache, ScoreOptions{1, 3, 1}, &st);
  REQUIRE(out[0].scored);
  CHECK(out[0].scored->tokens == std::vector<std::string>{" is", " kind", "."});
  CHECK(out[0].scored->ppl == doctest::Approx(std::exp(3.5 / 3)));
  CHECK(hits == 2);
  CHECK(st.failed == 0);
}

TEST_CASE("http refusals are not retried and mark the sentence failed") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
    res.set_content(R"({"error":"echo not supported"})", "application/json");
  });
  BackendDescriptor d;
  d.name = "http";
  d.kind = BackendKind::HttpCompletions;
  d.endpoint = server.url();
  d.model_id = "toy";
  HttpCompletionsBackend b(d);
  std::vector<corpus::Sentence> one = {sentence("Omar", "Arab", corpus::Gender::M, "kind")};
  ScoreCache cache;
  ScoreStats st;
  auto out = score_corpus(b, one, cache, ScoreOptions{1, 3, 1}, &st);
  CHECK_FALSE(out[0].scored);
  CHECK(out[0].error.find("400") != std::string::npos);
  CHECK(hits == 1);
  CHECK(st.failed == 1);
  CHECK(cache.size() == 0);
}

TEST_CASE("responses without logprobs are rejected") {
  CHECK_THROWS_AS(HttpCompletionsBackend::parse_response(nlohmann::json{{"choices", {{{"text", "x"}}}}}), BackendError);
  CHECK_THROWS_AS(HttpCompletionsBackend::parse_response(
                      nlohmann::json{{"choices", {{{"logprobs", {{"tokens", {"a"}}, {"token_logprobs", {nullptr}}}}}}}}),
                  BackendError);
}
