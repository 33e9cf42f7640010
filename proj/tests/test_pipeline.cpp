#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "vtstyle/error.hpp"
#include "vtstyle/pipeline.hpp"

using namespace vts;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kMockDir = fs::path(VTS_CONFIG_DIR) / "mock";

struct Interrupted : std::runtime_error {
  Interrupted() : std::runtime_error("interrupted") {}
};

// Lets `budget` queries through, then throws something the protocol does not absorb.
class Budgeted final : public ChatClient {
 public:
  Budgeted(std::shared_ptr<ChatClient> inner, std::shared_ptr<std::size_t> budget)
      : inner_(std::move(inner)), budget_(std::move(budget)) {}
  std::string query(const ChatRequest& r, const QueryCell& c) override {
    if (*budget_ == 0) throw Interrupted();
    --*budget_;
    return inner_->query(r, c);
  }
  std::string timestamp(const QueryCell& c) override { return inner_->timestamp(c); }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::shared_ptr<std::size_t> budget_;
};

RunConfig serial_config() { return apply_overrides(testing::test_config(), Overrides{.concurrency = 1u}); }

json read_json(const fs::path& p) { return json::parse(testing::slurp(p)); }

}  // namespace

TEST_CASE("command line overrides") {
  const RunConfig base = testing::test_config();
  Overrides o;
  o.seed = 99;
  o.tau = 0;
  o.top_n = 5;
  o.models = std::vector<std::string>{"mock-b"};
  o.concurrency = 3u;
  const RunConfig c = apply_overrides(base, o);
  CHECK(c.seed == 99);
  CHECK(c.analysis.tau == 0);
  CHECK(c.analysis.top_n == 5);
  REQUIRE(c.models.size() == 1);
  CHECK(c.models[0].id == "mock-b");
  CHECK(c.models[0].max_parallel == 3);
  CHECK(c.gate_models() == std::vector<std::string>{"mock-b"});
  CHECK(apply_overrides(base, {}) == base);

  CHECK_THROWS_AS(apply_overrides(base, Overrides{.models = std::vector<std::string>{"nobody"}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(base, Overrides{.concurrency = 0u}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(base, Overrides{.top_n = 0}), ConfigError);

  const RunConfig reordered = apply_overrides(base, Overrides{.models = std::vector<std::string>{"mock-b", "mock-a"}});
  CHECK(reordered.models[0].id == "mock-b");
}

TEST_CASE("client factories refuse what they cannot serve") {
  ModelEndpoint e;
  e.id = "offline";
  CHECK_THROWS_AS(live_client_factory()(e), ConfigError);
  CHECK_THROWS_AS(mock_client_factory("/no/such/fixture.json")(e), ConfigError);
  CHECK(mock_client_factory(kMockDir / "null.json")(e) != nullptr);
}

TEST_CASE("phases need their inputs") {
  testing::TempDir dir("phases");
  Pipeline p(testing::test_config(), dir.path(), mock_client_factory(kMockDir / "null.json"));
  try {
    p.identify();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run 'render' first") != std::string::npos);
  }
  CHECK_THROWS_AS(p.filter(), ConfigError);
  CHECK_THROWS_AS(p.collect(), ConfigError);
  CHECK_THROWS_AS(p.extract(), ConfigError);
  CHECK_THROWS_AS(p.analyze(), ConfigError);
  CHECK_THROWS_AS(p.report(), ConfigError);
  CHECK(p.summary().empty());
}

TEST_CASE("null model shows no style effect") {
  if (!testing::kHaveTestFonts) return;
  testing::TempDir dir("null");
  Pipeline p(testing::test_config(), dir.path(), mock_client_factory(kMockDir / "null.json"));
  const std::string summary = p.run_all();
  CHECK(summary.find("concepts: 2 original, 2 retained, 0 eliminated") != std::string::npos);
  CHECK(summary.find("functional=1.0000") != std::string::npos);
  const json comparisons = read_json(p.layout().comparisons());
  REQUIRE(comparisons.size() == 4);
  for (const auto& c : comparisons) {
    CHECK(c["tv"].get<double>() == 0.0);
    CHECK(c["p_value"].get<double>() == doctest::Approx(1.0));
    CHECK(c["n_functional"] == c["n_decorative"]);
  }
  const json wa = read_json(p.layout().within_across());
  for (const auto& [model, w] : wa["per_model"].items()) {
    CHECK(w["across"].get<double>() == 0.0);
    CHECK(w["within_functional"].get<double>() == 0.0);
  }
  for (const char* f : {"concepts.csv", "tv_mock_a.svg", "tv_mock_b.svg", "within_across.svg", "top_n.json",
                        "run_manifest.json"}) {
    CHECK(fs::exists(p.layout().report_dir() / f));
  }
  const json manifest = read_json(p.layout().report_dir() / "run_manifest.json");
  CHECK(manifest["cells"]["identify"] == 320);
  CHECK(manifest["cells"]["attributes"] == 2 * 2 * 2 * 900);
  CHECK(manifest["concepts"]["original"] == 2);
}

TEST_CASE("scripted shift is detected") {
  if (!testing::kHaveTestFonts) return;
  testing::TempDir dir("shift");
  Pipeline p(testing::test_config(), dir.path(), mock_client_factory(kMockDir / "shift.json"));
  p.run_all();
  for (const auto& c : read_json(p.layout().comparisons())) {
    CHECK(c["tv"].get<double>() == doctest::Approx(5.0 / 17.0).epsilon(1e-12));
    CHECK(c["p_value"].get<double>() < 1e-3);
  }
  const json top = read_json(p.layout().report_dir() / "top_n.json");
  for (const auto& e : top["entries"]) {
    CHECK(e["only_functional"] == json::array({"loyal"}));
    CHECK(e["only_decorative"] == json::array({"small"}));
  }
}

TEST_CASE("gate eliminates a concept the first model misreads") {
  if (!testing::kHaveTestFonts) return;
  testing::TempDir dir("gate");
  Pipeline p(testing::test_config(), dir.path(), mock_client_factory(kMockDir / "gating.json"));
  const std::string summary = p.run_all();
  CHECK(summary.find("concepts: 2 original, 1 retained, 1 eliminated (Beagle)") != std::string::npos);
  const json acc = read_json(p.layout().accuracy());
  CHECK(acc["mock-a"]["decorative"]["accuracy"] == "0.9000");
  CHECK(acc["mock-b"]["decorative"]["accuracy"] == "1.0000");
  const json comparisons = read_json(p.layout().comparisons());
  REQUIRE(comparisons.size() == 2);
  for (const auto& c : comparisons) CHECK(c["concept_id"] == "bengal");
}

TEST_CASE("analysis refuses incomplete strata") {
  if (!testing::kHaveTestFonts) return;
  testing::TempDir dir("incomplete");
  Pipeline p(testing::test_config(), dir.path(), mock_client_factory(kMockDir / "null.json"));
  p.render();
  p.identify();
  p.filter();
  p.collect();
  p.extract();
  const auto manifest = read_manifest(p.layout().manifest());
  std::vector<SampledSet> sets;
  for (const auto& j : read_jsonl(p.layout().sampled())) sets.push_back(sampled_set_from_json(j));
  std::vector<AttributeList> lists;
  for (const auto& j : read_jsonl(p.layout().attributes())) lists.push_back(attribute_list_from_json(j));
  CHECK_NOTHROW(analyze(p.config(), manifest, sets, lists));
  const AttributeList dropped = lists[17];
  lists.erase(lists.begin() + 17);
  try {
    analyze(p.config(), manifest, sets, lists);
    FAIL("expected IncompleteDataError");
  } catch (const IncompleteDataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("899 of 900") != std::string::npos);
    CHECK(msg.find(dropped.stimulus_id) != std::string::npos);
  }
}

TEST_CASE("an interrupted run resumes without repeating queries") {
  if (!testing::kHaveTestFonts) return;
  testing::TempDir dir("resume");
  const RunConfig config = serial_config();
  std::size_t total = 0;
  {
    testing::TempDir fresh("resume_ref");
    Pipeline ref(config, fresh.path(), mock_client_factory(kMockDir / "null.json"));
    ref.run_all();
    total = ref.queries_issued();
  }
  CHECK(total == 2 * 160 + 2 * 2 * 2 * 900);

  const std::size_t k = 1234;
  auto budget = std::make_shared<std::size_t>(k);
  const ClientFactory mock = mock_client_factory(kMockDir / "null.json");
  const ClientFactory limited = [&](const ModelEndpoint& e) {
    return std::make_shared<Budgeted>(mock(e), budget);
  };
  {
    Pipeline first(config, dir.path(), limited);
    first.render();
    first.identify();
    first.filter();
    CHECK_THROWS_AS(first.collect(), Interrupted);
    // The attempt that threw counts as a miss as well.
    CHECK(first.queries_issued() == k + 1);
  }
  Pipeline second(config, dir.path(), mock);
  second.run_all();
  CHECK(second.queries_issued() == total - k);

  Pipeline third(config, dir.path(), mock);
  third.run_all();
  CHECK(third.queries_issued() == 0);
}

TEST_CASE("re-running with the same seed reproduces every report byte") {
  if (!testing::kHaveTestFonts) return;
  testing::TempDir a("bytes_a");
  testing::TempDir b("bytes_b");
  Pipeline pa(testing::test_config(), a.path(), mock_client_factory(kMockDir / "shift.json"));
  Pipeline pb(apply_overrides(testing::test_config(), Overrides{.concurrency = 1u}), b.path(),
              mock_client_factory(kMockDir / "shift.json"));
  pa.run_all();
  pb.run_all();
  for (const auto& entry : fs::directory_iterator(pa.layout().report_dir())) {
    const std::string name = entry.path().filename().string();
    if (name == "run_manifest.json") continue;  // the config digest includes max_parallel
    CHECK_MESSAGE(testing::slurp(entry.path()) == testing::slurp(pb.layout().report_dir() / name), name);
  }
  CHECK(testing::slurp(pa.layout().manifest()) == testing::slurp(pb.layout().manifest()));
  CHECK(testing::slurp(pa.layout().collect_log()) == testing::slurp(pb.layout().collect_log()));
}
