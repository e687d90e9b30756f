#include "doctest.h"

#include "kesten/config.hpp"
#include "kesten/error.hpp"

#include <cmath>
#include <filesystem>
#include <string>

using namespace kesten;

namespace {

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("shipped configurations parse") {
  for (const auto& entry : std::filesystem::directory_iterator(KESTEN_CONFIG_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
  }
}

TEST_CASE("two-point configuration") {
  const RunConfig c = parse_config(R"(model:
  family: scalar_two_point
  atoms: [2, 0.5]
  weights: [0.3, 0.7]
)");
  CHECK(c.model.family == Family::ScalarTwoPoint);
  CHECK(c.model.dimension == 1);
  REQUIRE(c.model.m_atoms.size() == 2);
  CHECK(c.model.m_atoms[0](0, 0) == 2.0);
  CHECK(c.model.m_weights[1] == 0.7);
  CHECK(c.model.q.atoms[0](0) == 1.0);
  CHECK_FALSE(c.regen.enabled);
  CHECK(c.hash.size() == 16);
}

TEST_CASE("similarity with a fixed angle") {
  const RunConfig c = parse_config(R"(model:
  family: similarity
  dimension: 2
  scale: {law: fixed, value: 0.5}
  rotation: {law: fixed, angle: 1.5707963267948966}
)");
  const Matrix& o = c.model.rotation.fixed;
  CHECK(o(0, 1) == doctest::Approx(-1.0));
  CHECK(o(1, 0) == doctest::Approx(1.0));
  CHECK(std::abs(o(0, 0)) < 1e-15);
  CHECK(c.model.scale.kind == ScaleLaw::Kind::Deterministic);
}

TEST_CASE("custom tabulated family in two dimensions") {
  const RunConfig c = parse_config(R"(model:
  family: custom
  dimension: 2
  atoms:
    - [[0.5, 0.1], [0, 0.4]]
    - [[1.5, 0], [0.2, 0.3]]
  weights: [0.6, 0.4]
  q: {law: indexed, values: [[1, 0], [0, 1]]}
tail:
  t_min: 2
  t_max: 50
regeneration:
  p: 0.1
)");
  CHECK(c.model.tabulated());
  CHECK(c.model.m_atoms[1](1, 0) == 0.2);
  CHECK(c.model.q.kind == QLaw::Kind::Indexed);
  CHECK(c.tail.readout.t_min == 2.0);
  CHECK(c.regen.enabled);
  CHECK(c.regen.p == 0.1);
}

TEST_CASE("section settings") {
  const RunConfig c = parse_config(R"(model:
  family: scalar_lognormal
  log_mean: -0.25
  log_sd: 0.5
operator: {n_mc: 4000, root_tol: 1.0e-9}
chain: {steps: 30000, method: resample, proposals: 256}
lyapunov: {steps: 5000, chains: 4}
)");
  CHECK(c.op.op.n_mc == 4000);
  CHECK(c.op.op.root_tol == 1e-9);
  CHECK(c.chain.method == ShiftedStepSampler::Method::Resample);
  CHECK(c.chain.proposals == 256);
  CHECK(c.lyapunov.chains == 4);
}

TEST_CASE("errors carry line numbers") {
  SUBCASE("unknown key") {
    CHECK(error_line("model:\n  family: scalar_two_point\n  atoms: [2, 0.5]\n  weights: [0.3, 0.7]\n  colour: red\n") ==
          5);
  }
  SUBCASE("unknown top-level section") {
    CHECK(error_line("model:\n  family: scalar_two_point\n  atoms: [2, 0.5]\n  weights: [0.3, 0.7]\nextras: 1\n") ==
          5);
  }
  SUBCASE("malformed YAML") { CHECK(error_line("model:\n  family: [unclosed\n") >= 2); }
  SUBCASE("unknown family") { CHECK(error_line("model:\n  family: banana\n") == 2); }
  SUBCASE("wrong matrix shape") {
    CHECK(error_line("model:\n  family: gaussian_perturbed\n  dimension: 2\n  gamma0: [[1, 0]]\n  sigma: 1\n") == 4);
  }
  SUBCASE("range checks") {
    const std::string m = "model:\n  family: scalar_two_point\n  atoms: [2, 0.5]\n  weights: [0.3, 0.7]\n";
    CHECK(error_line(m + "tail:\n  q_lo: 0.9\n  q_hi: 0.5\n") > 4);
    CHECK(error_line(m + "regeneration:\n  p: 1.5\n") == 6);
    CHECK(error_line(m + "audit:\n  samples: 10\n") == 6);
    CHECK(error_line(m + "tail:\n  t_min: 3\n") > 4);
  }
  SUBCASE("invalid weights are reported at the model") {
    CHECK(error_line("model:\n  family: scalar_two_point\n  atoms: [2, 0.5]\n  weights: [0.3, 0.6]\n") >= 1);
  }
  SUBCASE("not a mapping") { CHECK(error_line("- 1\n- 2\n") == 1); }
}

TEST_CASE("the hash tracks the text") {
  const std::string a = "model:\n  family: scalar_two_point\n  atoms: [2, 0.5]\n  weights: [0.3, 0.7]\n";
  CHECK(parse_config(a).hash == parse_config(a).hash);
  CHECK(parse_config(a).hash != parse_config(a + "# comment\n").hash);
}
