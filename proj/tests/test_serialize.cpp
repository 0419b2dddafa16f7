#include <doctest.h>

#include "support.hpp"

#include "semiflex/chain.hpp"
#include "semiflex/disorder.hpp"
#include "semiflex/presets.hpp"
#include "semiflex/serialize.hpp"

#include <cstdlib>
#include <sstream>

using namespace semiflex;
using namespace testing;
using nlohmann::json;

TEST_CASE("17-digit formatting round-trips") {
  RngStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0 / 0.0) == "inf");
}

TEST_CASE("csv writer") {
  CsvWriter w({"a", "b"});
  w.row({1.0, 0.5});
  w.row({2.0, std::nan("")});
  CHECK(w.str() == "a,b\n1,0.5\n2,\n");
  CHECK_THROWS_AS(w.row({1.0}), std::invalid_argument);
}

TEST_CASE("trajectory csv") {
  RngStream rng(2);
  const auto t = simulate_chain(RotationLaw::dirac(Rotation::identity(2)), DisorderModel::constant(Rotation::identity(2)),
                                UnitVector::basis(2, 1), 2, rng);
  CHECK(trajectory_csv(t).str() == "step,x1,x2\n0,1,0\n1,2,0\n2,3,0\n");
}

TEST_CASE("superop json") {
  RngStream rng(3);
  const SuperOp a = random_superop(3, rng);
  const json j = superop_to_json(a);
  CHECK(j.at("d") == 3);
  CHECK(j.at("entries").size() == 81);
  CHECK(j.at("entries")[1 * 9 + 2].get<double>() == a.entries()(1, 2));
  CHECK(hs_norm(superop_from_json(j) - a) == 0.0);
}

TEST_CASE("fnv1a reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("presets construct") {
  for (const auto& name : preset_names()) {
    const auto cfg = preset(name);
    const auto law = make_law(cfg.at("law"));
    const auto omega = make_disorder(cfg.at("disorder"), 1);
    CHECK(law.dim() == omega.dim());
    CHECK(cfg.at("v0").size() == static_cast<std::size_t>(law.dim()));
  }
  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
  CHECK((moments_exact(make_law(preset("cI-half-d3").at("law"))).mean - 0.5 * Matrix::Identity(3, 3)).norm() < 1e-14);
  CHECK(make_law(law_shorthand("dirac-identity")).dim() == 2);
  CHECK(make_law(law_shorthand("dirac-identity", 3)).dim() == 3);
  CHECK(make_disorder(disorder_shorthand("constant-identity", 3), 0).is_identity());
  CHECK_THROWS_AS(law_shorthand("nope"), std::invalid_argument);
  CHECK_THROWS_AS(ci_window_for(0.2), std::domain_error);
}
